// harness/harness.h

// Copyright 2026  The cllab authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CLLAB_HARNESS_HARNESS_H_
#define CLLAB_HARNESS_HARNESS_H_

#include <string>
#include <vector>

#include "eval/eval.h"
#include "graph/graph.h"
#include "losses/losses.h"
#include "net/net.h"
#include "synth/synth.h"

namespace cllab {

// Everything a run needs beyond the data.  All randomness (net init, epoch
// shuffles) derives from master_seed, so a config plus a data directory
// pins every byte of the outputs.
struct PipelineConfig {
  std::string method = "ft";  // ft | ewc | lwf | denlwf | comb

  double alpha_lwf = 1.0;
  double alpha_denlwf = 0.6;
  double alpha_ewc = 300.0;

  int32 seed_epochs = 15;      // seed and comb training
  int32 epochs_per_step = 10;  // each expansion step
  double learning_rate = 0.0015;
  double lr_final_factor = 0.1;  // lr decays linearly to lr * factor
  double momentum = 0.0;
  int32 minibatch_size = 8;
  double max_param_change = 1.0;  // l2 cap on one update (lr scaled down
                                  // for the update that would exceed it);
                                  // 0 disables

  uint64 master_seed = 1;
  int32 num_threads = 1;

  int32 context_radius = 1;
  std::vector<int32> hidden_dims = {32, 32};

  bool numerator_self_loops = true;
  bool denlwf_include_offset = true;  // false = unbalanced negative control
  bool gamma_src_prev_graph = false;  // reference occupancies on the previous
                                      // step's denominator graph
  bool freeze_den_graph = false;      // keep the seed step's denominator
                                      // graph for all steps
  double lm_smoothing = 0.5;
  double decode_lm_smoothing = 1e6;  // decode-graph add-k; large = near-uniform
                                     // transitions (acoustic-only decoding)

  // The active method's regularizer scale (0 for ft/comb).
  double ActiveAlpha() const;
  void Validate() const;

  friend bool operator==(const PipelineConfig &a,
                         const PipelineConfig &b) = default;
};

// JSON round-trip of the fully resolved config (the run directory's
// config.json).
std::string ConfigToJson(const PipelineConfig &config);
PipelineConfig ConfigFromJson(const std::string &text);

// Flat "key = value" text, one per line, '#' comments.  Keys are the
// PipelineConfig field names; hidden_dims is comma-separated.  Unknown keys
// or unparsable values throw InvalidInputError.
void ApplyAssignment(PipelineConfig *config, const std::string &key,
                     const std::string &value);
void ApplyConfigFile(PipelineConfig *config, const std::string &text);

// Cross-step memory of one continual-learning run.  `step` counts completed
// training stages (0 = seed); eval_history row k is the stage-k model scored
// on domains_seen[0..k].  ft keeps snapshots and caches empty.
struct ClState {
  Net model{NetConfig{}};
  int32 step = 0;
  std::vector<std::string> domains_seen;
  std::vector<ClSnapshot> snapshots;            // EWC anchors, one per stage
  ReferenceCache ref_posteriors;                // y^src of the current stage
  ReferenceCache ref_den_occupancies;           // gamma^src of the current stage
  Graph last_den_graph;                         // denominator graph last trained on
  EvalMatrix eval_history;
  std::vector<StepMetrics> metrics;             // one per expansion step
  std::vector<std::string> seed_eval_domains;   // seed model scored everywhere
  std::vector<double> seed_eval_errors;
};

void SaveClState(const ClState &state, const std::string &path);
ClState LoadClState(const std::string &path);

// One optimizer step's log line.  f_mmi and (for lwf/denlwf) f_reg are
// per-utterance means over the minibatch; for ewc f_reg is the whole-batch
// penalty.  lwf_ce is the per-frame reference cross-entropy, logged for both
// lwf and denlwf (for denlwf it is observational only and takes no part in
// the gradient).
struct IterationRow {
  int32 iteration = 0;
  double f_mmi = 0.0;
  double f_reg = 0.0;
  double lwf_ce = 0.0;
  bool has_lwf_ce = false;
};

// CSV "iteration,f_mmi,f_reg,lwf_ce"; the lwf_ce cell is blank when absent.
std::string IterationCsv(const std::vector<IterationRow> &rows);

// Bigram label LM over every domain's training transcripts, as a
// denominator-style graph; shared by all decoding in a run.
Graph BuildDecodeGraph(const std::vector<Dataset> &datasets, double smoothing);

// Denominator graph for one step from that domain's training transcripts.
Graph BuildStepDenGraph(const Dataset &dataset, double smoothing);

// Trains a fresh model on datasets[0] with plain LF-MMI and scores it on
// every domain's test set.  eval_history starts with the seed domain's row.
ClState TrainSeed(const PipelineConfig &config,
                  const std::vector<Dataset> &datasets,
                  const Graph &decode_graph, std::vector<IterationRow> *log);

// One continual-learning step onto `target`:
//  1. scores the source model on the target test set (the incoming-domain
//     reference for relative learning);
//  2. builds the step's reference caches / Fisher snapshot per method;
//  3. trains on the target with F_MMI + F_reg;
//  4. appends the triangular evaluation row over all domains seen and the
//     step's learning/forgetting metrics.
void ExpandStep(ClState *state, const Dataset &target,
                const std::vector<Dataset> &datasets,
                const Graph &decode_graph, const PipelineConfig &config,
                std::vector<IterationRow> *log);

// Single joint model over every domain's training data; its triangular
// matrix repeats the one evaluation row-by-row so it lines up with the
// continual runs.
struct CombResult {
  Net model{NetConfig{}};
  std::vector<std::string> domains;
  std::vector<double> errors;
  EvalMatrix triangle;
};

CombResult TrainCombined(const PipelineConfig &config,
                         const std::vector<Dataset> &datasets,
                         const Graph &decode_graph,
                         std::vector<IterationRow> *log);

// One expansion step per (method, alpha) from a common source state.
struct SweepRow {
  std::string method;
  double alpha = 0.0;
  std::vector<double> errors;  // final triangular row of the expanded state
  double average = 0.0;
};

std::vector<SweepRow> SweepAlpha(const PipelineConfig &config,
                                 const ClState &source, const Dataset &target,
                                 const std::vector<Dataset> &datasets,
                                 const Graph &decode_graph,
                                 const std::vector<double> &alphas,
                                 const std::vector<std::string> &methods);

// CSV "method,alpha,<domains...>,avg" at full precision, rows in
// (method, alpha) input order.
std::string SweepCsv(const std::vector<SweepRow> &rows,
                     const std::vector<std::string> &domains);

// Run directory layout (no timestamps anywhere; identical config + data =>
// byte-identical directory):
//   config.json                    resolved PipelineConfig
//   checkpoints/step_k.bin         model after stage k (comb: comb.bin)
//   state/step_k.clstate           resumable ClState after stage k
//   logs/step_k_iters.csv          per-iteration objectives (comb: comb_iters.csv)
//   results/eval_matrix.csv        triangular error table
//   results/metrics.csv            per-step CL metrics (not for comb)
//   results/summary.json           everything above, machine-readable
void WriteRunConfig(const PipelineConfig &config, const std::string &run_dir);
void WriteStepArtifacts(const ClState &state,
                        const std::vector<IterationRow> &log,
                        const std::string &run_dir);
void WriteResults(const ClState &state, const PipelineConfig &config,
                  const std::string &run_dir);

// Seed plus one expansion step per remaining domain (or the single comb
// training when method == comb), writing the full run directory.
ClState RunMethodPipeline(const PipelineConfig &config,
                          const std::vector<Dataset> &datasets,
                          const std::string &run_dir);
CombResult RunCombPipeline(const PipelineConfig &config,
                           const std::vector<Dataset> &datasets,
                           const std::string &run_dir);
void RunPipeline(const PipelineConfig &config,
                 const std::vector<Dataset> &datasets,
                 const std::string &run_dir);

// Re-renders results/metrics.csv and writes results/report.md for run_dir.
// When ft_run and comb_run directories are given, per-step gap recovery is
// filled in from their row averages (refs must be ft/comb runs over the same
// domains).  Empty strings skip the gap column.
void WriteReport(const std::string &run_dir, const std::string &ft_run,
                 const std::string &comb_run);

const Dataset &FindDataset(const std::vector<Dataset> &datasets,
                           const std::string &name);

}  // namespace cllab

#endif  // CLLAB_HARNESS_HARNESS_H_
