// eval/eval.h

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

#ifndef CLLAB_EVAL_EVAL_H_
#define CLLAB_EVAL_EVAL_H_

#include <string>
#include <vector>

#include "graph/graph.h"
#include "net/net.h"
#include "synth/synth.h"

namespace cllab {

// Micro-averaged label error over one test set: total edits over total
// reference labels, NOT the mean of per-utterance rates.
struct DomainScore {
  std::string domain;
  int64 total_edits = 0;
  int64 total_ref_labels = 0;
  int32 num_utts = 0;
  int32 num_no_path = 0;  // counted as full deletions

  double ErrorRatePercent() const {
    if (total_ref_labels == 0)
      throw InvalidInputError("error rate over empty reference");
    return 100.0 * static_cast<double>(total_edits) /
           static_cast<double>(total_ref_labels);
  }
};

// Classic edit distance (substitution/insertion/deletion all cost 1).
int64 Levenshtein(const std::vector<int32> &a, const std::vector<int32> &b);

// Removes consecutive duplicate labels: [0,0,1,1,1,0] -> [0,1,0].  Inverse of
// the frame-expansion in the numerator graph's self-loops.
std::vector<int32> CollapseRepeats(const std::vector<int32> &labels);

// Viterbi-decodes every utterance through decode_graph, collapses repeats,
// and accumulates edit counts.  Utterances with no complete path score as
// full deletions of their reference and are logged.  Parallel over
// utterances; the reduction is in utterance order, so the result does not
// depend on num_threads.
DomainScore DecodeAndScore(const Net &net, const Graph &decode_graph,
                           const std::string &domain,
                           const std::vector<const Utterance *> &test_utts,
                           int32 num_threads = 1);

// 1 - (wer_cl - wer_comb) / (wer_ft - wer_comb): the fraction of the gap
// between fine-tuning and combined-data training that the CL method closes.
// Throws DegenerateGapError when wer_ft == wer_comb.
double GapRecovery(double wer_cl, double wer_comb, double wer_ft);

// 1 - cwer / cwer_src: improvement on the incoming domain relative to the
// source model's error on it.  Requires cwer_src > 0.
double RelativeLearning(double cwer, double cwer_src);

// pwer / pwer_src - 1: degradation on past domains (averaged) relative to
// the source model.  Requires pwer_src > 0.
double RelativeForgetting(double pwer, double pwer_src);

// Triangular error table: row k holds the model after step k evaluated on
// domains 0..k (row 0 is the seed model on the seed domain).
struct EvalMatrix {
  std::vector<std::string> domains;        // column order
  std::vector<std::vector<double>> rows;   // rows[k].size() == k + 1

  double RowAverage(int32 k) const;
};

// CSV with header "step,target,<domains...>,Avg"; blank cells above the
// diagonal; error rates fixed to 4 decimals.
std::string EvalMatrixCsv(const EvalMatrix &matrix);

// One step's CL metrics; gap_recovery is absent until reference (ft, comb)
// runs are supplied to the report.
struct StepMetrics {
  int32 step = 0;
  std::string method;
  bool has_gap_recovery = false;
  double gap_recovery = 0.0;
  double rel_learning = 0.0;
  double rel_forgetting = 0.0;
};

// CSV with header "step,method,gap_recovery,rel_learning,rel_forgetting";
// gap_recovery cell blank when unavailable.
std::string MetricsCsv(const std::vector<StepMetrics> &metrics);

}  // namespace cllab

#endif  // CLLAB_EVAL_EVAL_H_
