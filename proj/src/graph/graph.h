// graph/graph.h

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

#ifndef CLLAB_GRAPH_GRAPH_H_
#define CLLAB_GRAPH_GRAPH_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "base/common.h"

namespace cllab {

// One weighted transition.  Every arc consumes exactly one label (there are
// no epsilon arcs anywhere in this codebase).
struct Arc {
  int32 src_state = 0;
  int32 dst_state = 0;
  int32 label = 0;
  double log_weight = 0.0;

  friend bool operator==(const Arc &a, const Arc &b) = default;
};

// Weighted finite-state label acceptor with a single start state.
// final_log_weights[s] == kLogZero means state s is not final.  Arcs are kept
// sorted by (src_state, label, dst_state) so iteration order, serialization
// and tie-breaking are deterministic.
class Graph {
 public:
  Graph() = default;
  Graph(int32 num_states, int32 start_state, int32 num_labels);

  int32 NumStates() const { return num_states_; }
  int32 StartState() const { return start_state_; }
  int32 NumLabels() const { return num_labels_; }
  int32 NumArcs() const { return static_cast<int32>(arcs_.size()); }
  const std::vector<Arc> &Arcs() const { return arcs_; }
  const std::vector<double> &FinalLogWeights() const { return final_; }
  double FinalLogWeight(int32 state) const { return final_[state]; }
  bool IsFinal(int32 state) const { return final_[state] != kLogZero; }

  void AddArc(const Arc &arc);
  void SetFinal(int32 state, double log_weight);

  // Sorts arcs and builds the per-state arc index; must be called once after
  // the last AddArc.  Construction helpers below all return finished graphs.
  void Finish();
  bool Finished() const { return finished_; }

  // Arcs leaving `state` as [begin, end) indices into Arcs().
  std::pair<int32, int32> ArcRange(int32 state) const;

  // Throws InvalidInputError for: states unreachable from the start,
  // states that cannot reach a final state, non-finite arc weights,
  // out-of-range labels or state indices, or no final state at all.
  void Validate() const;

  friend bool operator==(const Graph &a, const Graph &b);

 private:
  int32 num_states_ = 0;
  int32 start_state_ = 0;
  int32 num_labels_ = 0;
  std::vector<Arc> arcs_;
  std::vector<double> final_;
  std::vector<int32> arc_offsets_;  // size num_states_+1 once finished
  bool finished_ = false;
};

// Label bigram LM over P labels plus a sentence boundary.  log_probs is
// (P+1) x (P+1); row/column index P is the boundary: row P conditions on
// sentence start, column P is the end-of-sentence event.  Permitted
// successors are all P labels plus end for label rows, and the P labels only
// for the start row.
struct BigramLm {
  int32 num_labels = 0;
  std::vector<double> log_probs;  // (P+1)*(P+1), row-major

  BigramLm() = default;
  explicit BigramLm(int32 p)
      : num_labels(p),
        log_probs(static_cast<size_t>(p + 1) * (p + 1), kLogZero) {}

  int32 BoundaryIndex() const { return num_labels; }
  double LogProb(int32 context, int32 successor) const {
    return log_probs[static_cast<size_t>(context) * (num_labels + 1) +
                     successor];
  }
  double &LogProb(int32 context, int32 successor) {
    return log_probs[static_cast<size_t>(context) * (num_labels + 1) +
                     successor];
  }

  // Throws unless every row sums to 1 +/- tol over its permitted successors.
  void CheckNormalized(double tol = 1e-9) const;
};

// Left-to-right chain over the reference labels: one state per position plus
// a final state; the position-i arc emits labels[i] at weight 0.  With
// allow_self_loops each non-final state also loops on labels[i], so every
// monotonic alignment of length T >= labels.size() is a path.
Graph BuildNumeratorGraph(const std::vector<int32> &labels, int32 num_labels,
                          bool allow_self_loops);

// One state per label plus a start state; label-to-label arcs carry the
// bigram log-probabilities and every label state is final with the LM's end
// log-probability.  Zero-probability successors get no arc.
Graph BuildDenominatorGraph(const BigramLm &lm);

// Add-k smoothed bigram counts over the transcripts.  Rows with no counts
// and k == 0 fall back to uniform over their permitted successors.
BigramLm EstimateBigramLm(const std::vector<std::vector<int32>> &transcripts,
                          int32 num_labels, double smoothing_count);

// Line-based text format:
//   STATES n START s LABELS p
//   ARC src dst label weight       (one per arc, in sorted order)
//   FINAL state weight             (one per final state)
// Weights are printed with 17 significant digits and round-trip bit-exactly.
void WriteGraphText(std::ostream &os, const Graph &graph);
Graph ReadGraphText(std::istream &is);
std::string GraphToString(const Graph &graph);
Graph GraphFromString(const std::string &text);

}  // namespace cllab

#endif  // CLLAB_GRAPH_GRAPH_H_
