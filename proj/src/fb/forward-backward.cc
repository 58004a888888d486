// fb/forward-backward.cc

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

#include "fb/forward-backward.h"

#include <algorithm>
#include <cmath>

namespace cllab {

namespace {

void CheckInputs(const Graph &graph, const EmissionMatrix &emissions) {
  if (!graph.Finished())
    throw InvalidInputError("graph not finished");
  if (emissions.NumCols() != graph.NumLabels())
    throw InvalidInputError(
        "emission label count " + std::to_string(emissions.NumCols()) +
        " does not match graph label count " +
        std::to_string(graph.NumLabels()));
  if (emissions.NumRows() < 1)
    throw InvalidInputError("need at least one frame");
  if (!emissions.AllFinite())
    throw InvalidInputError("non-finite emission score");
}

// alpha has T+1 rows of NumStates entries; row t is the log-prob of reaching
// each state after consuming t frames.  Throws NoPathError when a row (or the
// final combination, reported as frame T) is empty.
Matrix Forward(const Graph &graph, const EmissionMatrix &emissions,
               double *total_out) {
  int32 t_max = emissions.NumRows();
  int32 num_states = graph.NumStates();
  Matrix alpha(t_max + 1, num_states, kLogZero);
  alpha(0, graph.StartState()) = 0.0;
  const std::vector<Arc> &arcs = graph.Arcs();
  for (int32 t = 0; t < t_max; ++t) {
    const double *prev = alpha.RowData(t);
    double *next = alpha.RowData(t + 1);
    for (const Arc &a : arcs) {
      double src = prev[a.src_state];
      if (src == kLogZero) continue;
      double score = src + a.log_weight + emissions(t, a.label);
      next[a.dst_state] = LogAdd(next[a.dst_state], score);
    }
    bool alive = false;
    for (int32 s = 0; s < num_states; ++s)
      if (next[s] != kLogZero) alive = true;
    if (!alive) throw NoPathError(t, "");
  }
  double total = kLogZero;
  for (int32 s = 0; s < num_states; ++s) {
    if (graph.IsFinal(s))
      total = LogAdd(total, alpha(t_max, s) + graph.FinalLogWeight(s));
  }
  if (total == kLogZero) throw NoPathError(t_max, "");
  *total_out = total;
  return alpha;
}

}  // namespace

FbResult LogprobAndOccupancies(const Graph &graph,
                               const EmissionMatrix &emissions) {
  CheckInputs(graph, emissions);
  int32 t_max = emissions.NumRows();
  int32 num_states = graph.NumStates();
  double total;
  Matrix alpha = Forward(graph, emissions, &total);

  Matrix beta(t_max + 1, num_states, kLogZero);
  for (int32 s = 0; s < num_states; ++s)
    beta(t_max, s) = graph.FinalLogWeight(s);
  const std::vector<Arc> &arcs = graph.Arcs();
  for (int32 t = t_max - 1; t >= 0; --t) {
    const double *next = beta.RowData(t + 1);
    double *cur = beta.RowData(t);
    for (const Arc &a : arcs) {
      double dst = next[a.dst_state];
      if (dst == kLogZero) continue;
      double score = a.log_weight + emissions(t, a.label) + dst;
      cur[a.src_state] = LogAdd(cur[a.src_state], score);
    }
  }

  FbResult result;
  result.total_logprob = total;
  // Arc posteriors, accumulated per (frame, label) in probability space; the
  // terms are all <= 1 so plain summation in arc order is stable and
  // deterministic.
  result.gamma = OccupancyMatrix(t_max, graph.NumLabels(), 0.0);
  for (int32 t = 0; t < t_max; ++t) {
    const double *fwd = alpha.RowData(t);
    const double *bwd = beta.RowData(t + 1);
    double *row = result.gamma.RowData(t);
    for (const Arc &a : arcs) {
      double fs = fwd[a.src_state];
      double bd = bwd[a.dst_state];
      if (fs == kLogZero || bd == kLogZero) continue;
      double log_post = fs + a.log_weight + emissions(t, a.label) + bd - total;
      row[a.label] += std::exp(log_post);
    }
  }
  return result;
}

double Logprob(const Graph &graph, const EmissionMatrix &emissions) {
  CheckInputs(graph, emissions);
  double total;
  Forward(graph, emissions, &total);
  return total;
}

ViterbiResult Viterbi(const Graph &graph, const EmissionMatrix &emissions) {
  CheckInputs(graph, emissions);
  int32 t_max = emissions.NumRows();
  int32 num_states = graph.NumStates();
  Matrix delta(t_max + 1, num_states, kLogZero);
  // Backpointer: index of the arc that produced each state's best score.
  std::vector<std::vector<int32>> back(
      t_max, std::vector<int32>(num_states, -1));
  delta(0, graph.StartState()) = 0.0;
  const std::vector<Arc> &arcs = graph.Arcs();
  for (int32 t = 0; t < t_max; ++t) {
    const double *prev = delta.RowData(t);
    double *next = delta.RowData(t + 1);
    for (int32 i = 0; i < graph.NumArcs(); ++i) {
      const Arc &a = arcs[i];
      double src = prev[a.src_state];
      if (src == kLogZero) continue;
      double score = src + a.log_weight + emissions(t, a.label);
      // Strict > keeps the first (lowest-ordered) arc on ties; arcs are
      // sorted by (src_state, label, dst_state).
      if (score > next[a.dst_state]) {
        next[a.dst_state] = score;
        back[t][a.dst_state] = i;
      }
    }
    bool alive = false;
    for (int32 s = 0; s < num_states; ++s)
      if (next[s] != kLogZero) alive = true;
    if (!alive) throw NoPathError(t, "");
  }
  double best = kLogZero;
  int32 best_state = -1;
  for (int32 s = 0; s < num_states; ++s) {
    if (!graph.IsFinal(s)) continue;
    double score = delta(t_max, s) + graph.FinalLogWeight(s);
    if (score != kLogZero && score > best) {
      best = score;
      best_state = s;
    }
  }
  if (best_state < 0) throw NoPathError(t_max, "");

  ViterbiResult result;
  result.best_logprob = best;
  result.labels.resize(t_max);
  int32 state = best_state;
  for (int32 t = t_max - 1; t >= 0; --t) {
    int32 arc_index = back[t][state];
    const Arc &a = arcs[arc_index];
    result.labels[t] = a.label;
    state = a.src_state;
  }
  return result;
}

}  // namespace cllab
