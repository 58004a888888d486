// graph/graph.cc

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

#include "graph/graph.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace cllab {

Graph::Graph(int32 num_states, int32 start_state, int32 num_labels)
    : num_states_(num_states),
      start_state_(start_state),
      num_labels_(num_labels),
      final_(num_states, kLogZero) {
  if (num_states <= 0) throw InvalidInputError("graph needs >= 1 state");
  if (start_state < 0 || start_state >= num_states)
    throw InvalidInputError("start state out of range");
  if (num_labels <= 0) throw InvalidInputError("graph needs >= 1 label");
}

void Graph::AddArc(const Arc &arc) {
  if (finished_) throw InvalidInputError("AddArc after Finish");
  arcs_.push_back(arc);
}

void Graph::SetFinal(int32 state, double log_weight) {
  if (state < 0 || state >= num_states_)
    throw InvalidInputError("SetFinal: state out of range");
  final_[state] = log_weight;
}

void Graph::Finish() {
  std::sort(arcs_.begin(), arcs_.end(), [](const Arc &a, const Arc &b) {
    if (a.src_state != b.src_state) return a.src_state < b.src_state;
    if (a.label != b.label) return a.label < b.label;
    return a.dst_state < b.dst_state;
  });
  arc_offsets_.assign(num_states_ + 1, 0);
  for (const Arc &a : arcs_) {
    if (a.src_state < 0 || a.src_state >= num_states_)
      throw InvalidInputError("arc source state out of range");
    ++arc_offsets_[a.src_state + 1];
  }
  for (int32 s = 0; s < num_states_; ++s)
    arc_offsets_[s + 1] += arc_offsets_[s];
  finished_ = true;
}

std::pair<int32, int32> Graph::ArcRange(int32 state) const {
  if (!finished_) throw InvalidInputError("ArcRange before Finish");
  return {arc_offsets_[state], arc_offsets_[state + 1]};
}

void Graph::Validate() const {
  if (!finished_) throw InvalidInputError("Validate before Finish");
  bool any_final = false;
  for (double w : final_) {
    if (w != kLogZero) {
      if (!std::isfinite(w)) throw InvalidInputError("non-finite final weight");
      any_final = true;
    }
  }
  if (!any_final) throw InvalidInputError("graph has no final state");
  for (const Arc &a : arcs_) {
    if (a.dst_state < 0 || a.dst_state >= num_states_)
      throw InvalidInputError("arc destination state out of range");
    if (a.label < 0 || a.label >= num_labels_)
      throw InvalidInputError("arc label out of range");
    if (!std::isfinite(a.log_weight))
      throw InvalidInputError("non-finite arc weight");
  }
  // Forward reachability from the start state.
  std::vector<bool> reached(num_states_, false);
  std::deque<int32> queue{start_state_};
  reached[start_state_] = true;
  while (!queue.empty()) {
    int32 s = queue.front();
    queue.pop_front();
    auto [begin, end] = ArcRange(s);
    for (int32 i = begin; i < end; ++i) {
      int32 d = arcs_[i].dst_state;
      if (!reached[d]) {
        reached[d] = true;
        queue.push_back(d);
      }
    }
  }
  for (int32 s = 0; s < num_states_; ++s)
    if (!reached[s])
      throw InvalidInputError("state " + std::to_string(s) +
                              " unreachable from start");
  // Co-reachability: every state must reach a final state.
  std::vector<std::vector<int32>> in_arcs(num_states_);
  for (const Arc &a : arcs_) in_arcs[a.dst_state].push_back(a.src_state);
  std::vector<bool> coreached(num_states_, false);
  for (int32 s = 0; s < num_states_; ++s) {
    if (IsFinal(s)) {
      coreached[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    int32 s = queue.front();
    queue.pop_front();
    for (int32 p : in_arcs[s]) {
      if (!coreached[p]) {
        coreached[p] = true;
        queue.push_back(p);
      }
    }
  }
  for (int32 s = 0; s < num_states_; ++s)
    if (!coreached[s])
      throw InvalidInputError("state " + std::to_string(s) +
                              " cannot reach a final state");
}

bool operator==(const Graph &a, const Graph &b) {
  return a.num_states_ == b.num_states_ && a.start_state_ == b.start_state_ &&
         a.num_labels_ == b.num_labels_ && a.arcs_ == b.arcs_ &&
         a.final_ == b.final_;
}

void BigramLm::CheckNormalized(double tol) const {
  int32 boundary = BoundaryIndex();
  for (int32 ctx = 0; ctx <= boundary; ++ctx) {
    double sum = 0.0;
    for (int32 succ = 0; succ <= boundary; ++succ) {
      if (ctx == boundary && succ == boundary) continue;  // no empty sentence
      double lp = LogProb(ctx, succ);
      if (lp != kLogZero) sum += std::exp(lp);
    }
    if (std::abs(sum - 1.0) > tol)
      throw InvalidInputError("bigram LM row " + std::to_string(ctx) +
                              " sums to " + std::to_string(sum));
  }
}

Graph BuildNumeratorGraph(const std::vector<int32> &labels, int32 num_labels,
                          bool allow_self_loops) {
  if (labels.empty())
    throw InvalidInputError("numerator graph needs a non-empty label sequence");
  for (int32 l : labels)
    if (l < 0 || l >= num_labels)
      throw InvalidInputError("numerator label " + std::to_string(l) +
                              " out of range [0, " +
                              std::to_string(num_labels) + ")");
  int32 len = static_cast<int32>(labels.size());
  Graph g(len + 1, 0, num_labels);
  for (int32 i = 0; i < len; ++i) {
    g.AddArc({i, i + 1, labels[i], 0.0});
    if (allow_self_loops) g.AddArc({i, i, labels[i], 0.0});
  }
  g.SetFinal(len, 0.0);
  g.Finish();
  return g;
}

Graph BuildDenominatorGraph(const BigramLm &lm) {
  int32 p = lm.num_labels;
  if (p <= 0) throw InvalidInputError("denominator graph needs >= 1 label");
  int32 boundary = lm.BoundaryIndex();
  // State b in [0, P) means "label b was just emitted"; state P is the start.
  Graph g(p + 1, p, p);
  for (int32 b = 0; b < p; ++b) {
    double lp = lm.LogProb(boundary, b);
    if (lp != kLogZero) g.AddArc({p, b, b, lp});
  }
  for (int32 a = 0; a < p; ++a) {
    for (int32 b = 0; b < p; ++b) {
      double lp = lm.LogProb(a, b);
      if (lp != kLogZero) g.AddArc({a, b, b, lp});
    }
    g.SetFinal(a, lm.LogProb(a, boundary));
  }
  g.Finish();
  g.Validate();
  return g;
}

BigramLm EstimateBigramLm(const std::vector<std::vector<int32>> &transcripts,
                          int32 num_labels, double smoothing_count) {
  if (num_labels <= 0) throw InvalidInputError("num_labels must be positive");
  if (smoothing_count < 0.0)
    throw InvalidInputError("smoothing count must be >= 0");
  bool any = false;
  for (const auto &t : transcripts)
    if (!t.empty()) any = true;
  if (!any) throw InvalidInputError("all transcripts empty");

  int32 boundary = num_labels;
  std::vector<std::vector<double>> counts(
      num_labels + 1, std::vector<double>(num_labels + 1, 0.0));
  for (const auto &t : transcripts) {
    if (t.empty()) continue;
    int32 prev = boundary;
    for (int32 l : t) {
      if (l < 0 || l >= num_labels)
        throw InvalidInputError("transcript label out of range");
      counts[prev][l] += 1.0;
      prev = l;
    }
    counts[prev][boundary] += 1.0;
  }

  BigramLm lm(num_labels);
  for (int32 ctx = 0; ctx <= boundary; ++ctx) {
    // The start context may not be followed by end; label contexts may be
    // followed by any label or end.
    int32 num_succ = (ctx == boundary) ? num_labels : num_labels + 1;
    double total = 0.0;
    for (int32 succ = 0; succ < num_succ; ++succ)
      total += counts[ctx][succ] + smoothing_count;
    for (int32 succ = 0; succ < num_succ; ++succ) {
      double c = counts[ctx][succ] + smoothing_count;
      double prob = (total > 0.0) ? c / total : 1.0 / num_succ;
      lm.LogProb(ctx, succ) = (prob > 0.0) ? std::log(prob) : kLogZero;
    }
  }
  return lm;
}

void WriteGraphText(std::ostream &os, const Graph &graph) {
  os << "STATES " << graph.NumStates() << " START " << graph.StartState()
     << " LABELS " << graph.NumLabels() << "\n";
  for (const Arc &a : graph.Arcs())
    os << "ARC " << a.src_state << " " << a.dst_state << " " << a.label << " "
       << FullPrecision(a.log_weight) << "\n";
  for (int32 s = 0; s < graph.NumStates(); ++s)
    if (graph.IsFinal(s))
      os << "FINAL " << s << " " << FullPrecision(graph.FinalLogWeight(s))
         << "\n";
}

Graph ReadGraphText(std::istream &is) {
  std::string keyword;
  int32 num_states, start, labels;
  std::string k_start, k_labels;
  if (!(is >> keyword >> num_states >> k_start >> start >> k_labels >>
        labels) ||
      keyword != "STATES" || k_start != "START" || k_labels != "LABELS")
    throw IoError("bad graph header");
  Graph g(num_states, start, labels);
  std::string line;
  std::getline(is, line);  // rest of header line
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ls >> keyword;
    if (keyword == "ARC") {
      Arc a;
      if (!(ls >> a.src_state >> a.dst_state >> a.label >> a.log_weight))
        throw IoError("bad ARC line: " + line);
      g.AddArc(a);
    } else if (keyword == "FINAL") {
      int32 s;
      double w;
      if (!(ls >> s >> w)) throw IoError("bad FINAL line: " + line);
      g.SetFinal(s, w);
    } else {
      throw IoError("unknown graph line: " + line);
    }
  }
  g.Finish();
  return g;
}

std::string GraphToString(const Graph &graph) {
  std::ostringstream os;
  WriteGraphText(os, graph);
  return os.str();
}

Graph GraphFromString(const std::string &text) {
  std::istringstream is(text);
  return ReadGraphText(is);
}

}  // namespace cllab
