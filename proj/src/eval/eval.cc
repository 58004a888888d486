// eval/eval.cc

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

#include "eval/eval.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "base/parallel.h"
#include "fb/forward-backward.h"

namespace cllab {

int64 Levenshtein(const std::vector<int32> &a, const std::vector<int32> &b) {
  size_t n = b.size();
  std::vector<int64> prev(n + 1), cur(n + 1);
  for (size_t j = 0; j <= n; ++j) prev[j] = static_cast<int64>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int64>(i);
    for (size_t j = 1; j <= n; ++j) {
      int64 sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

std::vector<int32> CollapseRepeats(const std::vector<int32> &labels) {
  std::vector<int32> out;
  for (int32 l : labels)
    if (out.empty() || out.back() != l) out.push_back(l);
  return out;
}

DomainScore DecodeAndScore(const Net &net, const Graph &decode_graph,
                           const std::string &domain,
                           const std::vector<const Utterance *> &test_utts,
                           int32 num_threads) {
  struct Slot {
    int64 edits = 0;
    int64 ref_len = 0;
    bool no_path = false;
  };
  std::vector<Slot> slots(test_utts.size());
  ParallelFor(static_cast<int32>(test_utts.size()), num_threads,
              [&](int32 i) {
                const Utterance *utt = test_utts[i];
                slots[i].ref_len = static_cast<int64>(utt->labels.size());
                EmissionMatrix emissions = net.Forward(utt->features);
                try {
                  ViterbiResult best = Viterbi(decode_graph, emissions);
                  std::vector<int32> hyp = CollapseRepeats(best.labels);
                  slots[i].edits = Levenshtein(hyp, utt->labels);
                } catch (const NoPathError &) {
                  slots[i].no_path = true;
                  slots[i].edits = slots[i].ref_len;
                }
              });
  DomainScore score;
  score.domain = domain;
  for (size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].no_path)
      LogWarn("decode: no path for " + test_utts[i]->id +
              "; scored as full deletion");
    score.total_edits += slots[i].edits;
    score.total_ref_labels += slots[i].ref_len;
    ++score.num_utts;
    if (slots[i].no_path) ++score.num_no_path;
  }
  return score;
}

double GapRecovery(double wer_cl, double wer_comb, double wer_ft) {
  if (wer_ft == wer_comb)
    throw DegenerateGapError("fine-tuned and combined errors coincide (" +
                             FullPrecision(wer_ft) + ")");
  return 1.0 - (wer_cl - wer_comb) / (wer_ft - wer_comb);
}

double RelativeLearning(double cwer, double cwer_src) {
  if (!(cwer_src > 0.0))
    throw InvalidInputError("relative learning needs a positive source "
                            "error, got " + FullPrecision(cwer_src));
  return 1.0 - cwer / cwer_src;
}

double RelativeForgetting(double pwer, double pwer_src) {
  if (!(pwer_src > 0.0))
    throw InvalidInputError("relative forgetting needs a positive source "
                            "error, got " + FullPrecision(pwer_src));
  return pwer / pwer_src - 1.0;
}

double EvalMatrix::RowAverage(int32 k) const {
  const std::vector<double> &row = rows[k];
  if (row.empty()) throw InvalidInputError("empty eval matrix row");
  double sum = 0.0;
  for (double v : row) sum += v;
  return sum / static_cast<double>(row.size());
}

namespace {

std::string Fixed4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string EvalMatrixCsv(const EvalMatrix &matrix) {
  std::ostringstream os;
  os << "step,target";
  for (const std::string &d : matrix.domains) os << ',' << d;
  os << ",Avg\n";
  for (size_t k = 0; k < matrix.rows.size(); ++k) {
    if (matrix.rows[k].size() != k + 1 ||
        matrix.rows[k].size() > matrix.domains.size())
      throw InvalidInputError("eval matrix is not triangular");
    os << k << ',' << matrix.domains[k];
    for (size_t d = 0; d < matrix.domains.size(); ++d) {
      os << ',';
      if (d < matrix.rows[k].size()) os << Fixed4(matrix.rows[k][d]);
    }
    os << ',' << Fixed4(matrix.RowAverage(static_cast<int32>(k))) << '\n';
  }
  return os.str();
}

std::string MetricsCsv(const std::vector<StepMetrics> &metrics) {
  std::ostringstream os;
  os << "step,method,gap_recovery,rel_learning,rel_forgetting\n";
  for (const StepMetrics &m : metrics) {
    os << m.step << ',' << m.method << ',';
    if (m.has_gap_recovery) os << Fixed4(m.gap_recovery);
    os << ',' << Fixed4(m.rel_learning) << ',' << Fixed4(m.rel_forgetting)
       << '\n';
  }
  return os.str();
}

}  // namespace cllab
