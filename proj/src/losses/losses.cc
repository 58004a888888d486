// losses/losses.cc

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

#include "losses/losses.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "base/io.h"
#include "fb/forward-backward.h"

namespace cllab {

namespace {

constexpr char kRefCacheMagic[8] = {'C', 'L', 'L', 'R', 'E', 'F', '0', '1'};

FbResult RunFb(const Graph &graph, const EmissionMatrix &emissions,
               const std::string &role) {
  try {
    return LogprobAndOccupancies(graph, emissions);
  } catch (const NoPathError &e) {
    throw NoPathError(e.Frame(), role);
  }
}

}  // namespace

LossResult LfMmi(const Graph &num_graph, const Graph &den_graph,
                 const EmissionMatrix &emissions) {
  FbResult num = RunFb(num_graph, emissions, "numerator graph");
  FbResult den = RunFb(den_graph, emissions, "denominator graph");
  LossResult result;
  result.objective = num.total_logprob - den.total_logprob;
  result.grad_wrt_emissions = std::move(num.gamma);
  double *g = result.grad_wrt_emissions.Data().data();
  const double *d = den.gamma.Data().data();
  for (size_t i = 0; i < result.grad_wrt_emissions.Data().size(); ++i)
    g[i] -= d[i];
  return result;
}

LossResult Lwf(const EmissionMatrix &emissions, const Matrix &y_src,
               double alpha) {
  if (!emissions.SameDim(y_src))
    throw InvalidInputError("lwf: emissions and reference posteriors differ "
                            "in shape");
  int32 t_max = emissions.NumRows(), p_max = emissions.NumCols();
  LossResult result;
  result.grad_wrt_emissions = Matrix(t_max, p_max);
  for (int32 t = 0; t < t_max; ++t) {
    const double *ref = y_src.RowData(t);
    double ref_sum = 0.0;
    for (int32 p = 0; p < p_max; ++p) ref_sum += ref[p];
    if (std::abs(ref_sum - 1.0) > 1e-6)
      throw InvalidInputError("lwf: reference posterior row " +
                              std::to_string(t) + " sums to " +
                              FullPrecision(ref_sum));
    const double *e = emissions.RowData(t);
    double m = e[0];
    for (int32 p = 1; p < p_max; ++p) m = std::max(m, e[p]);
    double z = 0.0;
    for (int32 p = 0; p < p_max; ++p) z += std::exp(e[p] - m);
    double log_z = m + std::log(z);
    double *g = result.grad_wrt_emissions.RowData(t);
    for (int32 p = 0; p < p_max; ++p) {
      double log_y = e[p] - log_z;
      result.objective += ref[p] * log_y;
      g[p] = alpha * (ref[p] - std::exp(log_y));
    }
  }
  result.objective *= alpha;
  return result;
}

LossResult DenLwf(const Graph &den_graph, const EmissionMatrix &emissions,
                  const OccupancyMatrix &gamma_src, double alpha,
                  bool include_offset) {
  if (!emissions.SameDim(gamma_src))
    throw InvalidInputError("denlwf: emissions and reference occupancies "
                            "differ in shape");
  LossResult result;
  const double *ref = gamma_src.Data().data();
  const double *e = emissions.Data().data();
  size_t n = emissions.Data().size();
  for (size_t i = 0; i < n; ++i) result.objective += ref[i] * e[i];
  if (include_offset) {
    FbResult den = RunFb(den_graph, emissions, "denominator graph");
    result.objective -= den.total_logprob;
    result.grad_wrt_emissions = std::move(den.gamma);
    double *g = result.grad_wrt_emissions.Data().data();
    for (size_t i = 0; i < n; ++i) g[i] = alpha * (ref[i] - g[i]);
  } else {
    result.grad_wrt_emissions = gamma_src;
    for (double &g : result.grad_wrt_emissions.Data()) g *= alpha;
  }
  result.objective *= alpha;
  return result;
}

void WriteSnapshot(std::ostream &os, const ClSnapshot &snapshot) {
  WriteI32(os, snapshot.step);
  WriteI64(os, static_cast<int64>(snapshot.params.size()));
  WriteF64Array(os, snapshot.params.data(),
                static_cast<int64>(snapshot.params.size()));
  WriteI64(os, static_cast<int64>(snapshot.fisher.size()));
  WriteF64Array(os, snapshot.fisher.data(),
                static_cast<int64>(snapshot.fisher.size()));
}

ClSnapshot ReadSnapshot(std::istream &is) {
  ClSnapshot snapshot;
  snapshot.step = ReadI32(is);
  snapshot.params.resize(ReadI64(is));
  ReadF64Array(is, snapshot.params.data(),
               static_cast<int64>(snapshot.params.size()));
  snapshot.fisher.resize(ReadI64(is));
  ReadF64Array(is, snapshot.fisher.data(),
               static_cast<int64>(snapshot.fisher.size()));
  return snapshot;
}

double EwcPenalty(const std::vector<double> &params,
                  const std::vector<ClSnapshot> &snapshots, double alpha,
                  std::vector<double> *grad_wrt_params) {
  size_t n = params.size();
  grad_wrt_params->assign(n, 0.0);
  double objective = 0.0;
  for (const ClSnapshot &snap : snapshots) {
    if (snap.params.size() != n || snap.fisher.size() != n)
      throw InvalidInputError("ewc: snapshot for step " +
                              std::to_string(snap.step) +
                              " does not match the parameter count");
    for (size_t j = 0; j < n; ++j) {
      double diff = params[j] - snap.params[j];
      objective += snap.fisher[j] * diff * diff;
      (*grad_wrt_params)[j] += snap.fisher[j] * diff;
    }
  }
  objective *= -alpha;
  for (double &g : *grad_wrt_params) g *= -2.0 * alpha;
  return objective;
}

std::vector<double> EstimateFisher(const Net &net,
                                   const std::vector<const Utterance *> &utts,
                                   const Graph &den_graph,
                                   bool allow_self_loops) {
  if (utts.empty())
    throw InvalidInputError("estimate_fisher: no utterances");
  std::vector<double> fisher(net.NumParams(), 0.0);
  int32 used = 0;
  for (const Utterance *utt : utts) {
    try {
      ForwardCache cache;
      EmissionMatrix emissions = net.Forward(utt->features, &cache);
      Graph num = BuildNumeratorGraph(utt->labels, net.Config().num_labels,
                                      allow_self_loops);
      LossResult mmi = LfMmi(num, den_graph, emissions);
      std::vector<double> grad = net.Backward(cache, mmi.grad_wrt_emissions);
      for (size_t j = 0; j < fisher.size(); ++j)
        fisher[j] += grad[j] * grad[j];
      ++used;
    } catch (const NoPathError &e) {
      LogWarn("estimate_fisher: skipping " + utt->id + ": " + e.what());
    }
  }
  if (used == 0)
    throw InvalidInputError(
        "estimate_fisher: every utterance failed forward-backward");
  for (double &f : fisher) f /= used;

  std::vector<double> sorted(fisher);
  size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  double median = sorted[mid];
  if (median < 1e-12) {
    LogWarn("estimate_fisher: median " + FullPrecision(median) +
            " below 1e-12; normalization skipped");
  } else {
    for (double &f : fisher) f /= median;
  }
  return fisher;
}

void SoftmaxRows(const Matrix &in, Matrix *out) {
  if (!in.SameDim(*out)) *out = Matrix(in.NumRows(), in.NumCols());
  for (int32 t = 0; t < in.NumRows(); ++t) {
    const double *x = in.RowData(t);
    double *y = out->RowData(t);
    double m = x[0];
    for (int32 p = 1; p < in.NumCols(); ++p) m = std::max(m, x[p]);
    double z = 0.0;
    for (int32 p = 0; p < in.NumCols(); ++p) {
      y[p] = std::exp(x[p] - m);
      z += y[p];
    }
    for (int32 p = 0; p < in.NumCols(); ++p) y[p] /= z;
  }
}

ReferenceCache ComputeReferencePosteriors(
    const Net &net, const std::vector<const Utterance *> &utts) {
  ReferenceCache cache;
  for (const Utterance *utt : utts) {
    EmissionMatrix emissions = net.Forward(utt->features);
    Matrix posteriors(emissions.NumRows(), emissions.NumCols());
    SoftmaxRows(emissions, &posteriors);
    cache.emplace(utt->id, std::move(posteriors));
  }
  return cache;
}

ReferenceCache ComputeReferenceDenOccupancies(
    const Net &net, const Graph &den_graph,
    const std::vector<const Utterance *> &utts) {
  ReferenceCache cache;
  for (const Utterance *utt : utts) {
    EmissionMatrix emissions = net.Forward(utt->features);
    try {
      FbResult fb = LogprobAndOccupancies(den_graph, emissions);
      cache.emplace(utt->id, std::move(fb.gamma));
    } catch (const NoPathError &e) {
      LogWarn("reference occupancies: skipping " + utt->id + ": " + e.what());
    }
  }
  return cache;
}

void WriteReferenceCache(std::ostream &os, const ReferenceCache &cache) {
  WriteMagic(os, kRefCacheMagic);
  WriteI64(os, static_cast<int64>(cache.size()));
  for (const auto &[id, matrix] : cache) {
    WriteString(os, id);
    WriteI32(os, matrix.NumRows());
    WriteI32(os, matrix.NumCols());
    WriteF64Array(os, matrix.Data().data(),
                  static_cast<int64>(matrix.Data().size()));
  }
}

ReferenceCache ReadReferenceCache(std::istream &is) {
  ExpectMagic(is, kRefCacheMagic);
  int64 count = ReadI64(is);
  ReferenceCache cache;
  for (int64 i = 0; i < count; ++i) {
    std::string id = ReadString(is);
    int32 rows = ReadI32(is);
    int32 cols = ReadI32(is);
    Matrix matrix(rows, cols);
    ReadF64Array(is, matrix.Data().data(),
                 static_cast<int64>(matrix.Data().size()));
    cache.emplace(std::move(id), std::move(matrix));
  }
  return cache;
}

void SaveReferenceCache(const ReferenceCache &cache, const std::string &path) {
  std::ofstream os;
  OpenOrThrow(os, path);
  WriteReferenceCache(os, cache);
  if (!os) throw IoError("failed writing " + path);
}

ReferenceCache LoadReferenceCache(const std::string &path) {
  std::ifstream is;
  OpenOrThrow(is, path);
  return ReadReferenceCache(is);
}

}  // namespace cllab
