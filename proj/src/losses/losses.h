// losses/losses.h

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

#ifndef CLLAB_LOSSES_LOSSES_H_
#define CLLAB_LOSSES_LOSSES_H_

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "base/matrix.h"
#include "graph/graph.h"
#include "net/net.h"
#include "synth/synth.h"

namespace cllab {

// Objective value plus its gradient with respect to the emission matrix.
// All objectives here are maximized; gradients point uphill.
struct LossResult {
  double objective = 0.0;
  Matrix grad_wrt_emissions;  // T x P
};

// objective = logprob(num_graph) - logprob(den_graph);
// grad = gamma_num - gamma_den, so rows sum to 0.  NoPathError from either
// graph is rethrown with the graph named in the role.
LossResult LfMmi(const Graph &num_graph, const Graph &den_graph,
                 const EmissionMatrix &emissions);

// Frame-level knowledge retention: with y = rowwise softmax(emissions),
//   objective = alpha * sum_{t,p} y_src[t][p] * log y[t][p]
//   grad      = alpha * (y_src - y)
// Throws InvalidInputError if a y_src row is not normalized within 1e-6.
LossResult Lwf(const EmissionMatrix &emissions, const Matrix &y_src,
               double alpha);

// Sequence-level knowledge retention against the denominator graph.  With
// include_offset (the default):
//   objective = alpha * (sum_{t,p} gamma_src[t][p] * emissions[t][p]
//               - logprob(den_graph))
//   grad      = alpha * (gamma_src - gamma_den)
// so the gradient vanishes while the live model still matches the source
// model.  include_offset=false drops the logprob term (negative control):
// grad = alpha * gamma_src, rows summing to alpha instead of 0, which only
// boosts the denominator posteriors and does not prevent forgetting.
LossResult DenLwf(const Graph &den_graph, const EmissionMatrix &emissions,
                  const OccupancyMatrix &gamma_src, double alpha,
                  bool include_offset = true);

// Frozen view of the model after finishing step `step`: the parameters and
// the median-normalized Fisher diagonal estimated on that step's data.
struct ClSnapshot {
  int32 step = 0;
  std::vector<double> params;
  std::vector<double> fisher;

  friend bool operator==(const ClSnapshot &a, const ClSnapshot &b) = default;
};

void WriteSnapshot(std::ostream &os, const ClSnapshot &snapshot);
ClSnapshot ReadSnapshot(std::istream &is);

// Quadratic anchor to every snapshot:
//   objective = -alpha * sum_d sum_j F^d_j * (theta^d_j - theta_j)^2
//   grad_j    = -2 alpha * sum_d F^d_j * (theta_j - theta^d_j)
// *grad_wrt_params is overwritten.  Always <= 0; zero iff params match every
// snapshot wherever its Fisher weight is positive.
double EwcPenalty(const std::vector<double> &params,
                  const std::vector<ClSnapshot> &snapshots, double alpha,
                  std::vector<double> *grad_wrt_params);

// Mean over utterances of the squared per-utterance parameter gradient of
// the LF-MMI objective (numerator built per utterance from its labels), then
// scaled so the median entry is 1.0.  A median below 1e-12 skips the scaling
// with a warning.  Utterances with no complete path are skipped with a
// warning; if none survive, InvalidInputError.
std::vector<double> EstimateFisher(const Net &net,
                                   const std::vector<const Utterance *> &utts,
                                   const Graph &den_graph,
                                   bool allow_self_loops);

// Per-utterance reference matrices keyed by utterance id: frame posteriors
// y^src for the frame-level objective, denominator occupancies gamma^src for
// the sequence-level one.
using ReferenceCache = std::map<std::string, Matrix>;

// Rowwise softmax of the source model's emissions for every utterance.
ReferenceCache ComputeReferencePosteriors(
    const Net &net, const std::vector<const Utterance *> &utts);

// Denominator occupancies of the source model's emissions.  Utterances with
// no complete path are logged and left out of the cache.
ReferenceCache ComputeReferenceDenOccupancies(
    const Net &net, const Graph &den_graph,
    const std::vector<const Utterance *> &utts);

// Binary cache format: magic "CLLREF01", entry count, then per entry the id,
// the shape and the row-major doubles.  Round-trips bit-exactly.
void WriteReferenceCache(std::ostream &os, const ReferenceCache &cache);
ReferenceCache ReadReferenceCache(std::istream &is);
void SaveReferenceCache(const ReferenceCache &cache, const std::string &path);
ReferenceCache LoadReferenceCache(const std::string &path);

// y[r] = softmax(in[r]); out may alias in.
void SoftmaxRows(const Matrix &in, Matrix *out);

}  // namespace cllab

#endif  // CLLAB_LOSSES_LOSSES_H_
