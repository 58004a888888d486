// fb/forward-backward.h

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

#ifndef CLLAB_FB_FORWARD_BACKWARD_H_
#define CLLAB_FB_FORWARD_BACKWARD_H_

#include <vector>

#include "base/matrix.h"
#include "graph/graph.h"

namespace cllab {

struct FbResult {
  double total_logprob = kLogZero;
  OccupancyMatrix gamma;  // T x P; rows sum to 1
};

// Log-domain forward-backward over all complete length-T paths.  The total
// is log sum_paths exp(sum_t arc_weight_t + emissions[t][label_t]) including
// the final weight; gamma[t][p] is the posterior that frame t emits label p.
// gamma is also d(total)/d(emissions[t][p]), which is what makes the training
// gradients below exact.  Throws NoPathError (frame of first empty forward
// set) or InvalidInputError on a label-count mismatch.
FbResult LogprobAndOccupancies(const Graph &graph,
                               const EmissionMatrix &emissions);

// Total only; used where occupancies are not needed.
double Logprob(const Graph &graph, const EmissionMatrix &emissions);

struct ViterbiResult {
  double best_logprob = kLogZero;
  std::vector<int32> labels;  // length T
};

// Max-scoring complete path.  Per-step ties are broken toward the lowest
// (src_state, label, dst_state) arc; final-state ties toward the lowest
// state index.
ViterbiResult Viterbi(const Graph &graph, const EmissionMatrix &emissions);

}  // namespace cllab

#endif  // CLLAB_FB_FORWARD_BACKWARD_H_
