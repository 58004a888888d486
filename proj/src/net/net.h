// net/net.h

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

#ifndef CLLAB_NET_NET_H_
#define CLLAB_NET_NET_H_

#include <string>
#include <vector>

#include "base/matrix.h"
#include "base/rng.h"

namespace cllab {

struct NetConfig {
  int32 feature_dim = 6;
  int32 context_radius = 1;            // frames spliced on each side
  std::vector<int32> hidden_dims = {32, 32};
  int32 num_labels = 8;

  int32 InputDim() const { return feature_dim * (2 * context_radius + 1); }
  friend bool operator==(const NetConfig &a, const NetConfig &b) = default;
};

// Activations kept by Forward for the matching Backward call.
struct ForwardCache {
  Matrix spliced;                    // T x InputDim
  std::vector<Matrix> hidden;        // post-tanh activations per hidden layer
  double params_fingerprint = 0.0;   // detects a stale cache after updates
};

// Frame-splicing feedforward net: affine+tanh hidden layers, linear output.
// Outputs are unnormalized log-scores (no softmax); they enter the graph
// objectives directly as log pseudo-likelihoods.  Parameters live in one
// flat vector with a fixed layout ([W b] per layer, matrices row-major), so
// snapshots, Fisher diagonals and checkpoints are plain vectors.
class Net {
 public:
  // Xavier-uniform weights, zero biases, drawn from `rng`.
  Net(const NetConfig &config, Rng *rng);
  // All-zero parameters.
  explicit Net(const NetConfig &config);

  const NetConfig &Config() const { return config_; }
  int64 NumParams() const { return static_cast<int64>(params_.size()); }
  const std::vector<double> &Params() const { return params_; }
  std::vector<double> *MutableParams() { return &params_; }

  // Splices each frame with its clamped context and runs the layers.
  // features is T x feature_dim; the result is T x num_labels.
  EmissionMatrix Forward(const Matrix &features,
                         ForwardCache *cache = nullptr) const;

  // Gradient of sum_{t,p} grad_wrt_emissions[t][p] * emissions[t][p] with
  // respect to the flat parameter vector.  `cache` must come from a Forward
  // call on the current parameters, else InvalidInputError.
  std::vector<double> Backward(const ForwardCache &cache,
                               const Matrix &grad_wrt_emissions) const;

  void Save(std::ostream &os) const;
  static Net Load(std::istream &is);
  void SaveFile(const std::string &path) const;
  static Net LoadFile(const std::string &path);

  friend bool operator==(const Net &a, const Net &b) = default;

 private:
  struct LayerLayout {
    int32 in_dim, out_dim;
    int64 weight_offset, bias_offset;
    friend bool operator==(const LayerLayout &a,
                           const LayerLayout &b) = default;
  };
  void BuildLayout();
  double Fingerprint() const;

  NetConfig config_;
  std::vector<LayerLayout> layers_;  // hidden layers then the output layer
  std::vector<double> params_;
};

// One ascent step on the maximized objective:
//   velocity' = momentum * velocity + grad
//   params'   = params + learning_rate * velocity'
// Throws NumericalError if grad has a non-finite entry.
void SgdStep(std::vector<double> *params, const std::vector<double> &grad,
             double learning_rate, double momentum,
             std::vector<double> *velocity);

}  // namespace cllab

#endif  // CLLAB_NET_NET_H_
