// net/net.cc

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

#include "net/net.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "base/io.h"

namespace cllab {

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'L', 'L', 'N', 'E', 'T', '0', '1'};
}

void Net::BuildLayout() {
  if (config_.feature_dim <= 0 || config_.num_labels <= 0 ||
      config_.context_radius < 0)
    throw InvalidInputError("bad net config");
  for (int32 h : config_.hidden_dims)
    if (h <= 0) throw InvalidInputError("hidden dim must be positive");
  layers_.clear();
  int64 offset = 0;
  int32 in_dim = config_.InputDim();
  auto add_layer = [&](int32 out_dim) {
    LayerLayout l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.weight_offset = offset;
    offset += static_cast<int64>(in_dim) * out_dim;
    l.bias_offset = offset;
    offset += out_dim;
    layers_.push_back(l);
    in_dim = out_dim;
  };
  for (int32 h : config_.hidden_dims) add_layer(h);
  add_layer(config_.num_labels);
  params_.assign(static_cast<size_t>(offset), 0.0);
}

Net::Net(const NetConfig &config) : config_(config) { BuildLayout(); }

Net::Net(const NetConfig &config, Rng *rng) : config_(config) {
  BuildLayout();
  for (const LayerLayout &l : layers_) {
    double limit = std::sqrt(6.0 / (l.in_dim + l.out_dim));
    for (int64 i = 0; i < static_cast<int64>(l.in_dim) * l.out_dim; ++i)
      params_[l.weight_offset + i] = rng->Uniform(-limit, limit);
    // biases stay zero
  }
}

double Net::Fingerprint() const {
  double sum = 0.0;
  for (size_t i = 0; i < params_.size(); ++i)
    sum += params_[i] * (1.0 + static_cast<double>(i % 64));
  return sum;
}

EmissionMatrix Net::Forward(const Matrix &features, ForwardCache *cache) const {
  if (features.NumCols() != config_.feature_dim)
    throw InvalidInputError("feature dim " +
                            std::to_string(features.NumCols()) +
                            " does not match net config");
  int32 t_max = features.NumRows();
  if (t_max < 1) throw InvalidInputError("need at least one frame");
  if (!features.AllFinite()) throw InvalidInputError("non-finite feature");

  int32 r = config_.context_radius;
  Matrix spliced(t_max, config_.InputDim());
  for (int32 t = 0; t < t_max; ++t) {
    double *out = spliced.RowData(t);
    for (int32 dt = -r; dt <= r; ++dt) {
      int32 src = std::clamp(t + dt, 0, t_max - 1);
      const double *in = features.RowData(src);
      std::copy(in, in + config_.feature_dim,
                out + (dt + r) * config_.feature_dim);
    }
  }

  std::vector<Matrix> hidden;
  const Matrix *input = &spliced;
  size_t num_hidden = config_.hidden_dims.size();
  Matrix output;
  for (size_t li = 0; li < layers_.size(); ++li) {
    const LayerLayout &l = layers_[li];
    bool is_output = (li == num_hidden);
    Matrix act(t_max, l.out_dim);
    const double *weights = params_.data() + l.weight_offset;
    const double *bias = params_.data() + l.bias_offset;
    for (int32 t = 0; t < t_max; ++t) {
      const double *in = input->RowData(t);
      double *out = act.RowData(t);
      for (int32 o = 0; o < l.out_dim; ++o) {
        const double *w = weights + static_cast<int64>(o) * l.in_dim;
        double z = bias[o];
        for (int32 i = 0; i < l.in_dim; ++i) z += w[i] * in[i];
        out[o] = is_output ? z : std::tanh(z);
      }
    }
    if (is_output) {
      output = std::move(act);
    } else {
      hidden.push_back(std::move(act));
      input = &hidden.back();
    }
  }

  if (cache != nullptr) {
    cache->spliced = std::move(spliced);
    cache->hidden = std::move(hidden);
    cache->params_fingerprint = Fingerprint();
  }
  return output;
}

std::vector<double> Net::Backward(const ForwardCache &cache,
                                  const Matrix &grad_wrt_emissions) const {
  if (cache.spliced.NumCols() != config_.InputDim() ||
      cache.hidden.size() != config_.hidden_dims.size() ||
      cache.params_fingerprint != Fingerprint())
    throw InvalidInputError("stale or mismatched forward cache");
  int32 t_max = cache.spliced.NumRows();
  if (grad_wrt_emissions.NumRows() != t_max ||
      grad_wrt_emissions.NumCols() != config_.num_labels)
    throw InvalidInputError("emission gradient shape mismatch");

  std::vector<double> grad(params_.size(), 0.0);
  // d(objective)/d(pre-activation) rows for the layer being processed.
  Matrix delta = grad_wrt_emissions;
  for (size_t li = layers_.size(); li-- > 0;) {
    const LayerLayout &l = layers_[li];
    const Matrix &input = (li == 0) ? cache.spliced : cache.hidden[li - 1];
    double *wgrad = grad.data() + l.weight_offset;
    double *bgrad = grad.data() + l.bias_offset;
    for (int32 t = 0; t < t_max; ++t) {
      const double *d = delta.RowData(t);
      const double *in = input.RowData(t);
      for (int32 o = 0; o < l.out_dim; ++o) {
        double dv = d[o];
        if (dv == 0.0) continue;
        bgrad[o] += dv;
        double *wrow = wgrad + static_cast<int64>(o) * l.in_dim;
        for (int32 i = 0; i < l.in_dim; ++i) wrow[i] += dv * in[i];
      }
    }
    if (li == 0) break;
    // Propagate through the weights, then through the previous tanh.
    const double *weights = params_.data() + l.weight_offset;
    const Matrix &prev_act = cache.hidden[li - 1];
    Matrix prev_delta(t_max, l.in_dim, 0.0);
    for (int32 t = 0; t < t_max; ++t) {
      const double *d = delta.RowData(t);
      double *pd = prev_delta.RowData(t);
      for (int32 o = 0; o < l.out_dim; ++o) {
        double dv = d[o];
        if (dv == 0.0) continue;
        const double *wrow = weights + static_cast<int64>(o) * l.in_dim;
        for (int32 i = 0; i < l.in_dim; ++i) pd[i] += dv * wrow[i];
      }
      const double *act = prev_act.RowData(t);
      for (int32 i = 0; i < l.in_dim; ++i)
        pd[i] *= 1.0 - act[i] * act[i];
    }
    delta = std::move(prev_delta);
  }
  return grad;
}

void Net::Save(std::ostream &os) const {
  WriteMagic(os, kCheckpointMagic);
  WriteI32(os, config_.feature_dim);
  WriteI32(os, config_.context_radius);
  WriteI32(os, static_cast<int32>(config_.hidden_dims.size()));
  for (int32 h : config_.hidden_dims) WriteI32(os, h);
  WriteI32(os, config_.num_labels);
  WriteI64(os, NumParams());
  WriteF64Array(os, params_.data(), NumParams());
}

Net Net::Load(std::istream &is) {
  ExpectMagic(is, kCheckpointMagic);
  NetConfig config;
  config.feature_dim = ReadI32(is);
  config.context_radius = ReadI32(is);
  int32 num_hidden = ReadI32(is);
  if (num_hidden < 0 || num_hidden > 64) throw IoError("corrupt checkpoint");
  config.hidden_dims.resize(num_hidden);
  for (int32 i = 0; i < num_hidden; ++i) config.hidden_dims[i] = ReadI32(is);
  config.num_labels = ReadI32(is);
  Net net(config);
  int64 count = ReadI64(is);
  if (count != net.NumParams())
    throw IoError("checkpoint parameter count mismatch");
  ReadF64Array(is, net.params_.data(), count);
  return net;
}

void Net::SaveFile(const std::string &path) const {
  std::ofstream os;
  OpenOrThrow(os, path);
  Save(os);
}

Net Net::LoadFile(const std::string &path) {
  std::ifstream is;
  OpenOrThrow(is, path);
  return Load(is);
}

void SgdStep(std::vector<double> *params, const std::vector<double> &grad,
             double learning_rate, double momentum,
             std::vector<double> *velocity) {
  if (grad.size() != params->size() || velocity->size() != params->size())
    throw InvalidInputError("SgdStep: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g))
      throw NumericalError("non-finite gradient in SgdStep");
  for (size_t j = 0; j < params->size(); ++j) {
    (*velocity)[j] = momentum * (*velocity)[j] + grad[j];
    (*params)[j] += learning_rate * (*velocity)[j];
  }
}

}  // namespace cllab
