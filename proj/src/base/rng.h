// base/rng.h

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

#ifndef CLLAB_BASE_RNG_H_
#define CLLAB_BASE_RNG_H_

#include <random>
#include <vector>

#include "base/common.h"

namespace cllab {

// mt19937_64 with hand-rolled mappings so that streams are bit-reproducible
// regardless of the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64 seed) : gen_(seed) {}

  uint64 RawU64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double Uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal via Box-Muller; two raw draws per sample.
  double Gauss() {
    double u1 = 1.0 - Uniform();  // (0, 1]
    double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [lo, hi] inclusive, rejection-sampled so every value
  // is equally likely.
  int32 RandInt(int32 lo, int32 hi);

  // Index into an unnormalized discrete distribution.
  int32 Categorical(const std::vector<double> &weights);

  template <typename T>
  void Shuffle(std::vector<T> *v) {
    for (size_t i = v->size(); i > 1; --i) {
      size_t j = static_cast<size_t>(RandInt(0, static_cast<int32>(i) - 1));
      std::swap((*v)[i - 1], (*v)[j]);
    }
  }

  // Stateless seed derivation (splitmix64 mixing) so substreams for
  // (domain, step, epoch, ...) never have to thread RNG state around.
  static uint64 DeriveSeed(uint64 base, uint64 a, uint64 b = 0, uint64 c = 0);

 private:
  std::mt19937_64 gen_;
};

}  // namespace cllab

#endif  // CLLAB_BASE_RNG_H_
