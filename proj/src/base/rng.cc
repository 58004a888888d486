// base/rng.cc

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

#include "base/rng.h"

namespace cllab {

int32 Rng::RandInt(int32 lo, int32 hi) {
  if (hi < lo) throw InvalidInputError("RandInt: hi < lo");
  uint64 range = static_cast<uint64>(hi) - static_cast<uint64>(lo) + 1;
  uint64 limit = UINT64_MAX - UINT64_MAX % range;
  uint64 x;
  do {
    x = gen_();
  } while (x >= limit);
  return lo + static_cast<int32>(x % range);
}

int32 Rng::Categorical(const std::vector<double> &weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w))
      throw InvalidInputError("Categorical: weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw InvalidInputError("Categorical: all weights zero");
  double u = Uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int32>(i);
  }
  // Rounding at the very top of the range; last positive weight wins.
  for (size_t i = weights.size(); i > 0; --i)
    if (weights[i - 1] > 0.0) return static_cast<int32>(i - 1);
  return 0;
}

static uint64 SplitMix64(uint64 *state) {
  uint64 z = (*state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64 Rng::DeriveSeed(uint64 base, uint64 a, uint64 b, uint64 c) {
  uint64 state = base;
  uint64 s = SplitMix64(&state);
  state ^= a + 0x9e3779b97f4a7c15ULL;
  s ^= SplitMix64(&state);
  state ^= b + 0xc2b2ae3d27d4eb4fULL;
  s ^= SplitMix64(&state);
  state ^= c + 0x165667b19e3779f9ULL;
  s ^= SplitMix64(&state);
  return s;
}

}  // namespace cllab
