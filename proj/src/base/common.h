// base/common.h

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

#ifndef CLLAB_BASE_COMMON_H_
#define CLLAB_BASE_COMMON_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace cllab {

using int32 = std::int32_t;
using int64 = std::int64_t;
using uint64 = std::uint64_t;

// log(0); excluded from log-sum-exp reductions.
constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// Contract violations on inputs (bad shapes, unnormalized rows, ...).
class InvalidInputError : public std::runtime_error {
 public:
  explicit InvalidInputError(const std::string &msg)
      : std::runtime_error("invalid input: " + msg) {}
};

// A graph admits no complete path of the requested length.  `frame` is the
// first frame index at which the forward state set became empty; frame == T
// means all length-T prefixes survived but none reached a final state.
class NoPathError : public std::runtime_error {
 public:
  NoPathError(int32 frame, const std::string &role)
      : std::runtime_error("no complete path through " +
                           (role.empty() ? std::string("graph") : role) +
                           " (forward set empty at frame " +
                           std::to_string(frame) + ")"),
        frame_(frame),
        role_(role) {}
  int32 Frame() const { return frame_; }
  const std::string &Role() const { return role_; }

 private:
  int32 frame_;
  std::string role_;
};

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string &msg)
      : std::runtime_error("numerical error: " + msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string &msg)
      : std::runtime_error("io error: " + msg) {}
};

// Gap recovery is undefined when the FT and Comb reference errors coincide.
class DegenerateGapError : public std::runtime_error {
 public:
  explicit DegenerateGapError(const std::string &msg)
      : std::runtime_error("degenerate gap: " + msg) {}
};

// log(exp(a) + exp(b)) with kLogZero handled exactly.
inline double LogAdd(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  double hi = a, lo = b;
  if (hi < lo) std::swap(hi, lo);
  return hi + std::log1p(std::exp(lo - hi));
}

void LogInfo(const std::string &msg);
void LogWarn(const std::string &msg);

// Shortest exact decimal form ("%.17g"); parsing it back recovers the
// identical double.
std::string FullPrecision(double value);

}  // namespace cllab

#endif  // CLLAB_BASE_COMMON_H_
