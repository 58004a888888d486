// base/parallel.h

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

#ifndef CLLAB_BASE_PARALLEL_H_
#define CLLAB_BASE_PARALLEL_H_

#include <exception>
#include <thread>
#include <vector>

#include "base/common.h"

namespace cllab {

// Runs fn(i) for i in [0, n).  Each index writes only into its own slot, so
// callers reduce the slots afterwards in index order and results do not
// depend on the thread count.
template <typename Fn>
void ParallelFor(int32 n, int32 num_threads, Fn fn) {
  if (num_threads <= 1 || n <= 1) {
    for (int32 i = 0; i < n; ++i) fn(i);
    return;
  }
  int32 workers = std::min(num_threads, n);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int32 w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        for (int32 i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : threads) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cllab

#endif  // CLLAB_BASE_PARALLEL_H_
