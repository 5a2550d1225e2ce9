//
// Copyright 2026 The Distill Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DISTILL_AUDIT_PARALLEL_H_
#define DISTILL_AUDIT_PARALLEL_H_

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace distill_audit {

// Calls fn(i) for every i in [0, n) on up to hardware_concurrency threads.
// Results must be written to per-index slots so the outcome does not depend
// on scheduling.
template <typename Fn>
void ParallelFor(size_t n, Fn&& fn) {
  const size_t workers = std::max<size_t>(
      1, std::min<size_t>(n, std::thread::hardware_concurrency()));
  std::atomic<size_t> next{0};
  std::vector<std::jthread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_PARALLEL_H_
