// Copyright 2026 The Chunkspace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CHUNKSPACE_CORE_THREADING_HPP_
#define CHUNKSPACE_CORE_THREADING_HPP_

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace chunkspace {

/// Worker count: CHUNKSPACE_THREADS if set, else hardware concurrency.
inline int WorkerCount() {
  if (const char* env = std::getenv("CHUNKSPACE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n).  Each index is processed exactly once and
/// writes only its own slot, so the result is identical to the serial loop
/// regardless of worker count.
inline void ParallelFor(int64_t n, const std::function<void(int64_t)>& fn,
                        int workers = WorkerCount()) {
  if (n <= 0) return;
  workers = static_cast<int>(std::min<int64_t>(workers, n));
  if (workers <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace chunkspace

#endif  // CHUNKSPACE_CORE_THREADING_HPP_
