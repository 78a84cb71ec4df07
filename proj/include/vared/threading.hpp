// Copyright 2026 The VARED Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef VARED_THREADING_HPP_
#define VARED_THREADING_HPP_

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace vared {

// Worker count: VARED_THREADS if set and positive, else hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("VARED_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Splits [0, n) into contiguous chunks, one per worker. Runs inline when a
// single worker suffices. fn must not touch any autograd tape.
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  const int workers = std::min<int64_t>(thread_count(), n);
  if (workers <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int64_t lo = w * chunk;
    const int64_t hi = std::min<int64_t>(lo + chunk, n);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

}  // namespace vared

#endif  // VARED_THREADING_HPP_
