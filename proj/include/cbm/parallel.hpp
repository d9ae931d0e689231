#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace cbm {

// Worker-thread cap from CBM_THREADS (default 1). Parallel sections split
// rows into disjoint contiguous chunks, so results are bitwise identical for
// any thread count.
inline int worker_threads() {
  const char* env = std::getenv("CBM_THREADS");
  if (env == nullptr) return 1;
  const int v = std::atoi(env);
  if (v < 1) return 1;
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  return hw > 0 && v > hw ? hw : v;
}

template <typename Fn>
void parallel_rows(long n, Fn&& fn) {
  const int threads = worker_threads();
  if (threads <= 1 || n < 2 * threads) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const long chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long lo = t * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (long i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace cbm
