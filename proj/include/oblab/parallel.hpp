#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace oblab {

inline int worker_count() {
  if (const char* env = std::getenv("OBLAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition; results must be written into preallocated
// per-index slots so reductions stay deterministic regardless of the
// worker count.
inline void parallel_for(int n, const std::function<void(int)>& body) {
  int workers = worker_count();
  if (workers <= 1 || n < 2 * workers) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace oblab
