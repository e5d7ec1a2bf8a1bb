#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace stormvi {

// Thread count for data-parallel loops: STORMVI_THREADS if set, else 1.
// Single-threaded execution is the reproducibility baseline; multi-threaded
// runs stay deterministic for a fixed thread count because work is split
// into fixed chunks and reduced in chunk order.
inline int default_thread_count() {
  if (const char* env = std::getenv("STORMVI_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Runs fn(begin, end) over [0, n) split into `threads` contiguous chunks.
template <class F>
void parallel_for(int n, int threads, F&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace stormvi
