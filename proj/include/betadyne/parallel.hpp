#pragma once

// Static, index-deterministic work splitting. Every job is independent and
// writes only to its own slot, so results do not depend on the thread count.

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace betadyne {

inline int default_thread_count() {
  if (const char* env = std::getenv("BETADYNE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

// Runs fn(i) for i in [0, n); contiguous static split across `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  if (threads <= 0) threads = default_thread_count();
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(std::size_t(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace betadyne
