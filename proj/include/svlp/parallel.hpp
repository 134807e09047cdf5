#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace svlp {

/// Worker cap: SVLP_THREADS when set to a positive integer, otherwise the
/// hardware concurrency.
inline int thread_limit() {
  if (const char* env = std::getenv("SVLP_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return static_cast<int>(std::min(n, 256L));
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [begin, end) over contiguous static chunks. Each index
/// is visited exactly once, so results that only write slot i are
/// independent of the thread count. `grain` is the minimum work per thread.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn, int grain = 16) {
  const int n = end - begin;
  if (n <= 0) return;
  const int workers = std::min(thread_limit(), std::max(1, n / std::max(1, grain)));
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + static_cast<int>(static_cast<long long>(n) * w / workers);
    const int hi = begin + static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace svlp
