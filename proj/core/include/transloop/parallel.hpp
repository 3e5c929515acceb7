#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace transloop {

// Run fn(i) for i in [0, n). Tasks must write only to their own slot so the
// result is identical for any worker count.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  std::atomic_flag error_claimed = ATOMIC_FLAG_INIT;
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&]() {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          if (!error_claimed.test_and_set()) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          break;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace transloop
