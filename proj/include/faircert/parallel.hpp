#pragma once

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace faircert {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must be
/// independent; callers reduce the per-index results afterwards in a fixed
/// order, so the numeric output never depends on the job count.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  size_t nthreads = std::min<size_t>(static_cast<size_t>(jobs), n);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (size_t t = 0; t < nthreads; ++t)
    pool.emplace_back([&] {
      size_t i;
      while (!failed.load(std::memory_order_relaxed) &&
             (i = next.fetch_add(1)) < n) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace faircert
