#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cgnf {

/// Runs fn(job) for job in [0, jobs) on up to `workers` threads. Each job
/// writes only to its own output slot, so results are independent of
/// scheduling; callers aggregate in job order afterwards.
inline void parallel_for(std::size_t jobs,
                         const std::function<void(std::size_t)>& fn,
                         std::size_t workers) {
  if (jobs == 0) return;
  if (workers <= 1 || jobs == 1) {
    for (std::size_t j = 0; j < jobs; ++j) fn(j);
    return;
  }
  const std::size_t n_threads = std::min(workers, jobs);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs || failed.load()) return;
        try {
          fn(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::size_t default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace cgnf
