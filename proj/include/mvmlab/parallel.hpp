#pragma once

// Deterministic fork-join helper.  Work items are independent (counter-based
// RNG keys results to the item index, not to the executing thread), so any
// thread count produces identical output.

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mvmlab {

namespace detail {
inline std::size_t& thread_count_ref() {
  static std::size_t n = 0;  // 0 = use hardware concurrency
  return n;
}
}  // namespace detail

inline void set_thread_count(std::size_t n) { detail::thread_count_ref() = n; }

inline std::size_t thread_count() {
  std::size_t n = detail::thread_count_ref();
  if (n == 0) {
    n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
  }
  return n;
}

/// Runs body(i) for i in [0, n); work is claimed dynamically but items write
/// only to their own slots, so results do not depend on scheduling.
inline void parallel_for(std::size_t n,
                         const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mvmlab
