#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace slope_amp {

namespace detail {
inline std::atomic<int>& thread_cap() {
  static std::atomic<int> cap{std::max(1, static_cast<int>(std::thread::hardware_concurrency()))};
  return cap;
}
}  // namespace detail

/// Upper bound on worker threads used by Monte-Carlo loops. Results never
/// depend on this value.
inline int max_threads() { return detail::thread_cap().load(); }
inline void set_max_threads(int k) { detail::thread_cap().store(std::max(1, k)); }

/// Calls body(i) for i in [0, n). Each index is processed exactly once;
/// callers write into per-index slots and reduce afterwards in index order.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace slope_amp
