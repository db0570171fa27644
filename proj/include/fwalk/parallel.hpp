#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fwalk {

/// Number of worker threads used by parallel_for; 0 means hardware concurrency.
inline std::size_t& thread_setting() {
  static std::size_t n = 1;
  return n;
}

inline void set_threads(std::size_t n) { thread_setting() = n; }

inline std::size_t worker_count() {
  std::size_t n = thread_setting();
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}

/// Calls f(i) for i in [0, n), spreading indices over worker threads. Nested
/// calls run serially. The first exception thrown by any call is rethrown on
/// the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = inside_parallel_region() ? 1 : std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    const bool was_inside = inside_parallel_region();
    inside_parallel_region() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
    inside_parallel_region() = was_inside;
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fwalk
