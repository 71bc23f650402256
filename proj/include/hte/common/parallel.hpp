#pragma once

// Tiny task-parallel loop. Work items must write to disjoint slots; the
// result is then independent of scheduling. Exceptions from items are
// captured and the first one rethrown after all threads join.

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hte {

inline void parallel_for(std::size_t count, int n_threads, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  if (n_threads <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count || failed.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  const auto thread_count = static_cast<std::size_t>(n_threads);
  std::vector<std::thread> threads;
  threads.reserve(thread_count - 1);
  for (std::size_t t = 1; t < thread_count; ++t) threads.emplace_back(worker);
  worker();
  for (auto& thread : threads) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hte
