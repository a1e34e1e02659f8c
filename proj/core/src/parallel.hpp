#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace launderscope::detail {

/// Runs `body(worker, index)` for every index in [0, n) on `workers` threads.
/// `setup(worker)` runs once per thread before its first item. If any call
/// throws, remaining work is abandoned and the exception of the lowest
/// failing index is rethrown, so failures are schedule-independent.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(int)>& setup,
                         const std::function<void(int, std::size_t)>& body) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed_index{n};
  std::mutex mutex;
  std::exception_ptr error;

  // Indices are handed out in increasing order, so every index below the
  // first failure has already been claimed and still runs to completion.
  auto record = [&](std::size_t index, std::exception_ptr e) {
    std::lock_guard lock(mutex);
    if (index < failed_index.load()) {
      failed_index = index;
      error = e;
    }
  };

  auto run = [&](int worker) {
    try {
      setup(worker);
    } catch (...) {
      record(0, std::current_exception());
      return;
    }
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || i > failed_index.load()) return;
      try {
        body(worker, i);
      } catch (...) {
        record(i, std::current_exception());
        return;
      }
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace launderscope::detail
