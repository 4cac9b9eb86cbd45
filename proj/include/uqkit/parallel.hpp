#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace uq {

// Runs fn(i) for i in [0, count) on up to max_in_flight worker threads.
// Callers write results into pre-sized slots indexed by i, so output order
// never depends on completion order. The first exception (if any) is
// rethrown on the calling thread after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, int max_in_flight, Fn&& fn) {
  if (count == 0) {
    return;
  }
  std::size_t workers = max_in_flight < 1 ? 1 : static_cast<std::size_t>(max_in_flight);
  if (workers > count) {
    workers = count;
  }
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) {
            first_error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& thread : threads) {
    thread.join();
  }
  if (failed.load() && first_error) {
    std::rethrow_exception(first_error);
  }
}

}  // namespace uq
