#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace odfnet {

// Worker count from ODF_WORKERS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
inline int default_worker_count() {
  if (const char* env = std::getenv("ODF_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0 && v < 1024) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(begin, end) over contiguous disjoint ranges covering [0, count).
// Each index is handled by exactly one worker and the partition is a pure
// function of count, so outputs written per index are bit-identical for any
// worker count.
inline void parallel_for(int count, int workers,
                         const std::function<void(int, int)>& fn) {
  if (count <= 0) return;
  if (workers < 1) workers = 1;
  if (workers > count) workers = count;
  if (workers == 1) {
    fn(0, count);
    return;
  }

  const int chunk = count / workers;
  const int extra = count % workers;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&](int begin, int end) {
    try {
      fn(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(workers) - 1);
  int begin = 0;
  for (int w = 0; w < workers; ++w) {
    const int end = begin + chunk + (w < extra ? 1 : 0);
    if (w == workers - 1)
      run(begin, end);
    else
      threads.emplace_back(run, begin, end);
    begin = end;
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace odfnet
