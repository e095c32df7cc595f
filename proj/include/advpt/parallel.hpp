#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace advpt {

// Worker count for image-parallel loops: ADVPT_WORKERS env var when set,
// otherwise hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("ADVPT_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Static range partition over [0, n). Each index must write only its own
// output slot; results are then identical to the sequential run regardless
// of scheduling. If several indices throw, the lowest-index exception is
// rethrown.
inline void parallel_for(int n, const std::function<void(int)>& fn,
                         int workers = 0) {
  if (workers <= 0) workers = default_workers();
  if (workers > n) workers = n;
  if (n <= 0) return;
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }

  std::mutex mu;
  int first_error_index = -1;
  std::exception_ptr first_error;

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    int begin = static_cast<int>(static_cast<long long>(n) * w / workers);
    int end = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    threads.emplace_back([&, begin, end] {
      for (int i = begin; i < end; ++i) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (first_error_index < 0 || i < first_error_index) {
            first_error_index = i;
            first_error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace advpt
