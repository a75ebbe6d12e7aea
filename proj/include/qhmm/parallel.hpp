#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qhmm {

// Runs fn(0..n_jobs-1) on up to n_threads workers. Results must be written
// into caller-owned per-index slots so the aggregate is independent of
// scheduling order. First exception (by job index) is rethrown.
inline void parallel_for(int n_jobs, int n_threads,
                         const std::function<void(int)>& fn) {
  if (n_jobs <= 0) return;
  n_threads = std::max(1, std::min(n_threads, n_jobs));
  if (n_threads == 1) {
    for (int j = 0; j < n_jobs; ++j) fn(j);
    return;
  }
  std::vector<std::exception_ptr> errors(n_jobs);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int j = next.fetch_add(1);
      if (j >= n_jobs) return;
      try {
        fn(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace qhmm
