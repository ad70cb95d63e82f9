#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lndsm {

/// Runs fn(begin, end) over contiguous row blocks. threads <= 1 runs inline.
template <typename Fn>
void parallel_rows(Eigen::Index n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    fn(Eigen::Index{0}, n);
    return;
  }
  const Eigen::Index workers = std::min<Eigen::Index>(threads, n);
  const Eigen::Index chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (Eigen::Index w = 0; w < workers; ++w) {
    const Eigen::Index lo = w * chunk;
    const Eigen::Index hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lndsm
