#pragma once

// Runs independent trajectories across threads. Every index writes only its
// own slot; callers reduce slots in index order so results do not depend on
// the thread count.

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qfilt {

/// Calls fn(i) for i in [0, count). The first exception thrown by any call is
/// rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Running mean/variance that merges in a fixed order.
struct Moments {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    count += 1.0;
    sum += x;
    sum_sq += x * x;
  }
  double mean() const { return count > 0.0 ? sum / count : 0.0; }
  /// Unbiased sample variance.
  double variance() const {
    if (count < 2.0) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq - count * m * m) / (count - 1.0));
  }
  double std_error() const { return count > 0.0 ? std::sqrt(variance() / count) : 0.0; }
};

}  // namespace qfilt
