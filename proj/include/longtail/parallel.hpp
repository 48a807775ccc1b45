#pragma once

// Thread-count control and the replicate loop shared by bootstrap, coverage
// and simulation code. Work item i always writes slot i, so results do not
// depend on the number of threads.

#include <cstddef>
#include <exception>
#include <mutex>
#include <vector>

namespace longtail {

/// Worker cap. Starts from LONGTAIL_THREADS when set, else the OpenMP default.
int thread_count();
/// Sets the worker cap (values < 1 restore the default).
void set_thread_count(int n);

/// Calls fn(i) for i in [0, n) on up to thread_count() threads and collects
/// the results in index order. The first exception thrown by any item is
/// rethrown after the loop.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  std::exception_ptr error;
  std::mutex error_mutex;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// Serial reference for parallel_map.
template <class T, class Fn>
std::vector<T> serial_map(std::size_t n, Fn&& fn) {
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

}  // namespace longtail
