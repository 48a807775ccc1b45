#include "longtail/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace longtail {

namespace {

int default_threads() {
  if (const char* env = std::getenv("LONGTAIL_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int>& cap() {
  static std::atomic<int> value{default_threads()};
  return value;
}

}  // namespace

int thread_count() { return cap().load(); }

void set_thread_count(int n) { cap().store(n >= 1 ? n : default_threads()); }

}  // namespace longtail
