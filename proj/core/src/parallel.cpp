#include "salengine/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#ifdef SALENGINE_HAVE_OPENMP
#include <omp.h>
#endif

namespace salengine {

void set_num_threads(int n) {
#ifdef SALENGINE_HAVE_OPENMP
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  omp_set_num_threads(n);
  // Batch prediction runs windows in parallel; kernels inside then run serially.
  omp_set_max_active_levels(1);
#else
  (void)n;
#endif
}

int num_threads() {
#ifdef SALENGINE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int threads_from_env(int fallback) {
  if (const char* s = std::getenv("SALENGINE_THREADS")) {
    try {
      int n = std::stoi(s);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return fallback;
}

}  // namespace salengine
