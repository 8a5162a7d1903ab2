#include "otsep/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace otsep {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) {
  g_max_threads = n < 0 ? 0 : n;
#ifdef _OPENMP
  if (g_max_threads > 0) omp_set_num_threads(g_max_threads);
#endif
}

int max_threads() {
#ifdef _OPENMP
  return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

}  // namespace otsep
