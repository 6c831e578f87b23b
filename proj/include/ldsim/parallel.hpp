#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ldsim {

// Replica loops and triple scans run through this switch: the OpenMP path
// writes into preallocated per-index slots, so results are identical to the
// serial reference in any schedule.
enum class Exec { serial, openmp };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class F>
void parallel_for(std::size_t count, Exec exec, F&& body) {
#ifdef _OPENMP
  if (exec == Exec::openmp) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(count); ++i)
      body(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t i = 0; i < count; ++i) body(i);
}

}  // namespace ldsim
