#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tk {

// Execution policy for the row-parallel kernels. Both policies produce
// bit-identical results: each output row is owned by exactly one thread and
// computed with the same arithmetic as the serial loop.
enum class Exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace tk
