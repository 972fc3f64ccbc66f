#pragma once

#include <algorithm>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mslt {

// Rows per reduction chunk. Fixed so that partial sums (and therefore results)
// do not depend on how many threads run.
inline constexpr int kRowChunk = 8;

inline void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

inline int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs f(row) for row in [0, rows). Each call must only write state owned by its row.
template <typename F>
void parallel_rows(int rows, F&& f) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows > 16)
#endif
  for (int r = 0; r < rows; ++r) f(r);
}

inline int chunk_count(int rows) { return (rows + kRowChunk - 1) / kRowChunk; }

}  // namespace mslt
