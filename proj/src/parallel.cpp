// SPDX-License-Identifier: Apache-2.0
#include "gloam/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gloam {

#ifdef _OPENMP

void set_thread_count(int n) {
  if (n <= 0) n = omp_get_num_procs();
  omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx) {
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(static_cast<std::size_t>(i), ctx);
  }
}
}  // namespace detail

#else

void set_thread_count(int) {}
int thread_count() { return 1; }

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx) {
  for (std::size_t i = 0; i < n; ++i) body(i, ctx);
}
}  // namespace detail

#endif

}  // namespace gloam
