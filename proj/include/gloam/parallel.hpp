// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace gloam {

// Caps the number of worker threads used by parallel_for; n <= 0 restores
// the hardware default.
void set_thread_count(int n);
int thread_count();

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx);
}

// Runs f(i) for i in [0, n). f must only write state owned by index i;
// iteration order is unspecified.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  auto trampoline = [](std::size_t i, void* ctx) { (*static_cast<F*>(ctx))(i); };
  detail::parallel_for_impl(n, trampoline, &f);
}

// Sums get(i) for i in [0, n) with a fixed-shape pairwise tree, so the
// result is bit-identical regardless of thread count or evaluation order.
template <typename T, typename Get>
T tree_reduce(std::size_t lo, std::size_t hi, Get&& get, const T& zero) {
  constexpr std::size_t kLeaf = 8;
  if (hi - lo <= kLeaf) {
    T acc = zero;
    for (std::size_t i = lo; i < hi; ++i) acc += get(i);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  T left = tree_reduce(lo, mid, get, zero);
  T right = tree_reduce(mid, hi, get, zero);
  left += right;
  return left;
}

template <typename T, typename Get>
T tree_reduce(std::size_t n, Get&& get, const T& zero) {
  return tree_reduce<T>(0, n, get, zero);
}

}  // namespace gloam
