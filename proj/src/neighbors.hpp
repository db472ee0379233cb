#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace bypass::detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// The k rows of a row-major `points` matrix closest to `query`, ordered by
/// (squared distance, row index). `skip` excludes one row.
inline std::vector<std::pair<double, std::size_t>> nearest_k(std::span<const double> points,
                                                             std::size_t dim,
                                                             std::span<const double> query,
                                                             std::size_t k,
                                                             std::size_t skip = SIZE_MAX) {
  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(k + 1);
  const std::size_t n = dim == 0 ? 0 : points.size() / dim;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == skip) continue;
    const double d = squared_distance(points.subspan(i * dim, dim), query);
    if (heap.size() < k) {
      heap.emplace_back(d, i);
      std::push_heap(heap.begin(), heap.end());
    } else if (k > 0 && std::pair(d, i) < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = {d, i};
      std::push_heap(heap.begin(), heap.end());
    }
  }
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

}  // namespace bypass::detail
