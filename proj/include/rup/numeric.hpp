#pragma once

#include <cstddef>
#include <span>

namespace rup {

/// Fixed-order pairwise (tree) summation; reproducible and accurate to
/// O(log n) rounding.
inline double pairwiseSum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) {
      s += x;
    }
    return s;
  }
  const size_t half = xs.size() / 2;
  return pairwiseSum(xs.first(half)) + pairwiseSum(xs.subspan(half));
}

}  // namespace rup
