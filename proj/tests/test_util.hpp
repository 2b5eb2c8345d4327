#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu::testing {

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// max |a-b| / max(1, max|b|)
inline double scaled_max_diff(const Tensor& a, const Tensor& b) {
  double scale = 1.0;
  for (double v : b.data()) scale = std::max(scale, std::abs(v));
  return max_abs_diff(a, b) / scale;
}

}  // namespace tcgu::testing
