#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tcgu/numerics/autodiff.hpp"

namespace tcgu::ad {

/// Builds a scalar from the given inputs. Must be deterministic.
using ScalarFn = std::function<Var(std::span<const Var>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares reverse-mode gradients with central differences at every
/// coordinate of every input. Error per coordinate is
/// |analytic - numeric| / (|numeric| + 1e-12).
GradCheckReport finite_diff_report(const ScalarFn& fn, std::span<const Tensor> inputs, double eps);

inline double finite_diff_check(const ScalarFn& fn, std::span<const Tensor> inputs, double eps) {
  return finite_diff_report(fn, inputs, eps).max_relative_error;
}

}  // namespace tcgu::ad
