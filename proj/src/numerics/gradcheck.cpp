#include "tcgu/numerics/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace tcgu::ad {
namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& values) {
  std::vector<Var> vars;
  vars.reserve(values.size());
  for (const Tensor& t : values) vars.push_back(constant(t));
  const Var out = fn(vars);
  const double v = out.value().item();
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport finite_diff_report(const ScalarFn& fn, std::span<const Tensor> inputs, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");

  std::vector<Var> params;
  params.reserve(inputs.size());
  for (const Tensor& t : inputs) params.push_back(parameter(t));
  const Var root = fn(params);
  if (!std::isfinite(root.value().item())) {
    throw NumericError("finite_diff_check: non-finite function value");
  }
  const Gradients grads = backward(root);

  std::vector<Tensor> work(inputs.begin(), inputs.end());
  GradCheckReport report;
  for (std::size_t t = 0; t < work.size(); ++t) {
    const Tensor analytic = grads.of(params[t]);
    for (std::size_t i = 0; i < work[t].size(); ++i) {
      const double x0 = work[t].data()[i];
      work[t].data()[i] = x0 + eps;
      const double fp = evaluate(fn, work);
      work[t].data()[i] = x0 - eps;
      const double fm = evaluate(fn, work);
      work[t].data()[i] = x0;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / (std::abs(numeric) + 1e-12);
      if (err > report.max_relative_error || (t == 0 && i == 0)) {
        report = {err, t, i, a, numeric};
      }
    }
  }
  return report;
}

}  // namespace tcgu::ad
