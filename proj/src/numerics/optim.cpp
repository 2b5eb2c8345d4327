#include "tcgu/numerics/optim.hpp"

#include <cmath>

namespace tcgu {

Adam::Adam(AdamConfig config, const std::vector<Tensor>& params) : config_(config) {
  for (const Tensor& p : params) {
    m_.emplace_back(p.rows(), p.cols());
    v_.emplace_back(p.rows(), p.cols());
  }
}

void Adam::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw DimensionError("Adam::step: parameter count mismatch");
  }
  ++t_;
  const double b1t = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double b2t = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].same_shape(grads[p])) throw DimensionError("Adam::step: gradient shape mismatch");
    Tensor next = params[p];
    auto x = next.data();
    auto g = grads[p].data();
    auto m = m_[p].data();
    auto v = v_[p].data();
    const double b1 = config_.beta1, b2 = config_.beta2, wd = config_.weight_decay, eps = config_.eps;
    const double step = config_.lr / b1t, inv_b2t = 1.0 / b2t;
    double* xs = x.data();
    const double* gs = g.data();
    double* ms = m.data();
    double* vs = v.data();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = gs[i] + wd * xs[i];
      const double mi = b1 * ms[i] + (1.0 - b1) * gi;
      const double vi = b2 * vs[i] + (1.0 - b2) * gi * gi;
      ms[i] = mi;
      vs[i] = vi;
      xs[i] -= step * mi / (std::sqrt(vi * inv_b2t) + eps);
    }
    params[p] = std::move(next);
  }
}

}  // namespace tcgu
