#pragma once

#include <cstddef>
#include <vector>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty added to the gradient (coupled, as in classic Adam).
  double weight_decay = 0.0;
};

/// Adaptive moment estimation over a fixed list of parameter tensors.
/// step() replaces each parameter with its updated value; the old tensors are
/// not touched, so values captured in a recorded graph stay valid.
class Adam {
 public:
  Adam(AdamConfig config, const std::vector<Tensor>& params);

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
  std::size_t steps_taken() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace tcgu
