#pragma once

#include <span>
#include <vector>

#include "msca/neural/tensor.hpp"

namespace msca::neural {

struct AdamConfig {
  double learning_rate = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

/// Bias-corrected Adam update, in place. Moments are created on the first
/// call. Throws NumericError if any gradient is NaN or infinite.
void adam_step(std::span<Tensor* const> params, std::span<Tensor* const> grads, AdamState& state);

}  // namespace msca::neural
