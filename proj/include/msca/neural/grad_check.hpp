#pragma once

#include <functional>
#include <span>

#include "msca/neural/layers.hpp"

namespace msca::neural {

struct GradCheckResult {
  double max_relative_error = 0.0;
  Eigen::Index entries_checked = 0;
};

/// |a - n| / max(1, |a|, |n|): relative for large gradients, absolute for
/// gradients below one.
double gradient_error(double analytic, double numeric);

/// Central differences of `loss` w.r.t. every entry of every variable,
/// compared against `analytic` (same layout). `eps` must lie in (0, 1e-2].
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<Tensor* const> variables,
                           std::span<const Tensor> analytic, double eps = 1e-5);

/// Checks one layer's backward pass against loss = sum(forward(x) * probe)
/// with a random probe, over all parameters and the input.
GradCheckResult grad_check_layer(const LayerSpec& spec, std::vector<Tensor> params, Tensor input,
                                 Rng& rng, double eps = 1e-5);

}  // namespace msca::neural
