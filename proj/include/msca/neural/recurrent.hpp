#pragma once

#include <span>
#include <vector>

#include "msca/neural/tensor.hpp"
#include "msca/seeding.hpp"

namespace msca::neural {

/// Gated recurrent cell:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r * h) + bn)
///   h' = (1 - z) * n + z * h
struct GruCell {
  Eigen::Index input = 1;
  Eigen::Index hidden = 1;

  /// Order: Wz, Uz, bz, Wr, Ur, br, Wn, Un, bn.
  std::vector<Shape> param_shapes() const;
  std::vector<Tensor> init_params(Rng& rng) const;
};

struct GruStepCache {
  Eigen::VectorXd x, h_prev, z, r, n;
};

struct GruStepGrads {
  Eigen::VectorXd grad_x;
  Eigen::VectorXd grad_h_prev;
};

Eigen::VectorXd gru_forward(const GruCell& cell, std::span<const Tensor> params,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                            GruStepCache* cache);

/// Accumulates parameter gradients into `grads` (same layout as params).
GruStepGrads gru_backward(const GruCell& cell, std::span<const Tensor> params,
                          const GruStepCache& cache, const Eigen::VectorXd& grad_h,
                          std::span<Tensor> grads);

}  // namespace msca::neural
