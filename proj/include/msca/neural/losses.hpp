#pragma once

#include "msca/neural/tensor.hpp"

namespace msca::neural {

struct LossGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Mean squared error over all elements.
LossGrad mse_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);
/// Mean absolute error; subgradient 0 at equality.
LossGrad l1_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);

/// -log softmax(logits)[label]; grad w.r.t. logits.
LossGrad softmax_cross_entropy(const Eigen::VectorXd& logits, Eigen::Index label);

/// Binary cross-entropy of sigmoid(logit) against target in {0,1}; the
/// returned grad has one element, d loss / d logit.
LossGrad bce_with_logit(double logit, double target);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

}  // namespace msca::neural
