#include "msca/neural/losses.hpp"

#include <cmath>

namespace msca::neural {

LossGrad mse_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& t) {
  if (p.size() != t.size()) throw ShapeError("mse_loss: size mismatch");
  const Eigen::VectorXd d = p - t;
  const auto n = static_cast<double>(p.size());
  return {d.squaredNorm() / n, 2.0 * d / n};
}

LossGrad l1_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& t) {
  if (p.size() != t.size()) throw ShapeError("l1_loss: size mismatch");
  const Eigen::VectorXd d = p - t;
  const auto n = static_cast<double>(p.size());
  return {d.cwiseAbs().sum() / n, d.unaryExpr([n](double v) {
            return v > 0 ? 1.0 / n : (v < 0 ? -1.0 / n : 0.0);
          })};
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

LossGrad softmax_cross_entropy(const Eigen::VectorXd& logits, Eigen::Index label) {
  if (label < 0 || label >= logits.size()) throw BoundsError("cross entropy label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  Eigen::VectorXd grad = (logits.array() - lse).exp();
  grad[label] -= 1.0;
  return {lse - logits[label], std::move(grad)};
}

LossGrad bce_with_logit(double logit, double target) {
  // log(1 + exp(-|x|)) + max(x, 0) - x * t
  const double value = std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) - logit * target;
  const double s = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                              : std::exp(logit) / (1.0 + std::exp(logit));
  return {value, Eigen::VectorXd::Constant(1, s - target)};
}

}  // namespace msca::neural
