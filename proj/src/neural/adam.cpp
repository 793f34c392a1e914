#include "msca/neural/adam.hpp"

#include <cmath>

namespace msca::neural {

void adam_step(std::span<Tensor* const> params, std::span<Tensor* const> grads, AdamState& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " has shape " +
                       shape_string(grads[i]->shape()) + ", parameter has " +
                       shape_string(params[i]->shape()));
    }
    if (!grads[i]->data().allFinite()) {
      throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match parameter list");
  }

  const auto& c = state.config;
  ++state.step;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i].data();
    auto& v = state.v[i].data();
    const auto& g = grads[i]->data();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    params[i]->data().array() -=
        c.learning_rate * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

}  // namespace msca::neural
