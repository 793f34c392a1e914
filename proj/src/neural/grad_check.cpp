#include "msca/neural/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace msca::neural {

double gradient_error(double analytic, double numeric) {
  const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<Tensor* const> variables, std::span<const Tensor> analytic,
                           double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ConfigError("grad_check: eps must lie in (0, 1e-2]");
  if (variables.size() != analytic.size()) throw ShapeError("grad_check: variable/gradient count mismatch");
  GradCheckResult result;
  for (std::size_t v = 0; v < variables.size(); ++v) {
    auto& t = *variables[v];
    if (t.size() != analytic[v].size()) throw ShapeError("grad_check: gradient size mismatch");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double plus = loss();
      t[i] = saved - eps;
      const double minus = loss();
      t[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      result.max_relative_error =
          std::max(result.max_relative_error, gradient_error(analytic[v][i], numeric));
      ++result.entries_checked;
    }
  }
  return result;
}

GradCheckResult grad_check_layer(const LayerSpec& spec, std::vector<Tensor> params, Tensor input,
                                 Rng& rng, double eps) {
  const auto out_shape = forward(spec, params, input).output.shape();
  std::normal_distribution<double> normal;
  Tensor probe(out_shape);
  for (Eigen::Index i = 0; i < probe.size(); ++i) probe[i] = normal(rng);

  auto fwd = forward(spec, params, input);
  auto bwd = backward(spec, params, fwd.cache, probe);

  std::vector<Tensor*> vars;
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.push_back(&params[i]);
    grads.push_back(bwd.grad_params[i]);
  }
  vars.push_back(&input);
  grads.push_back(bwd.grad_input);

  auto loss = [&] { return forward(spec, params, input).output.data().dot(probe.data()); };
  return grad_check(loss, vars, grads, eps);
}

}  // namespace msca::neural
