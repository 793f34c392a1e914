#include "msca/neural/sequential.hpp"

namespace msca::neural {

Sequential::Sequential(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  for (const auto& spec : layers_) {
    std::vector<Tensor> p;
    for (const auto& shape : param_shapes(spec)) p.emplace_back(shape);
    params_.push_back(std::move(p));
  }
}

void Sequential::init(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) params_[i] = init_params(layers_[i], rng);
}

Sequential::Pass Sequential::forward(const Tensor& input) const {
  Pass pass;
  pass.caches.reserve(layers_.size());
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto r = neural::forward(layers_[i], params_[i], x);
    pass.caches.push_back(std::move(r.cache));
    x = std::move(r.output);
  }
  pass.output = std::move(x);
  return pass;
}

Tensor Sequential::backward(const Pass& pass, const Tensor& grad_out, LayerParams& grads) const {
  if (pass.caches.size() != layers_.size()) {
    throw ShapeError("Sequential::backward: pass has " + std::to_string(pass.caches.size()) +
                     " caches for " + std::to_string(layers_.size()) + " layers");
  }
  Tensor g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    auto r = neural::backward(layers_[i], params_[i], pass.caches[i], g);
    for (std::size_t j = 0; j < r.grad_params.size(); ++j) {
      grads[i][j].data() += r.grad_params[j].data();
    }
    g = std::move(r.grad_input);
  }
  return g;
}

LayerParams Sequential::zero_grads() const {
  LayerParams grads;
  for (const auto& layer : params_) {
    std::vector<Tensor> g;
    for (const auto& p : layer) g.emplace_back(p.shape());
    grads.push_back(std::move(g));
  }
  return grads;
}

void Sequential::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto names = param_names(layers_[i]);
    for (std::size_t j = 0; j < params_[i].size(); ++j) {
      out.push_back({prefix + "." + std::to_string(i) + "." + names[j], &params_[i][j]});
    }
  }
}

void Sequential::collect_grads(LayerParams& grads, std::vector<Tensor*>& out) {
  for (auto& layer : grads)
    for (auto& g : layer) out.push_back(&g);
}

}  // namespace msca::neural
