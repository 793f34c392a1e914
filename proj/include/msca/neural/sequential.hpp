#pragma once

#include <string>
#include <vector>

#include "msca/neural/layers.hpp"

namespace msca::neural {

struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Per-layer parameter (or gradient) tensors.
using LayerParams = std::vector<std::vector<Tensor>>;

/// A plain feed-forward stack of layers.
class Sequential {
 public:
  struct Pass {
    std::vector<LayerCache> caches;
    Tensor output;
  };

  Sequential() = default;
  explicit Sequential(std::vector<LayerSpec> layers);

  void init(Rng& rng);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  LayerParams& params() { return params_; }
  const LayerParams& params() const { return params_; }

  Pass forward(const Tensor& input) const;
  /// Returns grad w.r.t. the input and adds parameter gradients into `grads`.
  Tensor backward(const Pass& pass, const Tensor& grad_out, LayerParams& grads) const;

  LayerParams zero_grads() const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
  static void collect_grads(LayerParams& grads, std::vector<Tensor*>& out);

 private:
  std::vector<LayerSpec> layers_;
  LayerParams params_;
};

}  // namespace msca::neural
