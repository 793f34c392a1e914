#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "msca/neural/tensor.hpp"
#include "msca/seeding.hpp"

namespace msca::neural {

struct Conv2D {
  Eigen::Index in_channels = 1;
  Eigen::Index out_channels = 1;
  Eigen::Index kernel = 3;
  Eigen::Index stride = 1;
  Eigen::Index padding = 0;
};

struct FullyConnected {
  Eigen::Index in = 1;
  Eigen::Index out = 1;
};

struct ReLU {};
struct Sigmoid {};
struct Tanh {};

struct NearestUpsample {
  Eigen::Index factor = 2;
};

// Per-channel gate from average- and max-pooled descriptors fed through a
// shared bottleneck MLP.
struct ChannelAttention {
  Eigen::Index channels = 1;
  Eigen::Index reduction = 4;

  Eigen::Index hidden() const { return std::max<Eigen::Index>(1, channels / reduction); }
};

// Per-position gate from channel-wise average/max maps through a k x k
// convolution. Borders are replicate-padded so a constant input yields a
// constant gate.
struct SpatialAttention {
  Eigen::Index kernel = 7;
};

struct Softmax {};

struct Reshape {
  Shape target;
};

using LayerSpec = std::variant<Conv2D, FullyConnected, ReLU, Sigmoid, Tanh, NearestUpsample,
                               ChannelAttention, SpatialAttention, Softmax, Reshape>;

std::string layer_name(const LayerSpec& spec);

/// Everything backward() needs from the matching forward() call.
struct LayerCache {
  std::size_t kind = std::variant_npos;
  Shape input_shape;
  Shape output_shape;
  std::vector<Tensor> saved;
  std::vector<Eigen::Index> argmax;
};

struct ForwardResult {
  Tensor output;
  LayerCache cache;
};

struct BackwardResult {
  Tensor grad_input;
  std::vector<Tensor> grad_params;
};

/// Parameter tensors in a fixed order: Conv2D {weight [out,in,k,k], bias},
/// FullyConnected {weight [out,in], bias}, ChannelAttention {w1, b1, w2, b2},
/// SpatialAttention {weight [1,2,k,k], bias}; others none.
std::vector<Shape> param_shapes(const LayerSpec& spec);
std::vector<std::string> param_names(const LayerSpec& spec);

/// Glorot-uniform weights, zero biases.
std::vector<Tensor> init_params(const LayerSpec& spec, Rng& rng);

Shape output_shape(const LayerSpec& spec, const Shape& input);

/// Throws ShapeError when input or parameter shapes disagree with the spec.
ForwardResult forward(const LayerSpec& spec, std::span<const Tensor> params, const Tensor& input);

/// Throws ShapeError when the cache came from a different layer kind or
/// shape, or grad_out does not match the cached output.
BackwardResult backward(const LayerSpec& spec, std::span<const Tensor> params,
                        const LayerCache& cache, const Tensor& grad_out);

/// Gate produced by an attention layer's forward pass: [C] for channel
/// attention, [H,W] for spatial attention.
const Tensor& attention_weights(const LayerCache& cache);

bool is_attention(const LayerSpec& spec);

}  // namespace msca::neural
