#include "msca/neural/layers.hpp"

#include <algorithm>
#include <cmath>

namespace msca::neural {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using RowMatrix = Tensor::RowMatrix;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void expect_shape(const char* what, const Shape& expected, const Shape& actual) {
  if (expected != actual) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                     shape_string(actual));
  }
}

void expect_rank3(const char* layer, const Tensor& x) {
  if (x.rank() != 3) {
    throw ShapeError(std::string(layer) + ": expected a C x H x W input, got " +
                     shape_string(x.shape()));
  }
}

void check_params(const LayerSpec& spec, std::span<const Tensor> params) {
  const auto shapes = param_shapes(spec);
  if (shapes.size() != params.size()) {
    throw ShapeError(layer_name(spec) + ": expected " + std::to_string(shapes.size()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i] != params[i].shape()) {
      expect_shape((layer_name(spec) + " parameter " + std::to_string(i)).c_str(), shapes[i],
                   params[i].shape());
    }
  }
}

Eigen::Index conv_out(Eigen::Index in, const Conv2D& c) {
  return (in + 2 * c.padding - c.kernel) / c.stride + 1;
}

// Rows: (channel, ki, kj); columns: output positions.
RowMatrix im2col(const Tensor& x, const Conv2D& c, Eigen::Index ho, Eigen::Index wo) {
  const auto ch = x.dim(0), h = x.dim(1), w = x.dim(2), k = c.kernel;
  RowMatrix cols = RowMatrix::Zero(ch * k * k, ho * wo);
  for (Eigen::Index cc = 0; cc < ch; ++cc) {
    const double* plane = x.data().data() + cc * h * w;
    for (Eigen::Index ki = 0; ki < k; ++ki) {
      for (Eigen::Index kj = 0; kj < k; ++kj) {
        double* row = cols.data() + ((cc * k + ki) * k + kj) * ho * wo;
        for (Eigen::Index oy = 0; oy < ho; ++oy) {
          const auto iy = oy * c.stride + ki - c.padding;
          if (iy < 0 || iy >= h) continue;
          for (Eigen::Index ox = 0; ox < wo; ++ox) {
            const auto ix = ox * c.stride + kj - c.padding;
            if (ix >= 0 && ix < w) row[oy * wo + ox] = plane[iy * w + ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMatrix& cols, const Conv2D& c, Eigen::Index ho, Eigen::Index wo,
            Tensor& gx) {
  const auto ch = gx.dim(0), h = gx.dim(1), w = gx.dim(2), k = c.kernel;
  for (Eigen::Index cc = 0; cc < ch; ++cc) {
    double* plane = gx.data().data() + cc * h * w;
    for (Eigen::Index ki = 0; ki < k; ++ki) {
      for (Eigen::Index kj = 0; kj < k; ++kj) {
        const double* row = cols.data() + ((cc * k + ki) * k + kj) * ho * wo;
        for (Eigen::Index oy = 0; oy < ho; ++oy) {
          const auto iy = oy * c.stride + ki - c.padding;
          if (iy < 0 || iy >= h) continue;
          for (Eigen::Index ox = 0; ox < wo; ++ox) {
            const auto ix = ox * c.stride + kj - c.padding;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

// Replicate-padded copy of one H x W plane.
RowMatrix replicate_pad(const double* plane, Eigen::Index h, Eigen::Index w, Eigen::Index pad) {
  RowMatrix out(h + 2 * pad, w + 2 * pad);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const auto iy = std::clamp<Eigen::Index>(r - pad, 0, h - 1);
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out(r, c) = plane[iy * w + std::clamp<Eigen::Index>(c - pad, 0, w - 1)];
    }
  }
  return out;
}

// Adjoint of replicate_pad: border cells fold back onto the clamped source.
void replicate_unpad_add(const RowMatrix& g, Eigen::Index h, Eigen::Index w, Eigen::Index pad,
                         double* plane) {
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    const auto iy = std::clamp<Eigen::Index>(r - pad, 0, h - 1);
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      plane[iy * w + std::clamp<Eigen::Index>(c - pad, 0, w - 1)] += g(r, c);
    }
  }
}

Tensor uniform(Shape shape, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

double glorot(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// ---------------------------------------------------------------- forward

ForwardResult conv_forward(const Conv2D& c, std::span<const Tensor> p, const Tensor& x) {
  expect_rank3("Conv2D", x);
  if (x.dim(0) != c.in_channels) {
    throw ShapeError("Conv2D: expected " + std::to_string(c.in_channels) +
                     " input channels, got " + shape_string(x.shape()));
  }
  const auto ho = conv_out(x.dim(1), c), wo = conv_out(x.dim(2), c);
  if (ho <= 0 || wo <= 0) throw ShapeError("Conv2D: input " + shape_string(x.shape()) + " too small");
  auto cols = im2col(x, c, ho, wo);
  Tensor y({c.out_channels, ho, wo});
  auto ym = y.matrix(c.out_channels, ho * wo);
  ym.noalias() = p[0].matrix(c.out_channels, c.in_channels * c.kernel * c.kernel) * cols;
  ym.colwise() += p[1].data();
  LayerCache cache;
  cache.saved.push_back(Tensor({cols.rows(), cols.cols()},
                               Eigen::Map<const Eigen::VectorXd>(cols.data(), cols.size())));
  return {std::move(y), std::move(cache)};
}

ForwardResult fc_forward(const FullyConnected& f, std::span<const Tensor> p, const Tensor& x) {
  if (x.size() != f.in) {
    throw ShapeError("FullyConnected: expected " + std::to_string(f.in) + " inputs, got " +
                     shape_string(x.shape()));
  }
  Tensor y({f.out});
  y.data().noalias() = p[0].matrix(f.out, f.in) * x.data() + p[1].data();
  LayerCache cache;
  cache.saved.push_back(x);
  return {std::move(y), std::move(cache)};
}

template <class Fn>
ForwardResult pointwise_forward(const Tensor& x, Fn fn) {
  Tensor y(x.shape(), x.data().unaryExpr(fn));
  LayerCache cache;
  cache.saved.push_back(x);
  cache.saved.push_back(y);
  return {std::move(y), std::move(cache)};
}

ForwardResult upsample_forward(const NearestUpsample& u, const Tensor& x) {
  expect_rank3("NearestUpsample", x);
  const auto ch = x.dim(0), h = x.dim(1), w = x.dim(2), f = u.factor;
  Tensor y({ch, h * f, w * f});
  for (Eigen::Index c = 0; c < ch; ++c)
    for (Eigen::Index yy = 0; yy < h * f; ++yy)
      for (Eigen::Index xx = 0; xx < w * f; ++xx)
        y[(c * h * f + yy) * w * f + xx] = x[(c * h + yy / f) * w + xx / f];
  return {std::move(y), LayerCache{}};
}

ForwardResult channel_attention_forward(const ChannelAttention& a, std::span<const Tensor> p,
                                        const Tensor& x) {
  expect_rank3("ChannelAttention", x);
  if (x.dim(0) != a.channels) {
    throw ShapeError("ChannelAttention: expected " + std::to_string(a.channels) +
                     " channels, got " + shape_string(x.shape()));
  }
  const auto ch = a.channels, hw = x.dim(1) * x.dim(2), hid = a.hidden();
  const auto xm = x.matrix(ch, hw);
  Eigen::VectorXd avg = xm.rowwise().mean();
  Eigen::VectorXd mx(ch);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(ch));
  for (Eigen::Index c = 0; c < ch; ++c) {
    Eigen::Index idx = 0;
    mx[c] = xm.row(c).maxCoeff(&idx);
    argmax[static_cast<std::size_t>(c)] = idx;
  }
  const auto w1 = p[0].matrix(hid, ch);
  const auto w2 = p[2].matrix(ch, hid);
  Eigen::VectorXd a_avg = w1 * avg + p[1].data();
  Eigen::VectorXd a_max = w1 * mx + p[1].data();
  Eigen::VectorXd r_avg = a_avg.cwiseMax(0.0);
  Eigen::VectorXd r_max = a_max.cwiseMax(0.0);
  Eigen::VectorXd s = w2 * r_avg + w2 * r_max + 2.0 * p[3].data();
  Tensor gate({ch}, s.unaryExpr([](double v) { return sigmoid(v); }));
  Tensor y(x.shape());
  y.matrix(ch, hw) = gate.data().asDiagonal() * xm;
  LayerCache cache;
  cache.saved = {x, gate, Tensor({hid}, a_avg), Tensor({hid}, a_max), Tensor({ch}, avg),
                 Tensor({ch}, mx)};
  cache.argmax = std::move(argmax);
  return {std::move(y), std::move(cache)};
}

ForwardResult spatial_attention_forward(const SpatialAttention& a, std::span<const Tensor> p,
                                        const Tensor& x) {
  expect_rank3("SpatialAttention", x);
  const auto ch = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
  const auto xm = x.matrix(ch, hw);
  Tensor pooled({2, h, w});
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(hw));
  for (Eigen::Index i = 0; i < hw; ++i) {
    Eigen::Index idx = 0;
    pooled[hw + i] = xm.col(i).maxCoeff(&idx);
    pooled[i] = xm.col(i).mean();
    argmax[static_cast<std::size_t>(i)] = idx;
  }
  const auto k = a.kernel, pad = k / 2;
  RowMatrix s = RowMatrix::Constant(h, w, p[1][0]);
  for (Eigen::Index c = 0; c < 2; ++c) {
    const auto padded = replicate_pad(pooled.data().data() + c * hw, h, w, pad);
    for (Eigen::Index ki = 0; ki < k; ++ki)
      for (Eigen::Index kj = 0; kj < k; ++kj) s += p[0][(c * k + ki) * k + kj] * padded.block(ki, kj, h, w);
  }
  Tensor gate({h, w});
  for (Eigen::Index i = 0; i < hw; ++i) gate[i] = sigmoid(s.data()[i]);
  Tensor y(x.shape());
  y.matrix(ch, hw) = xm * gate.data().asDiagonal();
  LayerCache cache;
  cache.saved = {x, gate, pooled};
  cache.argmax = std::move(argmax);
  return {std::move(y), std::move(cache)};
}

ForwardResult softmax_forward(const Tensor& x) {
  Eigen::VectorXd e = (x.data().array() - x.data().maxCoeff()).exp();
  e /= e.sum();
  Tensor y(x.shape(), std::move(e));
  LayerCache cache;
  cache.saved.push_back(y);
  return {std::move(y), std::move(cache)};
}

// --------------------------------------------------------------- backward

BackwardResult conv_backward(const Conv2D& c, std::span<const Tensor> p, const LayerCache& cache,
                             const Tensor& gy) {
  const auto ho = gy.dim(1), wo = gy.dim(2), ckk = c.in_channels * c.kernel * c.kernel;
  const auto cols = cache.saved[0].matrix(ckk, ho * wo);
  const auto gym = gy.matrix(c.out_channels, ho * wo);
  Tensor gw(p[0].shape());
  gw.matrix(c.out_channels, ckk).noalias() = gym * cols.transpose();
  Tensor gb({c.out_channels}, gym.rowwise().sum());
  RowMatrix gcols = p[0].matrix(c.out_channels, ckk).transpose() * gym;
  Tensor gx(cache.input_shape);
  col2im(gcols, c, ho, wo, gx);
  return {std::move(gx), {std::move(gw), std::move(gb)}};
}

BackwardResult fc_backward(const FullyConnected& f, std::span<const Tensor> p,
                           const LayerCache& cache, const Tensor& gy) {
  const auto& x = cache.saved[0];
  Tensor gw(p[0].shape());
  gw.matrix(f.out, f.in).noalias() = gy.data() * x.data().transpose();
  Tensor gb({f.out}, gy.data());
  Tensor gx(cache.input_shape, p[0].matrix(f.out, f.in).transpose() * gy.data());
  return {std::move(gx), {std::move(gw), std::move(gb)}};
}

BackwardResult upsample_backward(const NearestUpsample& u, const LayerCache& cache,
                                 const Tensor& gy) {
  Tensor gx(cache.input_shape);
  const auto ch = gx.dim(0), h = gx.dim(1), w = gx.dim(2), f = u.factor;
  for (Eigen::Index c = 0; c < ch; ++c)
    for (Eigen::Index yy = 0; yy < h * f; ++yy)
      for (Eigen::Index xx = 0; xx < w * f; ++xx)
        gx[(c * h + yy / f) * w + xx / f] += gy[(c * h * f + yy) * w * f + xx];
  return {std::move(gx), {}};
}

BackwardResult channel_attention_backward(const ChannelAttention& a, std::span<const Tensor> p,
                                          const LayerCache& cache, const Tensor& gy) {
  const auto& x = cache.saved[0];
  const auto& gate = cache.saved[1].data();
  const auto& a_avg = cache.saved[2].data();
  const auto& a_max = cache.saved[3].data();
  const auto& avg = cache.saved[4].data();
  const auto& mx = cache.saved[5].data();
  const auto ch = a.channels, hw = x.dim(1) * x.dim(2), hid = a.hidden();
  const auto xm = x.matrix(ch, hw);
  const auto gym = gy.matrix(ch, hw);
  const auto w1 = p[0].matrix(hid, ch);
  const auto w2 = p[2].matrix(ch, hid);

  Eigen::VectorXd g_gate = (gym.array() * xm.array()).rowwise().sum();
  Eigen::VectorXd gs = g_gate.array() * gate.array() * (1.0 - gate.array());
  const Eigen::VectorXd r_avg = a_avg.cwiseMax(0.0);
  const Eigen::VectorXd r_max = a_max.cwiseMax(0.0);

  Tensor gw1(p[0].shape()), gb1(p[1].shape()), gw2(p[2].shape()), gb2(p[3].shape());
  gw2.matrix(ch, hid) = gs * (r_avg + r_max).transpose();
  gb2.data() = 2.0 * gs;
  const Eigen::VectorXd gr = w2.transpose() * gs;
  const Eigen::VectorXd ga_avg = gr.array() * (a_avg.array() > 0.0).cast<double>();
  const Eigen::VectorXd ga_max = gr.array() * (a_max.array() > 0.0).cast<double>();
  gw1.matrix(hid, ch) = ga_avg * avg.transpose() + ga_max * mx.transpose();
  gb1.data() = ga_avg + ga_max;
  const Eigen::VectorXd g_avg = w1.transpose() * ga_avg;
  const Eigen::VectorXd g_max = w1.transpose() * ga_max;

  Tensor gx(x.shape());
  auto gxm = gx.matrix(ch, hw);
  gxm = gate.asDiagonal() * gym;
  gxm.colwise() += g_avg / static_cast<double>(hw);
  for (Eigen::Index c = 0; c < ch; ++c) gxm(c, cache.argmax[static_cast<std::size_t>(c)]) += g_max[c];
  return {std::move(gx), {std::move(gw1), std::move(gb1), std::move(gw2), std::move(gb2)}};
}

BackwardResult spatial_attention_backward(const SpatialAttention& a, std::span<const Tensor> p,
                                          const LayerCache& cache, const Tensor& gy) {
  const auto& x = cache.saved[0];
  const auto& gate = cache.saved[1].data();
  const auto& pooled = cache.saved[2];
  const auto ch = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
  const auto xm = x.matrix(ch, hw);
  const auto gym = gy.matrix(ch, hw);

  Eigen::RowVectorXd g_gate = (gym.array() * xm.array()).colwise().sum();
  Eigen::RowVectorXd gs = g_gate.array() * gate.transpose().array() * (1.0 - gate.transpose().array());
  const auto k = a.kernel, pad = k / 2;
  const Eigen::Map<const RowMatrix> gsm(gs.data(), h, w);
  Tensor gk(p[0].shape());
  Tensor gb({1});
  gb[0] = gs.sum();
  Tensor gpooled({2, h, w});
  for (Eigen::Index c = 0; c < 2; ++c) {
    const auto padded = replicate_pad(pooled.data().data() + c * hw, h, w, pad);
    RowMatrix gpad = RowMatrix::Zero(h + 2 * pad, w + 2 * pad);
    for (Eigen::Index ki = 0; ki < k; ++ki) {
      for (Eigen::Index kj = 0; kj < k; ++kj) {
        const auto idx = (c * k + ki) * k + kj;
        gk[idx] = (gsm.array() * padded.block(ki, kj, h, w).array()).sum();
        gpad.block(ki, kj, h, w) += p[0][idx] * gsm;
      }
    }
    replicate_unpad_add(gpad, h, w, pad, gpooled.data().data() + c * hw);
  }

  Tensor gx(x.shape());
  auto gxm = gx.matrix(ch, hw);
  gxm = gym * gate.asDiagonal();
  for (Eigen::Index i = 0; i < hw; ++i) {
    gxm.col(i).array() += gpooled[i] / static_cast<double>(ch);
    gxm(cache.argmax[static_cast<std::size_t>(i)], i) += gpooled[hw + i];
  }
  return {std::move(gx), {std::move(gk), std::move(gb)}};
}

}  // namespace

std::string layer_name(const LayerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Conv2D& c) {
            return "Conv2D(" + std::to_string(c.in_channels) + "->" +
                   std::to_string(c.out_channels) + ",k=" + std::to_string(c.kernel) +
                   ",s=" + std::to_string(c.stride) + ",p=" + std::to_string(c.padding) + ")";
          },
          [](const FullyConnected& f) {
            return "FullyConnected(" + std::to_string(f.in) + "->" + std::to_string(f.out) + ")";
          },
          [](const ReLU&) { return std::string("ReLU"); },
          [](const Sigmoid&) { return std::string("Sigmoid"); },
          [](const Tanh&) { return std::string("Tanh"); },
          [](const NearestUpsample& u) {
            return "NearestUpsample(" + std::to_string(u.factor) + ")";
          },
          [](const ChannelAttention& a) {
            return "ChannelAttention(" + std::to_string(a.channels) + ",r=" +
                   std::to_string(a.reduction) + ")";
          },
          [](const SpatialAttention& a) {
            return "SpatialAttention(k=" + std::to_string(a.kernel) + ")";
          },
          [](const Softmax&) { return std::string("Softmax"); },
          [](const Reshape& r) { return "Reshape(" + shape_string(r.target) + ")"; },
      },
      spec);
}

std::vector<Shape> param_shapes(const LayerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const Conv2D& c) -> std::vector<Shape> {
            return {{c.out_channels, c.in_channels, c.kernel, c.kernel}, {c.out_channels}};
          },
          [](const FullyConnected& f) -> std::vector<Shape> { return {{f.out, f.in}, {f.out}}; },
          [](const ChannelAttention& a) -> std::vector<Shape> {
            return {{a.hidden(), a.channels}, {a.hidden()}, {a.channels, a.hidden()}, {a.channels}};
          },
          [](const SpatialAttention& a) -> std::vector<Shape> {
            return {{1, 2, a.kernel, a.kernel}, {1}};
          },
          [](const auto&) -> std::vector<Shape> { return {}; },
      },
      spec);
}

std::vector<std::string> param_names(const LayerSpec& spec) {
  return std::visit(Overloaded{
                        [](const ChannelAttention&) -> std::vector<std::string> {
                          return {"w1", "b1", "w2", "b2"};
                        },
                        [](const auto& s) -> std::vector<std::string> {
                          if (param_shapes(LayerSpec(s)).empty()) return {};
                          return {"weight", "bias"};
                        },
                    },
                    spec);
}

std::vector<Tensor> init_params(const LayerSpec& spec, Rng& rng) {
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) -> std::vector<Tensor> {
            const auto kk = c.kernel * c.kernel;
            return {uniform({c.out_channels, c.in_channels, c.kernel, c.kernel},
                            glorot(c.in_channels * kk, c.out_channels * kk), rng),
                    Tensor({c.out_channels})};
          },
          [&](const FullyConnected& f) -> std::vector<Tensor> {
            return {uniform({f.out, f.in}, glorot(f.in, f.out), rng), Tensor({f.out})};
          },
          [&](const ChannelAttention& a) -> std::vector<Tensor> {
            return {uniform({a.hidden(), a.channels}, glorot(a.channels, a.hidden()), rng),
                    Tensor({a.hidden()}),
                    uniform({a.channels, a.hidden()}, glorot(a.hidden(), a.channels), rng),
                    Tensor({a.channels})};
          },
          [&](const SpatialAttention& a) -> std::vector<Tensor> {
            const auto kk = a.kernel * a.kernel;
            return {uniform({1, 2, a.kernel, a.kernel}, glorot(2 * kk, kk), rng), Tensor({1})};
          },
          [](const auto&) -> std::vector<Tensor> { return {}; },
      },
      spec);
}

Shape output_shape(const LayerSpec& spec, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) -> Shape {
            if (in.size() != 3) throw ShapeError("Conv2D: expected rank-3 input");
            return {c.out_channels, conv_out(in[1], c), conv_out(in[2], c)};
          },
          [](const FullyConnected& f) -> Shape { return {f.out}; },
          [&](const NearestUpsample& u) -> Shape {
            if (in.size() != 3) throw ShapeError("NearestUpsample: expected rank-3 input");
            return {in[0], in[1] * u.factor, in[2] * u.factor};
          },
          [](const Reshape& r) -> Shape { return r.target; },
          [&](const auto&) -> Shape { return in; },
      },
      spec);
}

ForwardResult forward(const LayerSpec& spec, std::span<const Tensor> params, const Tensor& input) {
  check_params(spec, params);
  auto result = std::visit(
      Overloaded{
          [&](const Conv2D& c) { return conv_forward(c, params, input); },
          [&](const FullyConnected& f) { return fc_forward(f, params, input); },
          [&](const ReLU&) {
            return pointwise_forward(input, [](double v) { return v > 0.0 ? v : 0.0; });
          },
          [&](const Sigmoid&) {
            return pointwise_forward(input, [](double v) { return sigmoid(v); });
          },
          [&](const Tanh&) {
            return pointwise_forward(input, [](double v) { return std::tanh(v); });
          },
          [&](const NearestUpsample& u) { return upsample_forward(u, input); },
          [&](const ChannelAttention& a) { return channel_attention_forward(a, params, input); },
          [&](const SpatialAttention& a) { return spatial_attention_forward(a, params, input); },
          [&](const Softmax&) { return softmax_forward(input); },
          [&](const Reshape& r) {
            if (shape_size(r.target) != input.size()) {
              throw ShapeError("Reshape: cannot view " + shape_string(input.shape()) + " as " +
                               shape_string(r.target));
            }
            return ForwardResult{input.reshaped(r.target), LayerCache{}};
          },
      },
      spec);
  result.cache.kind = spec.index();
  result.cache.input_shape = input.shape();
  result.cache.output_shape = result.output.shape();
  return result;
}

BackwardResult backward(const LayerSpec& spec, std::span<const Tensor> params,
                        const LayerCache& cache, const Tensor& grad_out) {
  if (cache.kind != spec.index()) {
    throw ShapeError(layer_name(spec) + ": cache was produced by a different layer kind");
  }
  check_params(spec, params);
  if (cache.output_shape != grad_out.shape()) {
    expect_shape((layer_name(spec) + " grad_out").c_str(), cache.output_shape, grad_out.shape());
  }
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) { return conv_backward(c, params, cache, grad_out); },
          [&](const FullyConnected& f) { return fc_backward(f, params, cache, grad_out); },
          [&](const ReLU&) {
            const auto& x = cache.saved[0].data();
            return BackwardResult{
                Tensor(cache.input_shape,
                       grad_out.data().cwiseProduct((x.array() > 0.0).cast<double>().matrix())),
                {}};
          },
          [&](const Sigmoid&) {
            const auto& y = cache.saved[1].data().array();
            return BackwardResult{
                Tensor(cache.input_shape, (grad_out.data().array() * y * (1.0 - y)).matrix()),
                {}};
          },
          [&](const Tanh&) {
            const auto& y = cache.saved[1].data().array();
            return BackwardResult{
                Tensor(cache.input_shape, (grad_out.data().array() * (1.0 - y * y)).matrix()),
                {}};
          },
          [&](const NearestUpsample& u) { return upsample_backward(u, cache, grad_out); },
          [&](const ChannelAttention& a) {
            return channel_attention_backward(a, params, cache, grad_out);
          },
          [&](const SpatialAttention& a) {
            return spatial_attention_backward(a, params, cache, grad_out);
          },
          [&](const Softmax&) {
            const auto& y = cache.saved[0].data();
            const double dot = grad_out.data().dot(y);
            return BackwardResult{
                Tensor(cache.input_shape, (y.array() * (grad_out.data().array() - dot)).matrix()),
                {}};
          },
          [&](const Reshape&) { return BackwardResult{grad_out.reshaped(cache.input_shape), {}}; },
      },
      spec);
}

const Tensor& attention_weights(const LayerCache& cache) {
  if (cache.kind != LayerSpec(ChannelAttention{}).index() &&
      cache.kind != LayerSpec(SpatialAttention{}).index()) {
    throw ShapeError("attention_weights: cache is not from an attention layer");
  }
  return cache.saved[1];
}

bool is_attention(const LayerSpec& spec) {
  return std::holds_alternative<ChannelAttention>(spec) ||
         std::holds_alternative<SpatialAttention>(spec);
}

}  // namespace msca::neural
