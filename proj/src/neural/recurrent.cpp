#include "msca/neural/recurrent.hpp"

#include <cmath>

namespace msca::neural {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

void check(const GruCell& cell, std::span<const Tensor> params) {
  const auto shapes = cell.param_shapes();
  if (params.size() != shapes.size()) throw ShapeError("GruCell: expected 9 parameter tensors");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i]) {
      throw ShapeError("GruCell parameter " + std::to_string(i) + ": expected " +
                       shape_string(shapes[i]) + ", got " + shape_string(params[i].shape()));
    }
  }
}

}  // namespace

std::vector<Shape> GruCell::param_shapes() const {
  std::vector<Shape> shapes;
  for (int gate = 0; gate < 3; ++gate) {
    shapes.push_back({hidden, input});
    shapes.push_back({hidden, hidden});
    shapes.push_back({hidden});
  }
  return shapes;
}

std::vector<Tensor> GruCell::init_params(Rng& rng) const {
  std::vector<Tensor> params;
  for (const auto& shape : param_shapes()) {
    Tensor t(shape);
    if (shape.size() == 2) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
    }
    params.push_back(std::move(t));
  }
  return params;
}

Eigen::VectorXd gru_forward(const GruCell& cell, std::span<const Tensor> p,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                            GruStepCache* cache) {
  check(cell, p);
  if (x.size() != cell.input || h.size() != cell.hidden) {
    throw ShapeError("GruCell: input/hidden size mismatch");
  }
  const auto in = cell.input, hid = cell.hidden;
  Eigen::VectorXd z = sigmoid(p[0].matrix(hid, in) * x + p[1].matrix(hid, hid) * h + p[2].data());
  Eigen::VectorXd r = sigmoid(p[3].matrix(hid, in) * x + p[4].matrix(hid, hid) * h + p[5].data());
  Eigen::VectorXd n = (p[6].matrix(hid, in) * x + p[7].matrix(hid, hid) * r.cwiseProduct(h) +
                       p[8].data())
                          .array()
                          .tanh()
                          .matrix();
  Eigen::VectorXd out = (1.0 - z.array()) * n.array() + z.array() * h.array();
  if (cache) *cache = {x, h, std::move(z), std::move(r), std::move(n)};
  return out;
}

GruStepGrads gru_backward(const GruCell& cell, std::span<const Tensor> p, const GruStepCache& c,
                          const Eigen::VectorXd& gh, std::span<Tensor> grads) {
  const auto in = cell.input, hid = cell.hidden;
  const Eigen::ArrayXd z = c.z.array(), r = c.r.array(), n = c.n.array();
  const Eigen::VectorXd rh = c.r.cwiseProduct(c.h_prev);

  Eigen::VectorXd gn = (gh.array() * (1.0 - z)).matrix();
  Eigen::VectorXd gz = (gh.array() * (c.h_prev.array() - n)).matrix();
  Eigen::VectorXd gh_prev = (gh.array() * z).matrix();

  Eigen::VectorXd an = (gn.array() * (1.0 - n * n)).matrix();
  grads[6].matrix(hid, in) += an * c.x.transpose();
  grads[7].matrix(hid, hid) += an * rh.transpose();
  grads[8].data() += an;
  Eigen::VectorXd g_rh = p[7].matrix(hid, hid).transpose() * an;
  Eigen::VectorXd gr = g_rh.cwiseProduct(c.h_prev);
  gh_prev += g_rh.cwiseProduct(c.r);
  Eigen::VectorXd gx = p[6].matrix(hid, in).transpose() * an;

  Eigen::VectorXd az = (gz.array() * z * (1.0 - z)).matrix();
  grads[0].matrix(hid, in) += az * c.x.transpose();
  grads[1].matrix(hid, hid) += az * c.h_prev.transpose();
  grads[2].data() += az;
  gx += p[0].matrix(hid, in).transpose() * az;
  gh_prev += p[1].matrix(hid, hid).transpose() * az;

  Eigen::VectorXd ar = (gr.array() * r * (1.0 - r)).matrix();
  grads[3].matrix(hid, in) += ar * c.x.transpose();
  grads[4].matrix(hid, hid) += ar * c.h_prev.transpose();
  grads[5].data() += ar;
  gx += p[3].matrix(hid, in).transpose() * ar;
  gh_prev += p[4].matrix(hid, hid).transpose() * ar;

  return {std::move(gx), std::move(gh_prev)};
}

}  // namespace msca::neural
