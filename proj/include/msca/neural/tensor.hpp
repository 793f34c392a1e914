#pragma once

#include <Eigen/Core>
#include <numeric>
#include <string>
#include <vector>

#include "msca/errors.hpp"

namespace msca::neural {

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Eigen::Index{1},
                         [](Eigen::Index a, Eigen::Index b) { return a * b; });
}

std::string shape_string(const Shape& shape);

/// Dense row-major tensor backed by an Eigen column vector.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape)
      : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}
  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data has " + std::to_string(data_.size()) +
                       " values, shape " + shape_string(shape_) + " needs " +
                       std::to_string(shape_size(shape_)));
    }
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }
  static BasicTensor constant(Shape shape, Scalar value) {
    const auto n = shape_size(shape);
    return BasicTensor(std::move(shape), Vector::Constant(n, value));
  }

  const Shape& shape() const { return shape_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index dim(std::size_t axis) const { return shape_.at(axis); }
  Eigen::Index size() const { return data_.size(); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  Scalar& operator[](Eigen::Index i) { return data_[i]; }
  Scalar operator[](Eigen::Index i) const { return data_[i]; }

  MatrixMap matrix(Eigen::Index rows, Eigen::Index cols) {
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Eigen::Index rows, Eigen::Index cols) const {
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;

}  // namespace msca::neural
