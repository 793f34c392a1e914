#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>

#include "msca/cache_sim.hpp"
#include "msca/trace_model.hpp"

namespace msca {

struct MatrixShape {
  std::size_t channels = 1;
  std::size_t side = 1;

  std::size_t plane() const { return side * side; }
  std::size_t capacity() const { return channels * side * side; }

  friend bool operator==(const MatrixShape&, const MatrixShape&) = default;
};

struct CellIndex {
  std::size_t channel = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

/// K x N x N encoding of one trace. values holds the channels back to back,
/// each row-major; every cell at flat index >= valid_len is zero.
struct TraceMatrix {
  MatrixShape shape;
  Eigen::VectorXd values;
  std::size_t valid_len = 0;

  double at(const CellIndex& c) const {
    return values[static_cast<Eigen::Index>(flat_index(c))];
  }
  std::size_t flat_index(const CellIndex& c) const {
    return c.channel * shape.plane() + c.row * shape.side + c.col;
  }
};

enum class Overflow { Error, Truncate };

/// Row-major fill of channel 0, then channel 1, ... Throws CapacityError
/// (carrying the channel count that would fit) when the trace is too long,
/// unless `overflow` is Truncate, in which case a warning goes to std::clog.
TraceMatrix fold(std::span<const double> values, const MatrixShape& shape,
                 Overflow overflow = Overflow::Error);
TraceMatrix fold(const SideChannelTrace& trace, const MatrixShape& shape,
                 Overflow overflow = Overflow::Error);

/// Record position held by a cell, or std::nullopt for padding. Throws
/// BoundsError when the index is outside the matrix.
std::optional<std::size_t> unfold_index(std::size_t flat, const MatrixShape& shape,
                                        std::size_t valid_len);
std::optional<std::size_t> unfold_index(const CellIndex& cell, const MatrixShape& shape,
                                        std::size_t valid_len);

struct NormStats {
  double min = 0.0;
  double max = 0.0;

  double apply(double v) const {
    if (max <= min) return 0.0;
    const double t = (v - min) / (max - min);
    return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  }
};

NormStats fit_norm(std::span<const SideChannelTrace> traces);
/// Min-max maps the valid cells; padding stays zero.
TraceMatrix apply_norm(TraceMatrix matrix, const NormStats& stats);
std::vector<double> normalize_records(const SideChannelTrace& trace, const NormStats& stats);

/// Concatenates the activity vectors in time order and folds the bit stream.
TraceMatrix encode_pp(std::span<const ActivityVector> vectors, const MatrixShape& shape,
                      Overflow overflow = Overflow::Error);
std::vector<double> flatten_pp(std::span<const ActivityVector> vectors);

/// Header `K N valid_len`, then K*N*N whitespace separated decimals.
void write_trace_matrix(std::ostream& out, const TraceMatrix& m);
TraceMatrix read_trace_matrix(std::istream& in);

}  // namespace msca
