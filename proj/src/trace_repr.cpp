#include "msca/trace_repr.hpp"

#include <algorithm>
#include <charconv>
#include <iostream>
#include <limits>
#include <string>

#include "msca/errors.hpp"

namespace msca {

namespace {

void check_shape(const MatrixShape& shape) {
  if (shape.channels == 0 || shape.side == 0) {
    throw ConfigError("matrix shape needs positive K and N");
  }
}

}  // namespace

TraceMatrix fold(std::span<const double> values, const MatrixShape& shape, Overflow overflow) {
  check_shape(shape);
  auto len = values.size();
  if (len > shape.capacity()) {
    const auto required = (len + shape.plane() - 1) / shape.plane();
    if (overflow == Overflow::Error) {
      throw CapacityError("trace of length " + std::to_string(len) + " does not fit " +
                              std::to_string(shape.channels) + "x" + std::to_string(shape.side) +
                              "x" + std::to_string(shape.side) + "; needs K >= " +
                              std::to_string(required),
                          required);
    }
    std::clog << "warning: truncating trace of length " << len << " to capacity "
              << shape.capacity() << '\n';
    len = shape.capacity();
  }
  TraceMatrix m{shape, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.capacity())), len};
  std::copy_n(values.begin(), len, m.values.data());
  return m;
}

TraceMatrix fold(const SideChannelTrace& trace, const MatrixShape& shape, Overflow overflow) {
  std::vector<double> values(trace.records.begin(), trace.records.end());
  return fold(values, shape, overflow);
}

std::optional<std::size_t> unfold_index(std::size_t flat, const MatrixShape& shape,
                                        std::size_t valid_len) {
  if (flat >= shape.capacity()) {
    throw BoundsError("cell index " + std::to_string(flat) + " outside capacity " +
                      std::to_string(shape.capacity()));
  }
  if (flat >= valid_len) return std::nullopt;
  return flat;
}

std::optional<std::size_t> unfold_index(const CellIndex& cell, const MatrixShape& shape,
                                        std::size_t valid_len) {
  if (cell.channel >= shape.channels || cell.row >= shape.side || cell.col >= shape.side) {
    throw BoundsError("cell (" + std::to_string(cell.channel) + "," + std::to_string(cell.row) +
                      "," + std::to_string(cell.col) + ") outside shape");
  }
  return unfold_index(cell.channel * shape.plane() + cell.row * shape.side + cell.col, shape,
                      valid_len);
}

NormStats fit_norm(std::span<const SideChannelTrace> traces) {
  NormStats stats{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  bool any = false;
  for (const auto& t : traces) {
    for (auto r : t.records) {
      const auto v = static_cast<double>(r);
      stats.min = std::min(stats.min, v);
      stats.max = std::max(stats.max, v);
      any = true;
    }
  }
  if (!any) throw DataError("cannot fit normalization on an empty trace set");
  return stats;
}

TraceMatrix apply_norm(TraceMatrix matrix, const NormStats& stats) {
  for (std::size_t i = 0; i < matrix.valid_len; ++i) {
    auto& v = matrix.values[static_cast<Eigen::Index>(i)];
    v = stats.apply(v);
  }
  return matrix;
}

std::vector<double> normalize_records(const SideChannelTrace& trace, const NormStats& stats) {
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (auto r : trace.records) out.push_back(stats.apply(static_cast<double>(r)));
  return out;
}

std::vector<double> flatten_pp(std::span<const ActivityVector> vectors) {
  std::vector<double> flat;
  if (vectors.empty()) return flat;
  const auto width = vectors.front().size();
  flat.reserve(width * vectors.size());
  for (const auto& v : vectors) {
    if (v.size() != width) {
      throw ShapeError("activity vectors have mixed lengths (" + std::to_string(width) + " and " +
                       std::to_string(v.size()) + ")");
    }
    for (auto bit : v) flat.push_back(bit ? 1.0 : 0.0);
  }
  return flat;
}

TraceMatrix encode_pp(std::span<const ActivityVector> vectors, const MatrixShape& shape,
                      Overflow overflow) {
  return fold(flatten_pp(vectors), shape, overflow);
}

void write_trace_matrix(std::ostream& out, const TraceMatrix& m) {
  out << m.shape.channels << ' ' << m.shape.side << ' ' << m.valid_len << '\n';
  char buf[64];
  const auto side = static_cast<Eigen::Index>(m.shape.side);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) {
    auto res = std::to_chars(buf, buf + sizeof(buf), m.values[i]);
    out.write(buf, res.ptr - buf);
    out.put((i + 1) % side == 0 ? '\n' : ' ');
  }
}

TraceMatrix read_trace_matrix(std::istream& in) {
  TraceMatrix m;
  if (!(in >> m.shape.channels >> m.shape.side >> m.valid_len)) {
    throw ParseError(1, "expected 'K N valid_len' header");
  }
  check_shape(m.shape);
  if (m.valid_len > m.shape.capacity()) throw DataError("valid_len exceeds matrix capacity");
  m.values.resize(static_cast<Eigen::Index>(m.shape.capacity()));
  for (Eigen::Index i = 0; i < m.values.size(); ++i) {
    if (!(in >> m.values[i])) {
      throw DataError("trace matrix truncated after " + std::to_string(i) + " values");
    }
  }
  return m;
}

}  // namespace msca
