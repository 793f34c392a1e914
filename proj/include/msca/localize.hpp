#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msca/sca_model.hpp"
#include "msca/trace_model.hpp"
#include "msca/trace_repr.hpp"
#include "msca/victim_corpus.hpp"

namespace msca {

/// One nonnegative weight per trace record (padding excluded).
using RecordWeights = std::vector<double>;

/// Reads the earliest spatial attention map, nearest-upsampled to N x N and
/// broadcast over channels, at flat positions 0..valid_len-1. Throws
/// ConfigError when the encoder has no attention layer.
RecordWeights attention_map(const AttackModel& model, const TraceMatrix& matrix);

/// Indices of the k largest weights; ties go to the lower index.
std::vector<std::size_t> rank_records(std::span<const double> weights, std::size_t k);

/// max(1, round(0.001 * valid_len)).
std::size_t default_topk(std::size_t valid_len);

struct LeakageRow {
  std::string function;
  std::size_t num_instructions = 0;  // distinct flagged instruction addresses
  std::size_t frequency = 0;         // flagged points in total
};

struct LeakageReport {
  std::vector<LeakageRow> rows;            // sorted by frequency, then name
  std::vector<std::uint64_t> addresses;    // distinct flagged instruction addresses, ascending
  std::size_t traces = 0;
};

/// Aggregates flagged records of many traces. Records must come from a side
/// channel aligned 1:1 with the memory trace.
class LeakageAccumulator {
 public:
  explicit LeakageAccumulator(SymbolMap symbols) : symbols_(std::move(symbols)) {}

  /// Throws ConfigError for non-aligned (Prime+Probe) traces and
  /// BoundsError for indices past the trace.
  void add(std::span<const std::size_t> records, const MemoryTrace& trace, bool aligned = true);
  LeakageReport report() const;

 private:
  SymbolMap symbols_;
  std::map<std::string, std::map<std::uint64_t, std::size_t>> hits_;
  std::size_t traces_ = 0;
};

LeakageReport map_to_instructions(std::span<const std::size_t> records, const MemoryTrace& trace,
                                  const SymbolMap& symbols, bool aligned = true);

/// CSV header: function,num_instructions,frequency
void write_leakage_csv(std::ostream& out, const LeakageReport& report);
/// One 0x-prefixed hex address per line.
void write_address_list(std::ostream& out, const LeakageReport& report);

/// Fraction of `flagged` whose ground-truth entry is true.
double flagged_precision(std::span<const std::size_t> flagged, const std::vector<bool>& truth);

}  // namespace msca
