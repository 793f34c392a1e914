#include "msca/localize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "msca/errors.hpp"

namespace msca {

RecordWeights attention_map(const AttackModel& model, const TraceMatrix& matrix) {
  const auto& layers = model.encoder().layers();
  std::size_t first = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<neural::SpatialAttention>(layers[i])) {
      first = i;
      break;
    }
  }
  if (first == layers.size()) throw ConfigError("model encoder has no spatial attention layer");

  const auto pass = model.encoder_pass(matrix);
  const auto& gate = neural::attention_weights(pass.caches[first]);
  const auto gh = static_cast<std::size_t>(gate.dim(0));
  const auto gw = static_cast<std::size_t>(gate.dim(1));
  const auto n = matrix.shape.side;

  RecordWeights out(matrix.valid_len);
  for (std::size_t pos = 0; pos < matrix.valid_len; ++pos) {
    const auto cell = pos % matrix.shape.plane();  // broadcast across channels
    const auto r = (cell / n) * gh / n;
    const auto c = (cell % n) * gw / n;
    out[pos] = gate[static_cast<Eigen::Index>(r * gw + c)];
  }
  return out;
}

std::vector<std::size_t> rank_records(std::span<const double> weights, std::size_t k) {
  std::vector<std::size_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
  if (k < idx.size()) idx.resize(k);
  return idx;
}

std::size_t default_topk(std::size_t valid_len) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.001 * static_cast<double>(valid_len))));
}

void LeakageAccumulator::add(std::span<const std::size_t> records, const MemoryTrace& trace, bool aligned) {
  if (!aligned) {
    throw ConfigError(
        "localization needs a side-channel trace aligned 1:1 with its memory trace; "
        "Prime+Probe traces are unsupported");
  }
  for (auto i : records) {
    if (i >= trace.records.size()) {
      throw BoundsError("flagged record " + std::to_string(i) + " is past the trace end (" +
                        std::to_string(trace.records.size()) + " records)");
    }
    const auto ip = trace.records[i].instruction_address;
    const auto fn = symbols_.lookup(ip);
    ++hits_[fn ? std::string(*fn) : std::string("<unknown>")][ip];
  }
  ++traces_;
}

LeakageReport LeakageAccumulator::report() const {
  LeakageReport r;
  r.traces = traces_;
  std::set<std::uint64_t> addrs;
  for (const auto& [fn, ips] : hits_) {
    LeakageRow row{fn, ips.size(), 0};
    for (const auto& [ip, count] : ips) {
      row.frequency += count;
      addrs.insert(ip);
    }
    r.rows.push_back(row);
  }
  std::stable_sort(r.rows.begin(), r.rows.end(),
                   [](const LeakageRow& a, const LeakageRow& b) { return a.frequency > b.frequency; });
  r.addresses.assign(addrs.begin(), addrs.end());
  return r;
}

LeakageReport map_to_instructions(std::span<const std::size_t> records, const MemoryTrace& trace,
                                  const SymbolMap& symbols, bool aligned) {
  LeakageAccumulator acc(symbols);
  acc.add(records, trace, aligned);
  return acc.report();
}

void write_leakage_csv(std::ostream& out, const LeakageReport& report) {
  out << "function,num_instructions,frequency\n";
  for (const auto& row : report.rows) out << row.function << ',' << row.num_instructions << ',' << row.frequency << '\n';
}

void write_address_list(std::ostream& out, const LeakageReport& report) {
  char buf[32];
  for (auto a : report.addresses) {
    std::snprintf(buf, sizeof(buf), "0x%llx\n", static_cast<unsigned long long>(a));
    out << buf;
  }
}

double flagged_precision(std::span<const std::size_t> flagged, const std::vector<bool>& truth) {
  if (flagged.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto i : flagged) {
    if (i >= truth.size()) throw BoundsError("flagged record outside ground truth");
    hits += truth[i];
  }
  return static_cast<double>(hits) / static_cast<double>(flagged.size());
}

}  // namespace msca
