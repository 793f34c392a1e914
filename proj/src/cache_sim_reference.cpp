#include <algorithm>
#include <list>
#include <utility>

#include "msca/cache_sim.hpp"
#include "msca/errors.hpp"

namespace msca {

namespace {

// A resident line: (is_spy, line number). Spy line numbers are 0..ways-1 per
// set; victim line numbers are full address / line_size values.
using Line = std::pair<bool, std::uint64_t>;

// Front = most recently used.
using RecencyList = std::list<Line>;

bool touch(RecencyList& set, const Line& line, std::size_t ways) {
  auto it = std::find(set.begin(), set.end(), line);
  if (it != set.end()) {
    set.erase(it);
    set.push_front(line);
    return true;
  }
  if (set.size() == ways) set.pop_back();
  set.push_front(line);
  return false;
}

}  // namespace

PPTrace reference_prime_probe(const MemoryTrace& victim, const CacheConfig& cfg,
                              std::size_t epoch_len) {
  if (epoch_len == 0) throw ConfigError("epoch length must be at least 1");
  cfg.validate();
  PPTrace out{{}, cfg, 1};
  std::vector<RecencyList> sets(cfg.num_sets);

  std::size_t next = 0;
  while (next < victim.records.size()) {
    // Prime.
    for (std::size_t s = 0; s < cfg.num_sets; ++s) {
      for (std::uint64_t w = 0; w < cfg.ways; ++w) touch(sets[s], {true, w}, cfg.ways);
    }
    // Victim epoch.
    for (std::size_t n = 0; n < epoch_len && next < victim.records.size(); ++n, ++next) {
      const auto line = victim.records[next].memory_address / cfg.line_size;
      touch(sets[line % cfg.num_sets], {false, line}, cfg.ways);
    }
    // Probe.
    ActivityVector v(cfg.num_sets, 0);
    bool any = false;
    for (std::size_t s = 0; s < cfg.num_sets; ++s) {
      for (std::uint64_t w = 0; w < cfg.ways; ++w) {
        if (!touch(sets[s], {true, w}, cfg.ways)) {
          v[s] = 1;
          any = true;
        }
      }
    }
    if (any) out.vectors.push_back(std::move(v));
  }
  return out;
}

}  // namespace msca
