#include "msca/cache_sim.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "msca/errors.hpp"

namespace msca {

void CacheConfig::validate() const {
  if (num_sets == 0 || ways == 0 || line_size == 0) {
    throw ConfigError("cache sets, ways and line size must be positive");
  }
  if (!std::has_single_bit(line_size)) {
    throw ConfigError("cache line size must be a power of two, got " + std::to_string(line_size));
  }
}

LruCache::LruCache(const CacheConfig& cfg) : cfg_(cfg), ways_(cfg.num_sets * cfg.ways) {
  cfg_.validate();
}

bool LruCache::access(std::size_t set, Owner owner, std::uint64_t tag) {
  const auto first = ways_.begin() + static_cast<std::ptrdiff_t>(set * cfg_.ways);
  const auto last = first + static_cast<std::ptrdiff_t>(cfg_.ways);
  ++clock_;
  for (auto it = first; it != last; ++it) {
    if (it->valid && it->owner == owner && it->tag == tag) {
      it->last_use = clock_;
      return true;
    }
  }
  // Invalid ways have last_use 0 and are chosen before any valid way.
  auto victim = std::min_element(first, last, [](const Way& a, const Way& b) {
    if (a.valid != b.valid) return !a.valid;
    return a.last_use < b.last_use;
  });
  *victim = Way{true, owner, tag, clock_};
  return false;
}

namespace {

void touch_all_spy_lines(LruCache& cache, ActivityVector* activity) {
  const auto& cfg = cache.config();
  for (std::size_t set = 0; set < cfg.num_sets; ++set) {
    for (std::size_t w = 0; w < cfg.ways; ++w) {
      const bool hit = cache.access(set, LruCache::Owner::Spy, w);
      if (!hit && activity) (*activity)[set] = 1;
    }
  }
}

}  // namespace

PPTrace simulate_prime_probe(const MemoryTrace& victim, const CacheConfig& cfg,
                             std::size_t epoch_len) {
  if (epoch_len == 0) throw ConfigError("epoch length must be at least 1");
  cfg.validate();
  PPTrace out{{}, cfg, 1};
  LruCache cache(cfg);
  const auto& recs = victim.records;
  for (std::size_t begin = 0; begin < recs.size(); begin += epoch_len) {
    touch_all_spy_lines(cache, nullptr);
    const auto end = std::min(recs.size(), begin + epoch_len);
    for (auto i = begin; i < end; ++i) {
      const auto addr = recs[i].memory_address;
      cache.access(cfg.set_of(addr), LruCache::Owner::Victim, cfg.tag_of(addr));
    }
    ActivityVector v(cfg.num_sets, 0);
    touch_all_spy_lines(cache, &v);
    if (std::find(v.begin(), v.end(), 1) != v.end()) out.vectors.push_back(std::move(v));
  }
  return out;
}

PPTrace repeat_concat(const MemoryTrace& victim, const CacheConfig& cfg, std::size_t epoch_len,
                      std::size_t repeats) {
  if (repeats == 0) throw ConfigError("repeat count must be at least 1");
  PPTrace out{{}, cfg, repeats};
  for (std::size_t r = 0; r < repeats; ++r) {
    auto run = simulate_prime_probe(victim, cfg, epoch_len);
    out.vectors.insert(out.vectors.end(), std::make_move_iterator(run.vectors.begin()),
                       std::make_move_iterator(run.vectors.end()));
  }
  return out;
}

void write_pp_trace(std::ostream& out, const PPTrace& trace) {
  out << trace.config.num_sets << ' ' << trace.repeats << '\n';
  std::string line;
  for (const auto& v : trace.vectors) {
    line.assign(v.size(), '0');
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i]) line[i] = '1';
    }
    out << line << '\n';
  }
}

PPTrace read_pp_trace(std::istream& in) {
  PPTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing 'S t' header");
  {
    std::size_t sets = 0;
    std::size_t repeats = 0;
    if (std::sscanf(line.c_str(), "%zu %zu", &sets, &repeats) != 2 || sets == 0 || repeats == 0) {
      throw ParseError(1, "expected 'S t' header, got '" + line + "'");
    }
    trace.config.num_sets = sets;
    trace.repeats = repeats;
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.size() != trace.config.num_sets) {
      throw ParseError(line_no, "vector has " + std::to_string(line.size()) + " bits, expected " +
                                    std::to_string(trace.config.num_sets));
    }
    ActivityVector v(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] != '0' && line[i] != '1') throw ParseError(line_no, "expected only '0'/'1'");
      v[i] = line[i] == '1';
    }
    trace.vectors.push_back(std::move(v));
  }
  return trace;
}

}  // namespace msca
