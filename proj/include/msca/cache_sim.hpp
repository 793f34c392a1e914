#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "msca/trace_model.hpp"

namespace msca {

struct CacheConfig {
  std::size_t num_sets = 64;
  std::size_t ways = 8;
  std::size_t line_size = 64;

  /// Throws ConfigError unless every field is positive and line_size is a
  /// power of two.
  void validate() const;

  std::size_t set_of(std::uint64_t address) const {
    return static_cast<std::size_t>((address / line_size) % num_sets);
  }
  std::uint64_t tag_of(std::uint64_t address) const {
    return address / line_size / num_sets;
  }

  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

/// One bit per cache set; bit i set when the spy saw its line in set i evicted.
using ActivityVector = std::vector<std::uint8_t>;

struct PPTrace {
  std::vector<ActivityVector> vectors;
  CacheConfig config;
  std::size_t repeats = 1;

  std::size_t num_bits() const { return vectors.size() * config.num_sets; }
};

/// Set-associative cache with true LRU replacement. Lines are identified by
/// (owner, tag) so spy lines never alias victim lines.
class LruCache {
 public:
  enum class Owner : std::uint8_t { Spy, Victim };

  explicit LruCache(const CacheConfig& cfg);

  /// Touches a line; returns true on hit. On a miss the LRU way is replaced.
  bool access(std::size_t set, Owner owner, std::uint64_t tag);

  const CacheConfig& config() const { return cfg_; }

 private:
  struct Way {
    bool valid = false;
    Owner owner = Owner::Spy;
    std::uint64_t tag = 0;
    std::uint64_t last_use = 0;
  };

  CacheConfig cfg_;
  std::vector<Way> ways_;  // num_sets * ways, set-major
  std::uint64_t clock_ = 0;
};

/// Prime, let the victim run `epoch_len` accesses, probe; emit an activity
/// vector for every epoch in which at least one spy line was evicted.
PPTrace simulate_prime_probe(const MemoryTrace& victim, const CacheConfig& cfg,
                             std::size_t epoch_len);

/// Runs `repeats` independent simulations (fresh cache each time) and
/// concatenates their vectors in run order.
PPTrace repeat_concat(const MemoryTrace& victim, const CacheConfig& cfg,
                      std::size_t epoch_len, std::size_t repeats);

/// Brute-force model with explicit per-set recency lists. Same contract as
/// simulate_prime_probe; kept deliberately naive for equivalence testing.
PPTrace reference_prime_probe(const MemoryTrace& victim, const CacheConfig& cfg,
                              std::size_t epoch_len);

/// Header `S t`, then one line of S '0'/'1' characters per vector.
void write_pp_trace(std::ostream& out, const PPTrace& trace);
PPTrace read_pp_trace(std::istream& in);

}  // namespace msca
