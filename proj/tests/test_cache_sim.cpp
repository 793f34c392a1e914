#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "msca/cache_sim.hpp"
#include "msca/errors.hpp"
#include "msca/seeding.hpp"

using namespace msca;

namespace {

MemoryTrace random_victim(Rng& rng, std::size_t len, std::uint64_t span) {
  MemoryTrace t;
  for (std::size_t i = 0; i < len; ++i) t.records.push_back({0x400000 + i, rng() % span});
  return t;
}

}  // namespace

TEST(PrimeProbe, SingleAccessEvictsOneSet) {
  const CacheConfig cfg{64, 8, 64};
  const MemoryTrace t{{{0x400000, 3 * 64}}, ""};
  for (const auto& pp : {simulate_prime_probe(t, cfg, 1), reference_prime_probe(t, cfg, 1)}) {
    ASSERT_EQ(pp.vectors.size(), 1u);
    for (std::size_t s = 0; s < 64; ++s) EXPECT_EQ(pp.vectors[0][s], s == 3 ? 1 : 0);
  }
}

TEST(PrimeProbe, EmptyVictimAndQuietEpochs) {
  const CacheConfig cfg{4, 2, 64};
  EXPECT_TRUE(simulate_prime_probe(MemoryTrace{}, cfg, 4).vectors.empty());
  EXPECT_TRUE(reference_prime_probe(MemoryTrace{}, cfg, 4).vectors.empty());
  EXPECT_THROW(simulate_prime_probe(MemoryTrace{}, cfg, 0), ConfigError);
}

// Repeated accesses to one line: every epoch starts fully primed, so each
// epoch sees its own eviction. The oracle agrees either way.
TEST(PrimeProbe, RepeatedLineMatchesOracle) {
  const CacheConfig cfg{4, 2, 64};
  MemoryTrace t;
  for (int i = 0; i < 12; ++i) t.records.push_back({0x400000, 0x1040});
  for (std::size_t epoch : {1u, 3u, 5u}) {
    const auto a = simulate_prime_probe(t, cfg, epoch);
    const auto b = reference_prime_probe(t, cfg, epoch);
    EXPECT_EQ(a.vectors, b.vectors);
  }
}

TEST(PrimeProbe, OracleEquivalenceOnRandomVictims) {
  Rng rng(99);
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t sets = iter % 2 ? 64 : 4;
    const std::size_t ways = std::array<std::size_t, 3>{1, 2, 8}[iter % 3];
    const CacheConfig cfg{sets, ways, 64};
    const auto t = random_victim(rng, 1 + rng() % 120, 64 * sets * (1 + rng() % 16));
    const std::size_t epoch = 1 + rng() % 10;
    const auto a = simulate_prime_probe(t, cfg, epoch);
    const auto b = reference_prime_probe(t, cfg, epoch);
    ASSERT_EQ(a.vectors, b.vectors) << "iteration " << iter;
    for (const auto& v : a.vectors) {
      ASSERT_EQ(v.size(), sets);
      ASSERT_NE(std::count(v.begin(), v.end(), 1), 0);
    }
  }
}

TEST(PrimeProbe, DirectMappedAccessAlwaysFlagsItsSet) {
  Rng rng(4);
  const CacheConfig cfg{16, 1, 64};
  const auto t = random_victim(rng, 200, 1 << 20);
  const auto pp = simulate_prime_probe(t, cfg, 1);
  ASSERT_EQ(pp.vectors.size(), t.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    EXPECT_EQ(pp.vectors[i][cfg.set_of(t.records[i].memory_address)], 1);
  }
}

TEST(RepeatConcat, IdentityAndRepetition) {
  Rng rng(8);
  const CacheConfig cfg{64, 8, 64};
  const auto t = random_victim(rng, 300, 1 << 16);
  const auto one = simulate_prime_probe(t, cfg, 16);
  EXPECT_EQ(repeat_concat(t, cfg, 16, 1).vectors, one.vectors);
  const auto two = repeat_concat(t, cfg, 16, 2);
  ASSERT_EQ(two.vectors.size(), 2 * one.vectors.size());
  for (std::size_t i = 0; i < one.vectors.size(); ++i) {
    EXPECT_EQ(two.vectors[i], one.vectors[i]);
    EXPECT_EQ(two.vectors[i + one.vectors.size()], one.vectors[i]);
  }
  EXPECT_EQ(repeat_concat(t, cfg, 16, 4).repeats, 4u);
  EXPECT_THROW(repeat_concat(t, cfg, 16, 0), ConfigError);
}

TEST(CacheConfig, Validation) {
  EXPECT_THROW((CacheConfig{64, 8, 48}.validate()), ConfigError);
  EXPECT_THROW((CacheConfig{0, 8, 64}.validate()), ConfigError);
  EXPECT_NO_THROW((CacheConfig{}.validate()));
}

TEST(PPTraceFile, RoundTrip) {
  PPTrace t{{{1, 0, 1, 1}, {0, 0, 0, 1}}, CacheConfig{4, 2, 64}, 3};
  std::stringstream io;
  write_pp_trace(io, t);
  EXPECT_EQ(io.str(), "4 3\n1011\n0001\n");
  const auto back = read_pp_trace(io);
  EXPECT_EQ(back.vectors, t.vectors);
  EXPECT_EQ(back.repeats, 3u);
}
