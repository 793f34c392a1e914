#include <gtest/gtest.h>

#include <cmath>

#include "msca/defend.hpp"
#include "msca/errors.hpp"
#include "msca/seeding.hpp"

using namespace msca;

namespace {

TokenSequence framed(std::vector<std::uint32_t> words) {
  TokenSequence s{{Vocabulary::kSos}};
  s.tokens.insert(s.tokens.end(), words.begin(), words.end());
  s.tokens.push_back(Vocabulary::kEos);
  return s;
}

PPTrace random_pp(Rng& rng, std::size_t n, std::size_t sets) {
  PPTrace t{{}, CacheConfig{sets, 8, 64}, 1};
  for (std::size_t i = 0; i < n; ++i) {
    ActivityVector v(sets);
    for (auto& b : v) b = rng() % 3 == 0;
    t.vectors.push_back(v);
  }
  return t;
}

std::size_t ones(const PPTrace& t) {
  std::size_t n = 0;
  for (const auto& v : t.vectors) n += static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
  return n;
}

}  // namespace

TEST(BlindContinuous, ConvexCombination) {
  const ContinuousMedia i{Eigen::MatrixXd::Constant(2, 2, 0.5)}, mask{Eigen::MatrixXd::Constant(2, 2, 1.0)};
  const auto b = blind_continuous(i, mask, BlindConfig{0.1});
  EXPECT_NEAR(b.values(0, 0), 0.95, 1e-15);
  EXPECT_THROW(blind_continuous(i, mask, BlindConfig{1.0}), ConfigError);
  EXPECT_EQ(blind_continuous(i, i, BlindConfig{0.3}).values, i.values);
  const ContinuousMedia wrong{Eigen::MatrixXd::Zero(3, 2)};
  EXPECT_THROW(blind_continuous(i, wrong, BlindConfig{0.1}), ShapeError);
}

TEST(UnblindOutput, HandArithmetic) {
  // P(x) = 2x, i = 0.5, mask = 1.0, alpha = 0.1
  const Eigen::MatrixXd pb = Eigen::MatrixXd::Constant(1, 1, 2.0 * 0.95);
  const Eigen::MatrixXd pm = Eigen::MatrixXd::Constant(1, 1, 2.0);
  EXPECT_NEAR(pb(0, 0), 1.9, 1e-15);
  EXPECT_NEAR(unblind_output(pb, pm, 0.1)(0, 0), 1.0, 1e-12);
  EXPECT_THROW(unblind_output(pb, pm, 0.0), ConfigError);
  for (double a : {0.05, 0.2, 0.5}) EXPECT_NEAR(unblind_output(pm, pm, a)(0, 0), 2.0, 1e-12);
}

TEST(BlindText, InsertsNMasksPerWord) {
  BlindConfig cfg{0.3};
  EXPECT_EQ(cfg.copies(), 2u);
  const auto m = Vocabulary::kMask;
  const auto s = framed({5, 6});
  EXPECT_EQ(blind_text(s, cfg), framed({5, m, m, 6, m, m}));
  EXPECT_EQ(BlindConfig{0.05}.copies(), 19u);
  EXPECT_EQ(BlindConfig{0.1}.copies(), 9u);
  EXPECT_THROW(BlindConfig{0.6}.validate(), ConfigError);
  EXPECT_THROW(BlindConfig{0.0}.validate(), ConfigError);
}

TEST(BlindText, UnblindInvertsAndChecksFraming) {
  Rng rng(1);
  for (double a : {0.05, 0.1, 0.3, 0.5}) {
    const BlindConfig cfg{a};
    for (int i = 0; i < 30; ++i) {
      const auto s = sample_sentence(rng, 12);
      EXPECT_EQ(unblind_text(blind_text(s, cfg), cfg), s);
    }
  }
  EXPECT_THROW(blind_text(TokenSequence{{5, 6}}, BlindConfig{0.1}), DataError);
  BlindConfig bad{0.1};
  bad.mask_word = Vocabulary::kEos;
  EXPECT_THROW(blind_text(framed({5}), bad), ConfigError);
}

TEST(Noise, GaussianFormula) {
  EXPECT_DOUBLE_EQ(gaussian_mix(1.0, 0.5, 0.2), 0.9);
  const std::vector<double> d(50, 0.5);
  const auto s = NoiseScheme::parse("gaussian-low", 4);
  EXPECT_EQ(s.param, 0.2);
  const auto a = apply_noise(d, s), b = apply_noise(d, s);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), d.size());
  EXPECT_NE(a, d);
}

TEST(Noise, RoundShiftRotates) {
  const std::vector<double> d{1, 2, 3, 4};
  EXPECT_EQ(apply_noise(d, NoiseScheme::parse("shift:1")), (std::vector<double>{4, 1, 2, 3}));
  EXPECT_EQ(apply_noise(d, NoiseScheme::parse("roundshift:5")), (std::vector<double>{4, 1, 2, 3}));
  EXPECT_EQ(NoiseScheme::parse("shift-high").param, 100);
}

TEST(Noise, RemovalShortensByRoundedShare) {
  std::vector<double> d(37);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(i);
  const auto r = apply_noise(d, NoiseScheme::parse("removal-low", 2));
  EXPECT_EQ(r.size(), 37u - 7u);  // round(0.2 * 37) = 7
  EXPECT_TRUE(std::is_sorted(r.begin(), r.end()));
  const auto h = apply_noise(d, NoiseScheme::parse("removal-high", 2));
  EXPECT_EQ(h.size(), 37u - 19u);  // round(18.5) = 19
}

TEST(Noise, FalseHitMissFlipsExactlyAndIsInvolution) {
  Rng rng(3);
  const auto t = random_pp(rng, 10, 16);
  const auto s = NoiseScheme::parse("falsehitmiss-low", 9);
  const auto once = apply_noise(t, s);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < t.vectors.size(); ++i)
    for (std::size_t j = 0; j < 16; ++j) flips += once.vectors[i][j] != t.vectors[i][j];
  EXPECT_EQ(flips, 32u);  // round(0.2 * 160)
  EXPECT_EQ(apply_noise(once, s).vectors, t.vectors);
}

TEST(Noise, LeaveOutAndWrongOrderPreserveLength) {
  Rng rng(4);
  const auto t = random_pp(rng, 20, 16);
  const auto lo = apply_noise(t, NoiseScheme::parse("leaveout-low", 1));
  ASSERT_EQ(lo.vectors.size(), t.vectors.size());
  EXPECT_EQ(ones(lo), ones(t) - static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(ones(t)))));

  const auto wo = apply_noise(t, NoiseScheme::parse("wrongorder-low", 1));
  ASSERT_EQ(wo.vectors.size(), t.vectors.size());
  EXPECT_EQ(ones(wo), ones(t));
  EXPECT_THROW(apply_noise(t, NoiseScheme::parse("wrongorder:1000", 1)), ConfigError);
}

TEST(Noise, ModalityMismatchAndPresets) {
  Rng rng(5);
  const auto t = random_pp(rng, 3, 4);
  const std::vector<double> d{0.1, 0.2};
  EXPECT_THROW(apply_noise(t, NoiseScheme::parse("gaussian-low")), ConfigError);
  EXPECT_THROW(apply_noise(d, NoiseScheme::parse("leaveout-low")), ConfigError);
  EXPECT_THROW(NoiseScheme::parse("gaussian-medium"), ConfigError);
  EXPECT_EQ(NoiseScheme::preset_names().size(), 12u);
  for (const auto& name : NoiseScheme::preset_names()) EXPECT_EQ(NoiseScheme::parse(name).name(), name);
}
