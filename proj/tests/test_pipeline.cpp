#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "msca/errors.hpp"
#include "msca/seeding.hpp"
#include "msca/pipeline.hpp"

using namespace msca;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("msca_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(DatasetDir, RoundTrip) {
  for (auto v : {VictimId::Lookup, VictimId::HashCheck}) {
    DatasetManifest m{v, 6, 2, 11, 8, 6};
    const auto ds = gen_dataset(m);
    const auto dir = scratch(v == VictimId::Lookup ? "ds_lookup" : "ds_hash");
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    ASSERT_EQ(back.samples.size(), ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      EXPECT_EQ(back.samples[i].trace.records, ds.samples[i].trace.records);
      EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
      if (v == VictimId::HashCheck) {
        EXPECT_EQ(std::get<TokenSequence>(back.samples[i].input), std::get<TokenSequence>(ds.samples[i].input));
      } else {
        EXPECT_LT((std::get<ContinuousMedia>(back.samples[i].input).values -
                   std::get<ContinuousMedia>(ds.samples[i].input).values).cwiseAbs().maxCoeff(),
                  1e-12);
      }
    }
    fs::remove(dir / "traces" / "00003.trace");
    EXPECT_THROW(load_dataset(dir), DataError);
    fs::remove_all(dir);
  }
}

TEST(EncodingHeader, RoundTrip) {
  TraceEncoding enc;
  enc.form = TraceForm::PrimeProbe;
  enc.cache = CacheConfig{32, 4, 64};
  enc.epoch_len = 9;
  enc.repeats = 2;
  enc.shape = {2, 32};
  enc.overflow = Overflow::Truncate;
  const NormStats norm{0.25, 7.5};
  std::map<std::string, std::string> h;
  encoding_to_header(enc, norm, h);
  const auto [e2, n2] = encoding_from_header(h);
  EXPECT_EQ(e2.form, enc.form);
  EXPECT_EQ(e2.cache.num_sets, 32u);
  EXPECT_EQ(e2.epoch_len, 9u);
  EXPECT_EQ(e2.repeats, 2u);
  EXPECT_EQ(e2.shape.channels, 2u);
  EXPECT_EQ(e2.shape.side, 32u);
  EXPECT_EQ(e2.overflow, Overflow::Truncate);
  EXPECT_EQ(n2.min, 0.25);
  EXPECT_EQ(n2.max, 7.5);
}

TEST(Pgm, HeaderAndClamp) {
  ContinuousMedia img{Eigen::MatrixXd(1, 3)};
  img.values << -1.0, 0.5, 2.0;
  std::ostringstream out;
  write_pgm(out, img);
  const std::string expect = std::string("P5\n3 1\n255\n") + char(0) + char(128) + char(255);
  EXPECT_EQ(out.str(), expect);
}

TEST(Encode, ScalarTraceIsNormalizedAndFolded) {
  DatasetManifest m{VictimId::Lookup, 4, 1, 3, 4, 4};
  const auto ds = gen_dataset(m);
  TraceEncoding enc;
  enc.shape = {1, 16};
  enc.overflow = Overflow::Truncate;
  const auto norm = fit_encoding_norm(ds.train(), enc);
  EXPECT_LT(norm.min, norm.max);
  const auto ex = make_examples(ds.train(), enc, norm);
  ASSERT_EQ(ex.size(), 4u);
  for (const auto& e : ex) {
    EXPECT_GE(e.matrix.values.minCoeff(), 0.0);
    EXPECT_LE(e.matrix.values.maxCoeff(), 1.0);
  }
}

TEST(NoisyRefresh, DeterministicPerEpoch) {
  DatasetManifest m{VictimId::Lookup, 5, 1, 3, 4, 4};
  const auto ds = gen_dataset(m);
  TraceEncoding enc;
  enc.shape = {1, 16};
  enc.overflow = Overflow::Truncate;
  const auto norm = fit_encoding_norm(ds.train(), enc);
  const std::vector<NoiseScheme> schemes{NoiseScheme::parse("gaussian-low", 3), NoiseScheme::parse("removal-low", 3)};
  auto a = make_examples(ds.train(), enc, norm), b = a;
  noisy_refresh(ds.train(), enc, norm, schemes, true)(2, a);
  noisy_refresh(ds.train(), enc, norm, schemes, true)(2, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].matrix.values, b[i].matrix.values);
  auto c = make_examples(ds.train(), enc, norm);
  noisy_refresh(ds.train(), enc, norm, schemes, false)(3, c);
  bool changed = false;
  const auto clean = make_examples(ds.train(), enc, norm);
  for (std::size_t i = 0; i < c.size(); ++i) changed |= c[i].matrix.values != clean[i].matrix.values;
  EXPECT_TRUE(changed);
}

TEST(Mask, FamiliesDiffer) {
  const auto a = draw_mask(MaskFamily::Same, 7, 16), b = draw_mask(MaskFamily::Same, 7, 16);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(draw_mask(MaskFamily::Other, 7, 16).values, a.values);
  EXPECT_EQ(parse_mask_family("other-family"), MaskFamily::Other);
  EXPECT_THROW(parse_mask_family("nope"), ConfigError);
}
