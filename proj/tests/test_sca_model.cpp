#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "msca/errors.hpp"
#include "msca/seeding.hpp"
#include "msca/neural/grad_check.hpp"
#include "msca/sca_model.hpp"

using namespace msca;
using neural::Tensor;

namespace {

ModelSpec tiny_spec() {
  ModelSpec s;
  s.encoder.input = {1, 8};
  s.encoder.conv_channels = {2, 2};
  s.encoder.latent_dim = 4;
  s.image_side = 8;
  s.decoder_channels = 2;
  s.decoder_base = 4;
  s.disc_channels = 2;
  s.privacy_classes = 3;
  return s;
}

ModelSpec tiny_text_spec() {
  auto s = tiny_spec();
  s.modality = Modality::Sequence;
  s.vocab_size = 8;
  s.embed_dim = 3;
  s.hidden_dim = 5;
  s.max_words = 4;
  return s;
}

TraceMatrix random_matrix(Rng& rng, MatrixShape shape = {1, 8}) {
  std::vector<double> v(shape.capacity() - 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& x : v) x = u(rng);
  return fold(v, shape);
}

ContinuousMedia random_image(Rng& rng, Eigen::Index side = 8) {
  return {((Eigen::MatrixXd::Random(side, side).array() + 1.0) / 2.0).matrix()};
}

std::vector<Tensor*> pointers(std::vector<neural::NamedTensor>& named) {
  std::vector<Tensor*> out;
  for (auto& n : named) out.push_back(n.tensor);
  return out;
}

// Zero biases leave exact zeros in front of ReLUs (padding cells), where
// finite differences straddle the kink.
void randomize(std::vector<neural::NamedTensor>& named, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto& n : named)
    for (Eigen::Index i = 0; i < n.tensor->size(); ++i) (*n.tensor)[i] = normal(rng);
}

std::vector<Tensor> copies(const std::vector<Tensor*>& ptrs) {
  std::vector<Tensor> out;
  for (auto* p : ptrs) out.push_back(*p);
  return out;
}

}  // namespace

TEST(Encode, ZeroMatrixGivesFinalBias) {
  AttackModel m(tiny_spec());
  m.init(3);
  auto& last = m.encoder().params().back();
  ASSERT_EQ(last.size(), 2u);
  for (Eigen::Index i = 0; i < last[1].size(); ++i) last[1][i] = 0.25 * static_cast<double>(i + 1);
  const auto z = m.encode(fold(std::vector<double>{}, {1, 8}));
  EXPECT_EQ(z, last[1].data());
}

TEST(Encode, DeterministicAndShapeChecked) {
  Rng rng(1);
  AttackModel m(tiny_spec());
  m.init(3);
  const auto x = random_matrix(rng);
  EXPECT_EQ(m.encode(x), m.encode(x));
  EXPECT_THROW(m.encode(random_matrix(rng, {1, 4})), ShapeError);
}

TEST(DecodeContinuous, OutputsInOpenUnitInterval) {
  AttackModel m(tiny_spec());
  m.init(4);
  for (double scale : {0.0, 1.0, 30.0}) {
    const auto img = m.decode_continuous(Eigen::VectorXd::Constant(4, scale)).values;
    EXPECT_EQ(img.rows(), 8);
    EXPECT_GT(img.minCoeff(), 0.0);
    EXPECT_LT(img.maxCoeff(), 1.0);
  }
  const Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(4, -1, 1);
  EXPECT_EQ(m.decode_continuous(z).values, m.decode_continuous(z).values);
}

TEST(DecodeSequence, EosFavouredGivesEmptySentence) {
  AttackModel m(tiny_text_spec());
  m.init(5);
  auto& out = m.sequence_decoder().out_projection().params()[0];
  out[0].data().setZero();
  out[1].data().setZero();
  out[1][Vocabulary::kEos] = 10.0;
  const auto s = m.decode_sequence(Eigen::VectorXd::Ones(4), 4);
  EXPECT_EQ(s.tokens, (std::vector<std::uint32_t>{Vocabulary::kSos, Vocabulary::kEos}));
}

TEST(DecodeSequence, NeverEmitsSosAndTerminates) {
  AttackModel m(tiny_text_spec());
  m.init(6);
  auto& out = m.sequence_decoder().out_projection().params()[0];
  out[0].data().setZero();
  out[1].data().setZero();
  out[1][Vocabulary::kSos] = 10.0;  // masked out; then ties resolve to the lowest id
  const auto s = m.decode_sequence(Eigen::VectorXd::Ones(4), 3);
  ASSERT_EQ(s.tokens.size(), 2u);  // EOS (id 1) wins the tie among zeros
  EXPECT_EQ(s.tokens.back(), Vocabulary::kEos);

  out[1][Vocabulary::kEos] = -10.0;
  const auto t = m.decode_sequence(Eigen::VectorXd::Ones(4), 3);
  ASSERT_EQ(t.tokens.size(), 5u);
  for (std::size_t i = 1; i + 1 < t.tokens.size(); ++i) EXPECT_EQ(t.tokens[i], Vocabulary::kMask);
  EXPECT_EQ(m.decode_sequence(Eigen::VectorXd::Ones(4), 3), t);
}

TEST(Discriminate, ZeroWeightsScoreHalf) {
  AttackModel m(tiny_spec());
  m.init(7);
  for (auto* seq : {&m.disc_trunk(), &m.disc_realism(), &m.disc_privacy()})
    for (auto& layer : seq->params())
      for (auto& t : layer) t.data().setZero();
  Rng rng(2);
  const auto d = m.discriminate(random_image(rng));
  EXPECT_EQ(d.realism, 0.5);
  EXPECT_EQ(d.privacy_logits.size(), 3);
  EXPECT_THROW(m.discriminate(TokenSequence{{0, 1}}), ConfigError);
}

TEST(TotalLoss, ZeroExplicitAndLambdaZero) {
  Rng rng(3);
  const Eigen::VectorXd r = Eigen::VectorXd::Random(16);
  const Eigen::VectorXd logits = Eigen::VectorXd::Random(3);
  const auto same = total_loss(r, r, 0.3, logits, 1, LossWeights{});
  EXPECT_EQ(same.explicit_loss, 0.0);
  LossWeights w;
  w.lambda = 0.0;
  const auto t = total_loss(r, Eigen::VectorXd::Zero(16), 0.3, logits, 1, w);
  EXPECT_DOUBLE_EQ(t.total, t.implicit_loss + t.privacy_loss);
  EXPECT_GE(t.explicit_loss, 0.0);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (auto metric : {ExplicitMetric::Mse, ExplicitMetric::L1}) {
    LossWeights w;
    w.metric = metric;
    Tensor recon({12}, Eigen::VectorXd::Random(12)), ref({12}, Eigen::VectorXd::Random(12));
    Tensor logit({1}, Eigen::VectorXd::Constant(1, 0.4)), priv({4}, Eigen::VectorXd::Random(4));
    const auto t = total_loss(recon.data(), ref.data(), logit[0], priv.data(), 2, w);
    std::vector<Tensor*> vars{&recon, &logit, &priv};
    const std::vector<Tensor> analytic{Tensor({12}, t.grad_recon),
                                       Tensor({1}, Eigen::VectorXd::Constant(1, t.grad_realism_logit)),
                                       Tensor({4}, t.grad_privacy_logits)};
    const auto r = neural::grad_check(
        [&] { return total_loss(recon.data(), ref.data(), logit[0], priv.data(), 2, w).total; }, vars, analytic);
    EXPECT_LT(r.max_relative_error, 1e-4);
  }
}

TEST(TotalLoss, NanRaises) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(4);
  r[2] = std::nan("");
  EXPECT_THROW(total_loss(r, Eigen::VectorXd::Zero(4), 0.0, Eigen::VectorXd::Zero(2), 0, LossWeights{}),
               NumericError);
}

TEST(EndToEnd, GeneratorGradientMatchesFiniteDifferences) {
  Rng rng(5);
  AttackModel m(tiny_spec());
  m.init(8);
  const TrainExample ex{random_matrix(rng), random_image(rng), 1};
  LossWeights w;
  w.lambda = 2.0;
  {
    auto named = m.generator_parameters();
    randomize(named, rng);
  }
  auto grads = m.zero_grads();
  m.generator_objective(ex, w, &grads);
  auto named = m.generator_parameters();
  const auto analytic = copies(AttackModel::generator_grads(grads, Modality::Continuous));
  const auto r = neural::grad_check([&] { return m.generator_objective(ex, w, nullptr).total; },
                                    pointers(named), analytic);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EndToEnd, DiscriminatorGradientMatchesFiniteDifferences) {
  Rng rng(6);
  AttackModel m(tiny_spec());
  m.init(9);
  {
    auto named = m.discriminator_parameters();
    randomize(named, rng);
  }
  const MediaSample real = random_image(rng);
  const auto fake = random_image(rng);
  auto grads = m.zero_grads();
  m.discriminator_objective(real, fake, 2, &grads);
  auto named = m.discriminator_parameters();
  const auto analytic = copies(AttackModel::discriminator_grads(grads));
  const auto r = neural::grad_check([&] { return m.discriminator_objective(real, fake, 2, nullptr); },
                                    pointers(named), analytic);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(EndToEnd, SequenceGradientMatchesFiniteDifferences) {
  Rng rng(7);
  AttackModel m(tiny_text_spec());
  m.init(10);
  const TrainExample ex{random_matrix(rng), TokenSequence{{0, 4, 6, 3, 1}}, 0};
  {
    auto named = m.generator_parameters();
    randomize(named, rng);
  }
  auto grads = m.zero_grads();
  m.generator_objective(ex, LossWeights{}, &grads);
  auto named = m.generator_parameters();
  const auto analytic = copies(AttackModel::generator_grads(grads, Modality::Sequence));
  const auto r = neural::grad_check([&] { return m.generator_objective(ex, LossWeights{}, nullptr).total; },
                                    pointers(named), analytic);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Train, SingleSampleOverfitsAndDecreasesMonotonically) {
  Rng rng(8);
  // A smooth target: the tiny decoder builds 8x8 outputs from upsampled 4x4
  // maps and cannot express per-pixel noise.
  const std::vector<TrainExample> one{{random_matrix(rng), render_blob(sample_blob_factors(rng, 8), 8), 0}};
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.weights.implicit = 0.0;
  cfg.weights.privacy = 0.0;
  const auto slow = train(one, tiny_spec(), cfg);
  ASSERT_EQ(slow.history.size(), 50u);
  for (std::size_t i = 1; i < slow.history.size(); ++i) {
    EXPECT_LT(slow.history[i].explicit_loss, slow.history[i - 1].explicit_loss) << "step " << i;
  }

  cfg.epochs = 2000;
  cfg.learning_rate = 3e-3;
  const auto fast = train(one, tiny_spec(), cfg);
  const auto recon = std::get<ContinuousMedia>(fast.model.reconstruct(one[0].matrix));
  EXPECT_LT(sample_mse(recon, std::get<ContinuousMedia>(one[0].target)), 1e-3);
}

TEST(Train, FixedSeedIsBitReproducible) {
  Rng rng(9);
  std::vector<TrainExample> data;
  for (int i = 0; i < 6; ++i) data.push_back({random_matrix(rng), random_image(rng), i % 3});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 4;
  const auto a = train(data, tiny_spec(), cfg), b = train(data, tiny_spec(), cfg);
  ASSERT_EQ(a.history.size(), 3u);
  std::ostringstream ha, hb;
  write_history_csv(ha, a.history);
  write_history_csv(hb, b.history);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(ha.str().substr(0, ha.str().find('\n')), "epoch,L_explicit,L_implicit,L_privacy,D_loss");
}

TEST(Train, NanNamesEpochAndBatch) {
  Rng rng(10);
  auto bad = random_matrix(rng);
  bad.values[0] = std::nan("");
  const std::vector<TrainExample> data{{bad, random_image(rng), 0}};
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    train(data, tiny_spec(), cfg);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("(epoch 1, batch 1)"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ModelRoundTripReconstructsIdentically) {
  Rng rng(11);
  for (auto spec : {tiny_spec(), tiny_text_spec()}) {
    AttackModel m(spec);
    m.init(12);
    std::stringstream io;
    neural::save_checkpoint(io, m.to_checkpoint());
    const auto back = AttackModel::from_checkpoint(neural::load_checkpoint(io));
    const auto x = random_matrix(rng);
    EXPECT_EQ(back.encode(x), m.encode(x));
    const auto a = m.reconstruct(x), b = back.reconstruct(x);
    if (spec.modality == Modality::Continuous) {
      EXPECT_EQ(std::get<ContinuousMedia>(a).values, std::get<ContinuousMedia>(b).values);
    } else {
      EXPECT_EQ(std::get<TokenSequence>(a), std::get<TokenSequence>(b));
    }
  }
}

TEST(Evaluate, MetricsAndBaselines) {
  const TokenSequence ref{{0, 5, 6, 7, 1}}, hyp{{0, 5, 9, 7, 1}};
  EXPECT_DOUBLE_EQ(word_accuracy(ref, hyp), 2.0 / 3.0);
  const std::vector<MediaSample> r{ContinuousMedia{Eigen::MatrixXd::Constant(2, 2, 0.3)}};
  EXPECT_EQ(evaluate(r, r, Metric::Mse).mean, 0.0);
  EXPECT_THROW(parse_metric("bleu"), ConfigError);
  EXPECT_DOUBLE_EQ(random_word_baseline(Vocabulary::toy()), 1.0 / 32.0);
  const std::vector<int> labels{0, 1, 1, 2};
  EXPECT_DOUBLE_EQ(majority_class_baseline(labels, 3), 0.5);

  const std::vector<MediaSample> train{ContinuousMedia{Eigen::MatrixXd::Zero(2, 2)},
                                       ContinuousMedia{Eigen::MatrixXd::Ones(2, 2)}};
  const std::vector<MediaSample> test{ContinuousMedia{Eigen::MatrixXd::Ones(2, 2)}};
  EXPECT_DOUBLE_EQ(mean_image_baseline(train, test), 0.25);
}

TEST(ModelSpec, Validation) {
  auto s = tiny_spec();
  s.image_side = 12;
  EXPECT_THROW(s.validate(), ConfigError);
  auto t = tiny_text_spec();
  t.vocab_size = 2;
  EXPECT_THROW(t.validate(), ConfigError);
}
