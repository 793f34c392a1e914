#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "msca/neural/adam.hpp"
#include "msca/neural/checkpoint.hpp"
#include "msca/neural/recurrent.hpp"
#include "msca/neural/sequential.hpp"
#include "msca/trace_repr.hpp"
#include "msca/victim_corpus.hpp"

namespace msca {

using LatentVector = Eigen::VectorXd;

enum class Modality { Continuous, Sequence };

/// Trace encoder: Conv2D(k, stride 1, same padding) + ReLU per entry of
/// conv_channels, a channel-then-spatial attention pair within every two conv
/// layers (after the first of the pair when attention_slot is 0, after the
/// second when 1), then a fully connected projection to the latent space.
struct EncoderSpec {
  MatrixShape input{1, 64};
  std::vector<Eigen::Index> conv_channels{4, 4};
  Eigen::Index kernel = 3;
  Eigen::Index attention_reduction = 4;
  Eigen::Index attention_kernel = 7;
  Eigen::Index latent_dim = 128;
  std::size_t attention_slot = 1;
};

struct ModelSpec {
  Modality modality = Modality::Continuous;
  EncoderSpec encoder;

  // Continuous decoder: FC -> channels x base x base, then (upsample x2,
  // conv, ReLU) until image_side, then conv to one channel + sigmoid.
  std::size_t image_side = 16;
  Eigen::Index decoder_channels = 8;
  std::size_t decoder_base = 4;

  // Discriminator: two stride-2 convs, then realism and privacy heads.
  Eigen::Index disc_channels = 8;
  std::size_t privacy_classes = 4;

  // Sequence decoder.
  std::size_t vocab_size = 0;
  Eigen::Index embed_dim = 16;
  Eigen::Index hidden_dim = 64;
  std::size_t max_words = 12;

  void validate() const;
};

enum class ExplicitMetric { Mse, L1 };

struct LossWeights {
  double lambda = 50.0;   // explicit (point-wise) term
  double implicit = 1.0;  // adversarial term
  double privacy = 1.0;   // privacy-head cross entropy
  ExplicitMetric metric = ExplicitMetric::Mse;
};

struct TrainExample {
  TraceMatrix matrix;
  MediaSample target;
  int label = 0;
};

struct TrainConfig {
  double learning_rate = 0.0002;
  std::size_t batch = 64;
  std::size_t epochs = 10;
  LossWeights weights;
  std::uint64_t seed = 1;
  // Discriminator steps per encoder/decoder step.
  std::size_t d_steps = 1;
  // Optional: called before every epoch (0-based) to redraw the training
  // examples in place, e.g. fresh noise per epoch. Count must not change.
  std::function<void(std::size_t epoch, std::vector<TrainExample>& examples)> refresh;
};

struct EpochStats {
  std::size_t epoch = 0;
  double explicit_loss = 0.0;  // sequence models: token cross entropy
  double implicit_loss = 0.0;
  double privacy_loss = 0.0;
  double d_loss = 0.0;
};

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history);

/// The composite objective on one reconstruction, with its gradients
/// w.r.t. the reconstruction and the discriminator outputs.
struct TotalLoss {
  double explicit_loss = 0.0;
  double implicit_loss = 0.0;
  double privacy_loss = 0.0;
  double total = 0.0;
  Eigen::VectorXd grad_recon;          // from the explicit term only
  double grad_realism_logit = 0.0;
  Eigen::VectorXd grad_privacy_logits;
};

/// lambda * explicit(recon, ref) + implicit * -log sigmoid(realism_logit)
/// + privacy * CE(privacy_logits, label). Throws NumericError on NaN.
TotalLoss total_loss(const Eigen::VectorXd& recon, const Eigen::VectorXd& ref,
                     double realism_logit, const Eigen::VectorXd& privacy_logits, int label,
                     const LossWeights& w);

/// Embedding + gated recurrent cell + vocabulary projection, conditioned on
/// the latent vector at every step.
class SequenceDecoder {
 public:
  SequenceDecoder() = default;
  SequenceDecoder(Eigen::Index latent, std::size_t vocab, Eigen::Index embed, Eigen::Index hidden);

  void init(Rng& rng);

  struct Grads {
    neural::LayerParams init;
    neural::Tensor embedding;
    std::vector<neural::Tensor> gru;
    neural::LayerParams out;
  };
  Grads zero_grads() const;

  /// Mean token cross entropy under teacher forcing over targets
  /// tokens[1..]; accumulates gradients and returns d loss / d z.
  double teacher_forced_loss(const LatentVector& z, const TokenSequence& target, Grads* grads,
                             LatentVector* grad_z) const;

  /// Greedy argmax decoding from SOS; SOS is never emitted, ties go to the
  /// lowest token id, stops at EOS or after max_words words.
  TokenSequence greedy(const LatentVector& z, std::size_t max_words) const;

  void collect(const std::string& prefix, std::vector<neural::NamedTensor>& out);
  static void collect_grads(Grads& g, std::vector<neural::Tensor*>& out);

  neural::Sequential& out_projection() { return out_; }

 private:
  Eigen::VectorXd step_input(std::uint32_t token, const LatentVector& z) const;

  Eigen::Index latent_ = 0;
  std::size_t vocab_ = 0;
  neural::Sequential init_;  // FC(latent -> hidden), Tanh
  neural::Tensor embedding_;  // [vocab, embed]
  neural::GruCell cell_;
  std::vector<neural::Tensor> gru_;
  neural::Sequential out_;  // FC(hidden -> vocab)
};

/// Encoder, decoders and discriminator of the attack.
class AttackModel {
 public:
  AttackModel() = default;
  explicit AttackModel(ModelSpec spec);

  void init(std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  neural::Sequential& encoder() { return encoder_; }
  const neural::Sequential& encoder() const { return encoder_; }
  neural::Sequential& decoder() { return decoder_; }
  SequenceDecoder& sequence_decoder() { return seq_decoder_; }
  neural::Sequential& disc_trunk() { return d_trunk_; }
  neural::Sequential& disc_realism() { return d_real_; }
  neural::Sequential& disc_privacy() { return d_priv_; }

  static neural::Tensor as_input(const TraceMatrix& m);

  /// Throws ShapeError when the matrix shape differs from the encoder input.
  LatentVector encode(const TraceMatrix& matrix) const;
  neural::Sequential::Pass encoder_pass(const TraceMatrix& matrix) const;

  ContinuousMedia decode_continuous(const LatentVector& z) const;
  TokenSequence decode_sequence(const LatentVector& z, std::size_t max_words) const;
  MediaSample reconstruct(const TraceMatrix& matrix) const;

  struct Discrimination {
    double realism = 0.5;        // sigmoid of the realism logit, in (0,1)
    double realism_logit = 0.0;
    Eigen::VectorXd privacy_logits;
  };
  /// Throws ConfigError for token input or a sequence model.
  Discrimination discriminate(const MediaSample& sample) const;
  int privacy_class(const MediaSample& sample) const;

  /// Gradients laid out like parameters(): encoder, decoder(s), then
  /// discriminator trunk and heads.
  struct Grads {
    neural::LayerParams encoder, decoder, d_trunk, d_real, d_priv;
    SequenceDecoder::Grads sequence;
  };
  Grads zero_grads() const;

  /// Encoder/decoder objective for one example. Accumulates gradients of
  /// encoder and decoder parameters into `grads` (nullptr: value only).
  TotalLoss generator_objective(const TrainExample& ex, const LossWeights& w, Grads* grads) const;
  /// Discriminator objective: BCE(real, 1) + BCE(fake, 0) + CE(privacy(real), label).
  double discriminator_objective(const MediaSample& real, const ContinuousMedia& fake, int label,
                                 Grads* grads) const;

  std::vector<neural::NamedTensor> generator_parameters();
  std::vector<neural::NamedTensor> discriminator_parameters();
  static std::vector<neural::Tensor*> generator_grads(Grads& g, Modality m);
  static std::vector<neural::Tensor*> discriminator_grads(Grads& g);

  neural::Checkpoint to_checkpoint();
  static AttackModel from_checkpoint(const neural::Checkpoint& ckpt);

 private:
  ModelSpec spec_;
  neural::Sequential encoder_;
  neural::Sequential decoder_;
  SequenceDecoder seq_decoder_;
  neural::Sequential d_trunk_, d_real_, d_priv_;
};

struct TrainResult {
  AttackModel model;
  std::vector<EpochStats> history;
};

/// Alternating updates per batch (d_steps discriminator steps, then one
/// encoder/decoder step); seeded shuffling. Throws NumericError naming the
/// epoch and batch if a loss turns NaN.
TrainResult train(std::span<const TrainExample> examples, const ModelSpec& spec,
                  const TrainConfig& cfg);

// ------------------------------------------------------------ evaluation

enum class Metric { Mse, WordAccuracy, PrivacyMatch };
Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric m);

struct Evaluation {
  Metric metric = Metric::Mse;
  std::vector<double> per_sample;
  double mean = 0.0;
};

/// Word accuracy: positional matches over content words up to the shorter
/// length, divided by the reference's word count.
double word_accuracy(const TokenSequence& reference, const TokenSequence& hypothesis);
double sample_mse(const ContinuousMedia& a, const ContinuousMedia& b);

/// PrivacyMatch needs `model` (its privacy head) and the reference labels.
Evaluation evaluate(std::span<const MediaSample> recons, std::span<const MediaSample> refs,
                    Metric metric, const AttackModel* model = nullptr,
                    std::span<const int> labels = {});

/// MSE of always predicting the mean training image.
double mean_image_baseline(std::span<const MediaSample> train_refs,
                           std::span<const MediaSample> test_refs);
/// Expected accuracy of uniform guessing over the content words.
double random_word_baseline(const Vocabulary& vocab);
/// Largest class prior among labels.
double majority_class_baseline(std::span<const int> labels, std::size_t classes);

}  // namespace msca
