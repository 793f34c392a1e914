#include "msca/sca_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "msca/neural/losses.hpp"

namespace msca {

using neural::LayerParams;
using neural::NamedTensor;
using neural::Sequential;
using neural::Tensor;

namespace {

std::vector<neural::LayerSpec> encoder_layers(const EncoderSpec& e) {
  std::vector<neural::LayerSpec> layers;
  auto channels = static_cast<Eigen::Index>(e.input.channels);
  const auto side = static_cast<Eigen::Index>(e.input.side);
  for (std::size_t i = 0; i < e.conv_channels.size(); ++i) {
    layers.emplace_back(neural::Conv2D{channels, e.conv_channels[i], e.kernel, 1, e.kernel / 2});
    layers.emplace_back(neural::ReLU{});
    channels = e.conv_channels[i];
    if (i % 2 == e.attention_slot) {
      layers.emplace_back(neural::ChannelAttention{channels, e.attention_reduction});
      layers.emplace_back(neural::SpatialAttention{e.attention_kernel});
    }
  }
  layers.emplace_back(neural::FullyConnected{channels * side * side, e.latent_dim});
  return layers;
}

std::vector<neural::LayerSpec> decoder_layers(const ModelSpec& s) {
  const auto c = s.decoder_channels;
  const auto base = static_cast<Eigen::Index>(s.decoder_base);
  std::vector<neural::LayerSpec> layers{
      neural::FullyConnected{s.encoder.latent_dim, c * base * base},
      neural::ReLU{},
      neural::Reshape{{c, base, base}},
  };
  for (auto side = s.decoder_base; side < s.image_side; side *= 2) {
    layers.emplace_back(neural::NearestUpsample{2});
    layers.emplace_back(neural::Conv2D{c, c, 3, 1, 1});
    layers.emplace_back(neural::ReLU{});
  }
  layers.emplace_back(neural::Conv2D{c, 1, 3, 1, 1});
  layers.emplace_back(neural::Sigmoid{});
  return layers;
}

Eigen::Index disc_features(const ModelSpec& s) {
  const auto quarter = static_cast<Eigen::Index>((s.image_side + 3) / 4);
  return s.disc_channels * quarter * quarter;
}

std::vector<neural::LayerSpec> disc_trunk_layers(const ModelSpec& s) {
  const auto half = std::max<Eigen::Index>(1, s.disc_channels / 2);
  return {neural::Conv2D{1, half, 3, 2, 1}, neural::ReLU{},
          neural::Conv2D{half, s.disc_channels, 3, 2, 1}, neural::ReLU{}};
}

void scale(std::vector<Tensor*>& tensors, double factor) {
  for (auto* t : tensors) t->data() *= factor;
}

std::vector<Tensor*> pointers(std::vector<NamedTensor>& named) {
  std::vector<Tensor*> out;
  for (auto& n : named) out.push_back(n.tensor);
  return out;
}

Tensor image_tensor(const ContinuousMedia& m) {
  const auto h = m.values.rows(), w = m.values.cols();
  Tensor t({1, h, w});
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) t[r * w + c] = m.values(r, c);
  return t;
}

ContinuousMedia tensor_image(const Tensor& t) {
  const auto h = t.dim(1), w = t.dim(2);
  Eigen::MatrixXd img(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) img(r, c) = t[r * w + c];
  return {std::move(img)};
}

std::string join(const std::vector<Eigen::Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<Eigen::Index> split_ints(const std::string& s) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stol(item));
  }
  return out;
}

}  // namespace

void ModelSpec::validate() const {
  if (encoder.input.capacity() == 0) throw ConfigError("encoder input shape must be non-empty");
  if (encoder.conv_channels.empty()) throw ConfigError("encoder needs at least one conv layer");
  if (encoder.attention_slot > 1) throw ConfigError("attention_slot must be 0 or 1");
  if (encoder.latent_dim <= 0) throw ConfigError("latent dimension must be positive");
  if (modality == Modality::Continuous) {
    if (decoder_base == 0 || image_side < decoder_base || image_side % decoder_base != 0 ||
        !std::has_single_bit(image_side / decoder_base)) {
      throw ConfigError("image side must be decoder_base times a power of two");
    }
    if (privacy_classes == 0) throw ConfigError("privacy head needs at least one class");
  } else {
    if (vocab_size <= Vocabulary::kFirstWord) throw ConfigError("vocabulary must include SOS, EOS and words");
    if (max_words == 0) throw ConfigError("max_words must be positive");
  }
}

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,L_explicit,L_implicit,L_privacy,D_loss\n";
  char buf[256];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", h.epoch, h.explicit_loss,
                  h.implicit_loss, h.privacy_loss, h.d_loss);
    out << buf;
  }
}

TotalLoss total_loss(const Eigen::VectorXd& recon, const Eigen::VectorXd& ref, double realism_logit,
                     const Eigen::VectorXd& privacy_logits, int label, const LossWeights& w) {
  if (w.lambda < 0) throw ConfigError("lambda must be non-negative");
  TotalLoss t;
  auto ex = w.metric == ExplicitMetric::Mse ? neural::mse_loss(recon, ref) : neural::l1_loss(recon, ref);
  t.explicit_loss = ex.value;
  t.grad_recon = w.lambda * ex.grad;
  if (w.implicit != 0.0) {
    auto adv = neural::bce_with_logit(realism_logit, 1.0);
    t.implicit_loss = adv.value;
    t.grad_realism_logit = w.implicit * adv.grad[0];
  }
  t.grad_privacy_logits = Eigen::VectorXd::Zero(privacy_logits.size());
  if (w.privacy != 0.0) {
    auto ce = neural::softmax_cross_entropy(privacy_logits, label);
    t.privacy_loss = ce.value;
    t.grad_privacy_logits = w.privacy * ce.grad;
  }
  t.total = w.lambda * t.explicit_loss + w.implicit * t.implicit_loss + w.privacy * t.privacy_loss;
  if (!std::isfinite(t.total)) throw NumericError("total loss is not finite");
  return t;
}

// -------------------------------------------------------- SequenceDecoder

SequenceDecoder::SequenceDecoder(Eigen::Index latent, std::size_t vocab, Eigen::Index embed,
                                 Eigen::Index hidden)
    : latent_(latent),
      vocab_(vocab),
      init_({neural::FullyConnected{latent, hidden}, neural::Tanh{}}),
      embedding_({static_cast<Eigen::Index>(vocab), embed}),
      cell_{embed + latent, hidden},
      out_({neural::FullyConnected{hidden, static_cast<Eigen::Index>(vocab)}}) {
  for (const auto& shape : cell_.param_shapes()) gru_.emplace_back(shape);
}

void SequenceDecoder::init(Rng& rng) {
  init_.init(rng);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (Eigen::Index i = 0; i < embedding_.size(); ++i) embedding_[i] = normal(rng);
  gru_ = cell_.init_params(rng);
  out_.init(rng);
}

SequenceDecoder::Grads SequenceDecoder::zero_grads() const {
  Grads g{init_.zero_grads(), Tensor(embedding_.shape()), {}, out_.zero_grads()};
  for (const auto& p : gru_) g.gru.emplace_back(p.shape());
  return g;
}

Eigen::VectorXd SequenceDecoder::step_input(std::uint32_t token, const LatentVector& z) const {
  const auto embed = embedding_.dim(1);
  Eigen::VectorXd x(embed + latent_);
  x.head(embed) = embedding_.matrix(embedding_.dim(0), embed).row(token).transpose();
  x.tail(latent_) = z;
  return x;
}

double SequenceDecoder::teacher_forced_loss(const LatentVector& z, const TokenSequence& target,
                                            Grads* grads, LatentVector* grad_z) const {
  const auto& toks = target.tokens;
  if (toks.size() < 2 || toks.front() != Vocabulary::kSos) {
    throw DataError("target sequence must start with SOS and contain at least one more token");
  }
  for (auto t : toks)
    if (t >= vocab_) throw BoundsError("token id outside the vocabulary");
  const auto steps = toks.size() - 1;

  auto init_pass = init_.forward(Tensor({latent_}, z));
  Eigen::VectorXd h = init_pass.output.data();
  std::vector<neural::GruStepCache> caches(steps);
  std::vector<Sequential::Pass> out_passes(steps);
  std::vector<Eigen::VectorXd> dlogits(steps);
  double loss = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    h = neural::gru_forward(cell_, gru_, step_input(toks[s], z), h, &caches[s]);
    out_passes[s] = out_.forward(Tensor({cell_.hidden}, h));
    auto ce = neural::softmax_cross_entropy(out_passes[s].output.data(), toks[s + 1]);
    loss += ce.value;
    dlogits[s] = std::move(ce.grad);
  }
  const double inv = 1.0 / static_cast<double>(steps);
  loss *= inv;
  if (!grads) return loss;

  const auto embed = embedding_.dim(1);
  Eigen::VectorXd gz = Eigen::VectorXd::Zero(latent_);
  Eigen::VectorXd gh = Eigen::VectorXd::Zero(cell_.hidden);
  auto emb_grad = grads->embedding.matrix(embedding_.dim(0), embed);
  for (std::size_t s = steps; s-- > 0;) {
    gh += out_.backward(out_passes[s], Tensor({static_cast<Eigen::Index>(vocab_)}, dlogits[s] * inv),
                        grads->out)
              .data();
    auto step = neural::gru_backward(cell_, gru_, caches[s], gh, grads->gru);
    emb_grad.row(toks[s]) += step.grad_x.head(embed).transpose();
    gz += step.grad_x.tail(latent_);
    gh = std::move(step.grad_h_prev);
  }
  gz += init_.backward(init_pass, Tensor({cell_.hidden}, gh), grads->init).data();
  if (grad_z) *grad_z = std::move(gz);
  return loss;
}

TokenSequence SequenceDecoder::greedy(const LatentVector& z, std::size_t max_words) const {
  TokenSequence out;
  out.tokens.push_back(Vocabulary::kSos);
  Eigen::VectorXd h = init_.forward(Tensor({latent_}, z)).output.data();
  std::uint32_t prev = Vocabulary::kSos;
  for (std::size_t n = 0; n < max_words; ++n) {
    h = neural::gru_forward(cell_, gru_, step_input(prev, z), h, nullptr);
    Eigen::VectorXd logits = out_.forward(Tensor({cell_.hidden}, h)).output.data();
    logits[Vocabulary::kSos] = -std::numeric_limits<double>::infinity();
    Eigen::Index best = 0;
    logits.maxCoeff(&best);  // first maximum: lowest id wins ties
    if (static_cast<std::uint32_t>(best) == Vocabulary::kEos) break;
    prev = static_cast<std::uint32_t>(best);
    out.tokens.push_back(prev);
  }
  out.tokens.push_back(Vocabulary::kEos);
  return out;
}

void SequenceDecoder::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  init_.collect(prefix + ".init", out);
  out.push_back({prefix + ".embedding", &embedding_});
  static const char* names[] = {"wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn"};
  for (std::size_t i = 0; i < gru_.size(); ++i) out.push_back({prefix + ".gru." + names[i], &gru_[i]});
  out_.collect(prefix + ".out", out);
}

void SequenceDecoder::collect_grads(Grads& g, std::vector<Tensor*>& out) {
  Sequential::collect_grads(g.init, out);
  out.push_back(&g.embedding);
  for (auto& t : g.gru) out.push_back(&t);
  Sequential::collect_grads(g.out, out);
}

// ------------------------------------------------------------ AttackModel

AttackModel::AttackModel(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  encoder_ = Sequential(encoder_layers(spec_.encoder));
  if (spec_.modality == Modality::Continuous) {
    decoder_ = Sequential(decoder_layers(spec_));
    d_trunk_ = Sequential(disc_trunk_layers(spec_));
    d_real_ = Sequential({neural::FullyConnected{disc_features(spec_), 1}});
    d_priv_ = Sequential({neural::FullyConnected{disc_features(spec_),
                                                 static_cast<Eigen::Index>(spec_.privacy_classes)}});
  } else {
    seq_decoder_ = SequenceDecoder(spec_.encoder.latent_dim, spec_.vocab_size, spec_.embed_dim,
                                   spec_.hidden_dim);
  }
}

void AttackModel::init(std::uint64_t seed) {
  auto rng = make_rng(seed, "init");
  encoder_.init(rng);
  if (spec_.modality == Modality::Continuous) {
    decoder_.init(rng);
    d_trunk_.init(rng);
    d_real_.init(rng);
    d_priv_.init(rng);
  } else {
    seq_decoder_.init(rng);
  }
}

Tensor AttackModel::as_input(const TraceMatrix& m) {
  const auto k = static_cast<Eigen::Index>(m.shape.channels);
  const auto n = static_cast<Eigen::Index>(m.shape.side);
  return Tensor({k, n, n}, m.values);
}

Sequential::Pass AttackModel::encoder_pass(const TraceMatrix& matrix) const {
  if (!(matrix.shape == spec_.encoder.input)) {
    throw ShapeError("encoder expects a " + std::to_string(spec_.encoder.input.channels) + "x" +
                     std::to_string(spec_.encoder.input.side) + "x" +
                     std::to_string(spec_.encoder.input.side) + " matrix, got " +
                     std::to_string(matrix.shape.channels) + "x" + std::to_string(matrix.shape.side) +
                     "x" + std::to_string(matrix.shape.side));
  }
  return encoder_.forward(as_input(matrix));
}

LatentVector AttackModel::encode(const TraceMatrix& matrix) const {
  return encoder_pass(matrix).output.data();
}

ContinuousMedia AttackModel::decode_continuous(const LatentVector& z) const {
  if (spec_.modality != Modality::Continuous) throw ConfigError("model has no continuous decoder");
  if (!z.allFinite()) throw NumericError("latent vector is not finite");
  return tensor_image(decoder_.forward(Tensor({spec_.encoder.latent_dim}, z)).output);
}

TokenSequence AttackModel::decode_sequence(const LatentVector& z, std::size_t max_words) const {
  if (spec_.modality != Modality::Sequence) throw ConfigError("model has no sequence decoder");
  if (max_words == 0) throw ConfigError("max_words must be at least 1");
  return seq_decoder_.greedy(z, max_words);
}

MediaSample AttackModel::reconstruct(const TraceMatrix& matrix) const {
  const auto z = encode(matrix);
  if (spec_.modality == Modality::Continuous) return decode_continuous(z);
  return decode_sequence(z, spec_.max_words);
}

AttackModel::Discrimination AttackModel::discriminate(const MediaSample& sample) const {
  if (spec_.modality != Modality::Continuous) throw ConfigError("sequence models have no discriminator");
  const auto* img = std::get_if<ContinuousMedia>(&sample);
  if (!img) throw ConfigError("discriminator expects continuous media");
  const auto feat = d_trunk_.forward(image_tensor(*img)).output;
  Discrimination d;
  d.realism_logit = d_real_.forward(feat).output[0];
  d.realism = 1.0 / (1.0 + std::exp(-d.realism_logit));
  d.privacy_logits = d_priv_.forward(feat).output.data();
  return d;
}

int AttackModel::privacy_class(const MediaSample& sample) const {
  Eigen::Index best = 0;
  discriminate(sample).privacy_logits.maxCoeff(&best);
  return static_cast<int>(best);
}

AttackModel::Grads AttackModel::zero_grads() const {
  Grads g;
  g.encoder = encoder_.zero_grads();
  if (spec_.modality == Modality::Continuous) {
    g.decoder = decoder_.zero_grads();
    g.d_trunk = d_trunk_.zero_grads();
    g.d_real = d_real_.zero_grads();
    g.d_priv = d_priv_.zero_grads();
  } else {
    g.sequence = seq_decoder_.zero_grads();
  }
  return g;
}

TotalLoss AttackModel::generator_objective(const TrainExample& ex, const LossWeights& w,
                                           Grads* grads) const {
  const auto enc = encoder_pass(ex.matrix);
  const auto& z = enc.output;

  if (spec_.modality == Modality::Sequence) {
    const auto* target = std::get_if<TokenSequence>(&ex.target);
    if (!target) throw ConfigError("sequence model trains on token targets");
    TotalLoss t;
    LatentVector gz;
    t.explicit_loss = seq_decoder_.teacher_forced_loss(z.data(), *target,
                                                       grads ? &grads->sequence : nullptr, &gz);
    t.total = t.explicit_loss;
    if (!std::isfinite(t.total)) throw NumericError("sequence loss is not finite");
    if (grads) encoder_.backward(enc, Tensor(z.shape(), gz), grads->encoder);
    return t;
  }

  const auto* ref = std::get_if<ContinuousMedia>(&ex.target);
  if (!ref) throw ConfigError("continuous model trains on continuous targets");
  const auto dec = decoder_.forward(z);
  const auto& recon = dec.output;
  const auto ref_t = image_tensor(*ref);
  if (ref_t.shape() != recon.shape()) throw ShapeError("reference image shape differs from decoder output");

  const bool use_d = w.implicit != 0.0 || w.privacy != 0.0;
  Sequential::Pass trunk, real_head, priv_head;
  double realism_logit = 0.0;
  Eigen::VectorXd privacy_logits = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.privacy_classes));
  if (use_d) {
    trunk = d_trunk_.forward(recon);
    real_head = d_real_.forward(trunk.output);
    priv_head = d_priv_.forward(trunk.output);
    realism_logit = real_head.output[0];
    privacy_logits = priv_head.output.data();
  }
  auto t = total_loss(recon.data(), ref_t.data(), realism_logit, privacy_logits, ex.label, w);
  if (!grads) return t;

  Tensor g_recon(recon.shape(), t.grad_recon);
  if (use_d) {
    // Discriminator parameters are held fixed here; their gradients are discarded.
    auto scratch_real = d_real_.zero_grads();
    auto scratch_priv = d_priv_.zero_grads();
    auto scratch_trunk = d_trunk_.zero_grads();
    Tensor g_feat = d_real_.backward(real_head, Tensor({1}, Eigen::VectorXd::Constant(1, t.grad_realism_logit)),
                                     scratch_real);
    g_feat.data() += d_priv_.backward(priv_head, Tensor(priv_head.output.shape(), t.grad_privacy_logits),
                                      scratch_priv)
                         .data();
    g_recon.data() += d_trunk_.backward(trunk, g_feat, scratch_trunk).data();
  }
  const auto gz = decoder_.backward(dec, g_recon, grads->decoder);
  encoder_.backward(enc, gz, grads->encoder);
  return t;
}

double AttackModel::discriminator_objective(const MediaSample& real, const ContinuousMedia& fake,
                                            int label, Grads* grads) const {
  if (spec_.modality != Modality::Continuous) throw ConfigError("sequence models have no discriminator");
  const auto* real_img = std::get_if<ContinuousMedia>(&real);
  if (!real_img) throw ConfigError("discriminator expects continuous media");

  double loss = 0.0;
  auto run = [&](const ContinuousMedia& img, double target, bool with_privacy) {
    const auto trunk = d_trunk_.forward(image_tensor(img));
    const auto head = d_real_.forward(trunk.output);
    auto bce = neural::bce_with_logit(head.output[0], target);
    loss += bce.value;
    Sequential::Pass priv;
    neural::LossGrad ce;
    if (with_privacy) {
      priv = d_priv_.forward(trunk.output);
      ce = neural::softmax_cross_entropy(priv.output.data(), label);
      loss += ce.value;
    }
    if (!grads) return;
    Tensor g_feat = d_real_.backward(head, Tensor({1}, bce.grad), grads->d_real);
    if (with_privacy) {
      g_feat.data() += d_priv_.backward(priv, Tensor(priv.output.shape(), ce.grad), grads->d_priv).data();
    }
    d_trunk_.backward(trunk, g_feat, grads->d_trunk);
  };
  run(*real_img, 1.0, true);
  run(fake, 0.0, false);
  return loss;
}

std::vector<NamedTensor> AttackModel::generator_parameters() {
  std::vector<NamedTensor> out;
  encoder_.collect("encoder", out);
  if (spec_.modality == Modality::Continuous) decoder_.collect("decoder", out);
  else seq_decoder_.collect("seqdecoder", out);
  return out;
}

std::vector<NamedTensor> AttackModel::discriminator_parameters() {
  std::vector<NamedTensor> out;
  if (spec_.modality != Modality::Continuous) return out;
  d_trunk_.collect("disc.trunk", out);
  d_real_.collect("disc.realism", out);
  d_priv_.collect("disc.privacy", out);
  return out;
}

std::vector<Tensor*> AttackModel::generator_grads(Grads& g, Modality m) {
  std::vector<Tensor*> out;
  Sequential::collect_grads(g.encoder, out);
  if (m == Modality::Continuous) Sequential::collect_grads(g.decoder, out);
  else SequenceDecoder::collect_grads(g.sequence, out);
  return out;
}

std::vector<Tensor*> AttackModel::discriminator_grads(Grads& g) {
  std::vector<Tensor*> out;
  Sequential::collect_grads(g.d_trunk, out);
  Sequential::collect_grads(g.d_real, out);
  Sequential::collect_grads(g.d_priv, out);
  return out;
}

neural::Checkpoint AttackModel::to_checkpoint() {
  neural::Checkpoint ckpt;
  auto& h = ckpt.header;
  const auto& e = spec_.encoder;
  h["modality"] = spec_.modality == Modality::Continuous ? "continuous" : "sequence";
  h["encoder.input"] = std::to_string(e.input.channels) + "," + std::to_string(e.input.side);
  h["encoder.conv_channels"] = join(e.conv_channels);
  h["encoder.kernel"] = std::to_string(e.kernel);
  h["encoder.attention_reduction"] = std::to_string(e.attention_reduction);
  h["encoder.attention_kernel"] = std::to_string(e.attention_kernel);
  h["encoder.latent_dim"] = std::to_string(e.latent_dim);
  h["encoder.attention_slot"] = std::to_string(e.attention_slot);
  h["image_side"] = std::to_string(spec_.image_side);
  h["decoder_channels"] = std::to_string(spec_.decoder_channels);
  h["decoder_base"] = std::to_string(spec_.decoder_base);
  h["disc_channels"] = std::to_string(spec_.disc_channels);
  h["privacy_classes"] = std::to_string(spec_.privacy_classes);
  h["vocab_size"] = std::to_string(spec_.vocab_size);
  h["embed_dim"] = std::to_string(spec_.embed_dim);
  h["hidden_dim"] = std::to_string(spec_.hidden_dim);
  h["max_words"] = std::to_string(spec_.max_words);
  for (std::size_t i = 0; i < encoder_.layers().size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof(key), "layer.encoder.%02zu", i);
    h[key] = neural::layer_name(encoder_.layers()[i]);
  }
  for (std::size_t i = 0; i < decoder_.layers().size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof(key), "layer.decoder.%02zu", i);
    h[key] = neural::layer_name(decoder_.layers()[i]);
  }
  auto params = generator_parameters();
  auto disc = discriminator_parameters();
  params.insert(params.end(), disc.begin(), disc.end());
  for (auto& p : params) ckpt.tensors.emplace_back(p.name, *p.tensor);
  return ckpt;
}

AttackModel AttackModel::from_checkpoint(const neural::Checkpoint& ckpt) {
  ModelSpec s;
  const auto num = [&](const char* key) { return std::stol(ckpt.value(key)); };
  const auto& modality = ckpt.value("modality");
  if (modality == "continuous") s.modality = Modality::Continuous;
  else if (modality == "sequence") s.modality = Modality::Sequence;
  else throw DataError("unknown checkpoint modality '" + modality + "'");
  const auto input = split_ints(ckpt.value("encoder.input"));
  if (input.size() != 2) throw DataError("bad encoder.input in checkpoint");
  s.encoder.input = {static_cast<std::size_t>(input[0]), static_cast<std::size_t>(input[1])};
  s.encoder.conv_channels = split_ints(ckpt.value("encoder.conv_channels"));
  s.encoder.kernel = num("encoder.kernel");
  s.encoder.attention_reduction = num("encoder.attention_reduction");
  s.encoder.attention_kernel = num("encoder.attention_kernel");
  s.encoder.latent_dim = num("encoder.latent_dim");
  s.encoder.attention_slot = static_cast<std::size_t>(num("encoder.attention_slot"));
  s.image_side = static_cast<std::size_t>(num("image_side"));
  s.decoder_channels = num("decoder_channels");
  s.decoder_base = static_cast<std::size_t>(num("decoder_base"));
  s.disc_channels = num("disc_channels");
  s.privacy_classes = static_cast<std::size_t>(num("privacy_classes"));
  s.vocab_size = static_cast<std::size_t>(num("vocab_size"));
  s.embed_dim = num("embed_dim");
  s.hidden_dim = num("hidden_dim");
  s.max_words = static_cast<std::size_t>(num("max_words"));

  AttackModel model(s);
  auto params = model.generator_parameters();
  auto disc = model.discriminator_parameters();
  params.insert(params.end(), disc.begin(), disc.end());
  for (auto& p : params) {
    const auto& t = ckpt.tensor(p.name);
    if (t.shape() != p.tensor->shape()) {
      throw DataError("checkpoint tensor '" + p.name + "' has shape " + neural::shape_string(t.shape()) +
                      ", model expects " + neural::shape_string(p.tensor->shape()));
    }
    *p.tensor = t;
  }
  return model;
}

// ------------------------------------------------------------------ train

TrainResult train(std::span<const TrainExample> examples, const ModelSpec& spec,
                  const TrainConfig& cfg) {
  if (examples.empty()) throw DataError("training split is empty");
  if (cfg.batch == 0) throw ConfigError("batch size must be at least 1");
  if (cfg.weights.lambda < 0) throw ConfigError("lambda must be non-negative");

  std::vector<TrainExample> owned;
  if (cfg.refresh) {
    owned.assign(examples.begin(), examples.end());
    examples = owned;
  }

  TrainResult result{AttackModel(spec), {}};
  auto& model = result.model;
  model.init(cfg.seed);
  auto shuffle_rng = make_rng(cfg.seed, "shuffle");

  auto g_named = model.generator_parameters();
  auto d_named = model.discriminator_parameters();
  auto g_params = pointers(g_named);
  auto d_params = pointers(d_named);
  neural::AdamState g_state{{cfg.learning_rate}, {}, {}, 0};
  neural::AdamState d_state{{cfg.learning_rate}, {}, {}, 0};

  const bool continuous = spec.modality == Modality::Continuous;
  const bool use_d = continuous && (cfg.weights.implicit != 0.0 || cfg.weights.privacy != 0.0);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.refresh) {
      cfg.refresh(epoch, owned);
      if (owned.size() != order.size()) throw ConfigError("refresh must keep the example count");
      examples = owned;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochStats stats;
    stats.epoch = epoch + 1;
    std::size_t batches = 0;
    for (std::size_t begin = 0, batch_no = 0; begin < order.size(); begin += cfg.batch, ++batch_no) {
      const auto end = std::min(order.size(), begin + cfg.batch);
      const double inv = 1.0 / static_cast<double>(end - begin);
      const auto context = [&] {
        return " (epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_no + 1) + ")";
      };

      double d_loss = 0.0;
      if (use_d) {
        for (std::size_t step = 0; step < cfg.d_steps; ++step) {
          auto grads = model.zero_grads();
          d_loss = 0.0;
          for (auto i = begin; i < end; ++i) {
            const auto& ex = examples[order[i]];
            const auto fake = model.decode_continuous(model.encode(ex.matrix));
            d_loss += model.discriminator_objective(ex.target, fake, ex.label, &grads);
          }
          d_loss *= inv;
          if (!std::isfinite(d_loss)) throw NumericError("discriminator loss diverged" + context());
          auto d_grads = AttackModel::discriminator_grads(grads);
          scale(d_grads, inv);
          neural::adam_step(d_params, d_grads, d_state);
        }
      }

      auto grads = model.zero_grads();
      double ex_sum = 0.0, im_sum = 0.0, pr_sum = 0.0;
      for (auto i = begin; i < end; ++i) {
        TotalLoss t;
        try {
          t = model.generator_objective(examples[order[i]], cfg.weights, &grads);
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + context());
        }
        ex_sum += t.explicit_loss;
        im_sum += t.implicit_loss;
        pr_sum += t.privacy_loss;
      }
      auto g_grads = AttackModel::generator_grads(grads, spec.modality);
      scale(g_grads, inv);
      try {
        neural::adam_step(g_params, g_grads, g_state);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + context());
      }
      stats.explicit_loss += ex_sum * inv;
      stats.implicit_loss += im_sum * inv;
      stats.privacy_loss += pr_sum * inv;
      stats.d_loss += d_loss;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    stats.explicit_loss /= nb;
    stats.implicit_loss /= nb;
    stats.privacy_loss /= nb;
    stats.d_loss /= nb;
    result.history.push_back(stats);
  }
  return result;
}

// ------------------------------------------------------------- evaluation

Metric parse_metric(std::string_view name) {
  if (name == "mse") return Metric::Mse;
  if (name == "word_accuracy") return Metric::WordAccuracy;
  if (name == "privacy_match") return Metric::PrivacyMatch;
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected mse, word_accuracy or privacy_match)");
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Mse: return "mse";
    case Metric::WordAccuracy: return "word_accuracy";
    case Metric::PrivacyMatch: return "privacy_match";
  }
  return "?";
}

double word_accuracy(const TokenSequence& reference, const TokenSequence& hypothesis) {
  auto words = [](const TokenSequence& s) {
    std::vector<std::uint32_t> w;
    for (auto t : s.tokens)
      if (t != Vocabulary::kSos && t != Vocabulary::kEos) w.push_back(t);
    return w;
  };
  const auto ref = words(reference), hyp = words(hypothesis);
  if (ref.empty()) return hyp.empty() ? 1.0 : 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(ref.size(), hyp.size()); ++i) hits += ref[i] == hyp[i];
  return static_cast<double>(hits) / static_cast<double>(ref.size());
}

double sample_mse(const ContinuousMedia& a, const ContinuousMedia& b) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
    throw ShapeError("mse: image shapes differ");
  }
  return (a.values - b.values).squaredNorm() / static_cast<double>(a.values.size());
}

Evaluation evaluate(std::span<const MediaSample> recons, std::span<const MediaSample> refs,
                    Metric metric, const AttackModel* model, std::span<const int> labels) {
  if (recons.size() != refs.size()) throw ShapeError("evaluate: reconstruction/reference count mismatch");
  Evaluation ev;
  ev.metric = metric;
  for (std::size_t i = 0; i < recons.size(); ++i) {
    double score = 0.0;
    switch (metric) {
      case Metric::Mse:
        score = sample_mse(std::get<ContinuousMedia>(recons[i]), std::get<ContinuousMedia>(refs[i]));
        break;
      case Metric::WordAccuracy:
        score = word_accuracy(std::get<TokenSequence>(refs[i]), std::get<TokenSequence>(recons[i]));
        break;
      case Metric::PrivacyMatch:
        if (!model || labels.size() != refs.size()) {
          throw ConfigError("privacy_match needs the trained classifier and reference labels");
        }
        score = model->privacy_class(recons[i]) == labels[i] ? 1.0 : 0.0;
        break;
    }
    ev.per_sample.push_back(score);
  }
  if (!ev.per_sample.empty()) {
    ev.mean = std::accumulate(ev.per_sample.begin(), ev.per_sample.end(), 0.0) /
              static_cast<double>(ev.per_sample.size());
  }
  return ev;
}

double mean_image_baseline(std::span<const MediaSample> train_refs,
                           std::span<const MediaSample> test_refs) {
  if (train_refs.empty() || test_refs.empty()) throw DataError("baseline needs train and test samples");
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(std::get<ContinuousMedia>(train_refs[0]).values.rows(),
                                               std::get<ContinuousMedia>(train_refs[0]).values.cols());
  for (const auto& s : train_refs) mean += std::get<ContinuousMedia>(s).values;
  mean /= static_cast<double>(train_refs.size());
  const ContinuousMedia m{mean};
  double total = 0.0;
  for (const auto& s : test_refs) total += sample_mse(m, std::get<ContinuousMedia>(s));
  return total / static_cast<double>(test_refs.size());
}

double random_word_baseline(const Vocabulary& vocab) {
  return 1.0 / static_cast<double>(vocab.content_words());
}

double majority_class_baseline(std::span<const int> labels, std::size_t classes) {
  if (labels.empty()) throw DataError("baseline needs labels");
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) throw BoundsError("label outside class range");
    ++counts[static_cast<std::size_t>(l)];
  }
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(labels.size());
}

}  // namespace msca
