#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "msca/errors.hpp"
#include "msca/localize.hpp"
#include "msca/pipeline.hpp"

namespace fs = std::filesystem;
using namespace msca;

namespace {

// ------------------------------------------------------------------ options

struct EncodingOpts {
  std::string form = "sidechannel";
  std::string kind = "cacheline";
  std::size_t k = 1;
  std::size_t n = 64;
  bool truncate = false;
  std::size_t sets = 64;
  std::size_t ways = 8;
  std::size_t line = 64;
  std::size_t epoch = 40;
  std::size_t repeat = 1;

  void add_shape(CLI::App* cmd) {
    cmd->add_option("--k", k, "matrix channels K")->capture_default_str();
    cmd->add_option("--n", n, "matrix side N")->capture_default_str();
    cmd->add_flag("--truncate", truncate, "drop records that do not fit instead of failing");
  }
  void add_cache(CLI::App* cmd) {
    cmd->add_option("--sets", sets, "cache sets")->capture_default_str();
    cmd->add_option("--ways", ways, "ways per set")->capture_default_str();
    cmd->add_option("--line", line, "line size in bytes")->capture_default_str();
    cmd->add_option("--epoch", epoch, "victim accesses per Prime+Probe epoch")->capture_default_str();
    cmd->add_option("--repeat", repeat, "independent runs concatenated")->capture_default_str();
  }
  void add_all(CLI::App* cmd) {
    cmd->add_option("--form", form, "sidechannel or primeprobe")
        ->check(CLI::IsMember({"sidechannel", "primeprobe"}))
        ->capture_default_str();
    cmd->add_option("--kind", kind, "cachebank, cacheline or pagetable (':<param>' overrides)")
        ->capture_default_str();
    add_shape(cmd);
    add_cache(cmd);
  }

  CacheConfig cache() const {
    CacheConfig c{sets, ways, line};
    c.validate();
    return c;
  }
  MatrixShape shape() const {
    if (k == 0 || n == 0) throw ConfigError("--k and --n must be positive");
    return {k, n};
  }
  TraceEncoding encoding() const {
    TraceEncoding e;
    e.form = form == "primeprobe" ? TraceForm::PrimeProbe : TraceForm::SideChannel;
    e.kind = ChannelKind::parse(kind);
    e.cache = cache();
    if (epoch == 0 || repeat == 0) throw ConfigError("--epoch and --repeat must be positive");
    e.epoch_len = epoch;
    e.repeats = repeat;
    e.shape = shape();
    e.overflow = truncate ? Overflow::Truncate : Overflow::Error;
    return e;
  }
};

struct GenOpts {
  std::string victim = "lookup";
  std::size_t n = 0;
  std::size_t test = 0;
  std::size_t side = 16;
  std::size_t max_words = 12;
  std::string out;
};

struct FileOpts {
  std::string input;
  std::string output;
  EncodingOpts enc;
  bool normalize = false;
  std::string scheme;
};

struct TrainOpts {
  std::string data;
  std::string out;
  EncodingOpts enc;
  Eigen::Index latent = 128;
  std::vector<Eigen::Index> conv{4, 4};
  Eigen::Index kernel = 3;
  Eigen::Index attention_kernel = 7;
  Eigen::Index attention_reduction = 4;
  Eigen::Index decoder_channels = 8;
  Eigen::Index disc_channels = 8;
  Eigen::Index embed = 16;
  Eigen::Index hidden = 64;
  std::size_t epochs = 10;
  std::size_t batch = 64;
  double lr = 0.0002;
  double lambda = 50.0;
  double implicit = 1.0;
  double privacy = 1.0;
  bool l1 = false;
  std::vector<std::string> noise;
  bool noise_clean = false;
};

struct EvalOpts {
  std::string model;
  std::string data;
  std::string split = "test";
  std::string out;
  std::string metric;
  std::string noise;
  std::string topk = "auto";
  std::string mask = "same-family";
  double alpha = 0.1;
};

// ------------------------------------------------------------------ helpers

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

// Writes to the file named by `path`, or stdout when it is empty.
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  auto out = open_out(path);
  write(out);
  if (!out) throw DataError("write failed: " + path);
}

template <class F>
auto with_file_context(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string numbered(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.%s", i, ext);
  return buf;
}

// Side-channel files start with "kind="; Prime+Probe files with "S t".
bool is_side_channel_file(const std::string& path) {
  auto in = open_in(path);
  std::string first;
  std::getline(in, first);
  return first.starts_with("kind=");
}

std::span<const DatasetSample> pick_split(const Dataset& ds, const std::string& split) {
  if (split == "test") return ds.test();
  if (split == "train") return ds.train();
  throw ConfigError("--split must be train or test");
}

struct LoadedModel {
  AttackModel model;
  TraceEncoding enc;
  NormStats norm;
};

LoadedModel load_model(const std::string& path) {
  if (path.empty()) throw ConfigError("--model is required");
  if (!fs::exists(path)) throw DataError("checkpoint not found: " + path);
  auto in = open_in(path);
  const auto ckpt = neural::load_checkpoint(in);
  auto [enc, norm] = encoding_from_header(ckpt.header);
  return {AttackModel::from_checkpoint(ckpt), enc, norm};
}

void check_modality(const AttackModel& model, const Dataset& ds) {
  const bool continuous = model.spec().modality == Modality::Continuous;
  if (continuous != ds.program.is_continuous()) {
    throw ConfigError("model modality does not match the dataset's victim '" +
                      std::string(victim_name(ds.manifest.victim)) + "'");
  }
}

std::vector<MediaSample> inputs_of(std::span<const DatasetSample> samples) {
  std::vector<MediaSample> out;
  for (const auto& s : samples) out.push_back(s.input);
  return out;
}

std::vector<int> labels_of(std::span<const DatasetSample> samples) {
  std::vector<int> out;
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

double baseline_for(Metric metric, const Dataset& ds, std::span<const DatasetSample> split,
                    const AttackModel& model) {
  switch (metric) {
    case Metric::Mse:
      return mean_image_baseline(inputs_of(ds.train()), inputs_of(split));
    case Metric::WordAccuracy:
      return random_word_baseline(Vocabulary::toy());
    case Metric::PrivacyMatch:
      return majority_class_baseline(labels_of(split), model.spec().privacy_classes);
  }
  return 0.0;
}

struct Score {
  Metric metric;
  double value = 0.0;
  std::vector<MediaSample> recons;
};

Score attack_score(const LoadedModel& m, std::span<const DatasetSample> split, Metric metric,
                   const NoiseScheme* noise, std::string_view tag) {
  const auto examples = make_examples(split, m.enc, m.norm, noise, tag);
  Score s{metric, 0.0, reconstruct_all(m.model, examples)};
  const auto refs = targets_of(examples);
  const auto labels = labels_of(split);
  s.value = evaluate(s.recons, refs, metric, &m.model, labels).mean;
  return s;
}

// Global keys plus the active subcommand's, skipping options left unset.
void write_resolved(const CLI::App& app, const fs::path& path) {
  const auto* sub = app.get_subcommands().front();
  const auto prefix = sub->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  auto out = open_out(path);
  std::string line;
  while (std::getline(all, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.ends_with("=\"\"")) continue;
    const auto key = line.substr(0, eq);
    if (key.find('.') == std::string::npos || key.starts_with(prefix)) out << line << '\n';
  }
}

// ------------------------------------------------------------------ commands

void cmd_gen(const GenOpts& o, std::uint64_t seed, const CLI::App& app) {
  if (o.n == 0) throw ConfigError("--n must be positive");
  if (o.out.empty()) throw ConfigError("--out is required");
  DatasetManifest m;
  m.victim = parse_victim(o.victim);
  m.test = o.test ? o.test : std::max<std::size_t>(1, o.n / 5);
  if (m.test >= o.n) throw ConfigError("--test must leave at least one training sample");
  m.train = o.n - m.test;
  m.seed = seed;
  m.side = o.side;
  m.max_words = o.max_words;
  const auto ds = gen_dataset(m);
  save_dataset(ds, o.out);
  write_resolved(app, fs::path(o.out) / "resolved.cfg");
  std::cerr << "wrote " << ds.samples.size() << " samples (" << m.train << " train, " << m.test
            << " test) to " << o.out << '\n';
}

void cmd_derive(const FileOpts& o, const CLI::App& app) {
  auto in = open_in(o.input);
  const auto trace = with_file_context(o.input, [&] { return parse_memory_trace(in); });
  const auto sc = derive_side_channel(trace, ChannelKind::parse(o.enc.kind));
  emit(o.output, [&](std::ostream& out) { write_side_channel(out, sc); });
  if (!o.output.empty()) write_resolved(app, o.output + ".cfg");
}

void cmd_fold(const FileOpts& o, const CLI::App& app) {
  const auto shape = o.enc.shape();
  const auto overflow = o.enc.truncate ? Overflow::Truncate : Overflow::Error;
  TraceMatrix m;
  auto in = open_in(o.input);
  if (is_side_channel_file(o.input)) {
    const auto sc = with_file_context(o.input, [&] { return read_side_channel(in); });
    if (o.normalize) {
      const std::vector<SideChannelTrace> one{sc};
      m = fold(normalize_records(sc, fit_norm(one)), shape, overflow);
    } else {
      m = fold(sc, shape, overflow);
    }
  } else {
    const auto pp = with_file_context(o.input, [&] { return read_pp_trace(in); });
    m = encode_pp(pp.vectors, shape, overflow);
  }
  emit(o.output, [&](std::ostream& out) { write_trace_matrix(out, m); });
  if (!o.output.empty()) write_resolved(app, o.output + ".cfg");
}

void cmd_pp(const FileOpts& o, const CLI::App& app) {
  auto in = open_in(o.input);
  const auto trace = with_file_context(o.input, [&] { return parse_memory_trace(in); });
  if (o.enc.epoch == 0 || o.enc.repeat == 0) throw ConfigError("--epoch and --repeat must be positive");
  const auto pp = repeat_concat(trace, o.enc.cache(), o.enc.epoch, o.enc.repeat);
  emit(o.output, [&](std::ostream& out) { write_pp_trace(out, pp); });
  if (!o.output.empty()) write_resolved(app, o.output + ".cfg");
}

void cmd_noise(const FileOpts& o, std::uint64_t seed, const CLI::App& app) {
  const auto scheme = NoiseScheme::parse(o.scheme, seed);
  auto in = open_in(o.input);
  if (is_side_channel_file(o.input)) {
    const auto sc = with_file_context(o.input, [&] { return read_side_channel(in); });
    const std::vector<SideChannelTrace> one{sc};
    const auto norm = fit_norm(one);
    const auto noisy = apply_noise(normalize_records(sc, norm), scheme);
    emit(o.output, [&](std::ostream& out) {
      out << "# noise=" << scheme.name() << " norm=" << fmt(norm.min) << ',' << fmt(norm.max) << '\n';
      for (double v : noisy) out << fmt(v) << '\n';
    });
  } else {
    const auto pp = with_file_context(o.input, [&] { return read_pp_trace(in); });
    const auto noisy = apply_noise(pp, scheme);
    emit(o.output, [&](std::ostream& out) { write_pp_trace(out, noisy); });
  }
  if (!o.output.empty()) write_resolved(app, o.output + ".cfg");
}

std::size_t decoder_base_for(std::size_t side) {
  std::size_t base = side;
  while (base > 4 && base % 2 == 0) base /= 2;
  return base;
}

void cmd_train(const TrainOpts& o, std::uint64_t seed, const CLI::App& app) {
  if (o.data.empty() || o.out.empty()) throw ConfigError("--data and --out are required");
  const auto ds = load_dataset(o.data);
  const auto enc = o.enc.encoding();
  const auto norm = fit_encoding_norm(ds.train(), enc);

  ModelSpec spec;
  spec.modality = ds.program.is_continuous() ? Modality::Continuous : Modality::Sequence;
  spec.encoder.input = enc.shape;
  spec.encoder.conv_channels = o.conv;
  spec.encoder.kernel = o.kernel;
  spec.encoder.attention_kernel = o.attention_kernel;
  spec.encoder.attention_reduction = o.attention_reduction;
  spec.encoder.latent_dim = o.latent;
  spec.image_side = ds.manifest.side;
  spec.decoder_channels = o.decoder_channels;
  spec.decoder_base = decoder_base_for(ds.manifest.side);
  spec.disc_channels = o.disc_channels;
  spec.vocab_size = Vocabulary::toy().size();
  spec.embed_dim = o.embed;
  spec.hidden_dim = o.hidden;
  spec.max_words = ds.manifest.max_words;

  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.batch = o.batch;
  cfg.epochs = o.epochs;
  cfg.seed = seed;
  cfg.weights.lambda = o.lambda;
  cfg.weights.implicit = o.implicit;
  cfg.weights.privacy = o.privacy;
  cfg.weights.metric = o.l1 ? ExplicitMetric::L1 : ExplicitMetric::Mse;
  if (!o.noise.empty()) {
    std::vector<NoiseScheme> schemes;
    for (const auto& n : o.noise) schemes.push_back(NoiseScheme::parse(n, seed));
    cfg.refresh = noisy_refresh(ds.train(), enc, norm, schemes, o.noise_clean);
  }

  const auto examples = make_examples(ds.train(), enc, norm);
  std::cerr << "training on " << examples.size() << " examples, " << cfg.epochs << " epochs\n";
  auto result = train(examples, spec, cfg);

  fs::create_directories(o.out);
  auto ckpt = result.model.to_checkpoint();
  encoding_to_header(enc, norm, ckpt.header);
  ckpt.header["dataset.victim"] = std::string(victim_name(ds.manifest.victim));
  {
    auto out = open_out(fs::path(o.out) / "model.ckpt");
    neural::save_checkpoint(out, ckpt);
  }
  {
    auto out = open_out(fs::path(o.out) / "history.csv");
    write_history_csv(out, result.history);
  }
  write_resolved(app, fs::path(o.out) / "resolved.cfg");
  if (!result.history.empty()) {
    std::cerr << "final explicit loss " << result.history.back().explicit_loss << '\n';
  }
}

void cmd_attack(const EvalOpts& o, std::uint64_t seed, const CLI::App& app) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const auto m = load_model(o.model);
  const auto ds = load_dataset(o.data);
  check_modality(m.model, ds);
  const auto split = pick_split(ds, o.split);
  const bool continuous = m.model.spec().modality == Modality::Continuous;
  const Metric metric = o.metric.empty() ? (continuous ? Metric::Mse : Metric::WordAccuracy) : parse_metric(o.metric);

  std::optional<NoiseScheme> noise;
  if (!o.noise.empty()) noise = NoiseScheme::parse(o.noise, seed);
  const auto score = attack_score(m, split, metric, noise ? &*noise : nullptr, "eval");
  const double base = baseline_for(metric, ds, split, m.model);

  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "metrics.csv");
    out << "metric,value,baseline,samples,noise\n"
        << metric_name(metric) << ',' << fmt(score.value) << ',' << fmt(base) << ',' << split.size() << ','
        << (noise ? noise->name() : "none") << '\n';
  }
  if (continuous) {
    for (std::size_t i = 0; i < score.recons.size(); ++i) {
      auto out = open_out(out_dir / "recon" / numbered(i, "pgm"));
      write_pgm(out, std::get<ContinuousMedia>(score.recons[i]));
    }
  } else {
    auto out = open_out(out_dir / "recon.txt");
    const auto& vocab = Vocabulary::toy();
    for (std::size_t i = 0; i < score.recons.size(); ++i) {
      out << vocab.render(std::get<TokenSequence>(split[i].input)) << '\t'
          << vocab.render(std::get<TokenSequence>(score.recons[i])) << '\n';
    }
  }
  write_resolved(app, out_dir / "resolved.cfg");
  std::cout << metric_name(metric) << ' ' << fmt(score.value) << " baseline " << fmt(base) << '\n';
}

void cmd_localize(const EvalOpts& o, const CLI::App& app) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const auto m = load_model(o.model);
  if (m.enc.form != TraceForm::SideChannel) {
    throw ConfigError("localization needs side-channel records; Prime+Probe traces are unsupported");
  }
  const auto ds = load_dataset(o.data);
  check_modality(m.model, ds);
  const auto split = pick_split(ds, o.split);

  std::optional<std::size_t> fixed_k;
  if (o.topk != "auto") {
    std::size_t k = 0;
    try {
      k = std::stoul(o.topk);
    } catch (const std::exception&) {
      throw ConfigError("--topk must be 'auto' or a positive integer");
    }
    if (k == 0) throw ConfigError("--topk must be positive");
    fixed_k = k;
  }

  LeakageAccumulator acc(ds.program.symbols);
  double precision = 0.0, leaky = 0.0;
  std::size_t k_used = 0;
  for (const auto& s : split) {
    const auto matrix = encode_trace(s.trace, m.enc, m.norm);
    const auto weights = attention_map(m.model, matrix);
    const auto k = fixed_k ? *fixed_k : default_topk(matrix.valid_len);
    k_used = k;
    const auto top = rank_records(weights, k);
    acc.add(top, s.trace, true);
    const auto truth = leak_ground_truth(ds.program, s.trace);
    precision += flagged_precision(top, truth);
    leaky += static_cast<double>(std::count(truth.begin(), truth.end(), true)) / static_cast<double>(truth.size());
  }
  const auto n = static_cast<double>(split.size());
  const auto report = acc.report();

  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  {
    auto out = open_out(out_dir / "leakage.csv");
    write_leakage_csv(out, report);
  }
  {
    auto out = open_out(out_dir / "addresses.txt");
    write_address_list(out, report);
  }
  {
    auto out = open_out(out_dir / "precision.csv");
    out << "topk,precision,leaky_fraction,samples\n"
        << (fixed_k ? std::to_string(*fixed_k) : "auto:" + std::to_string(k_used)) << ',' << fmt(precision / n)
        << ',' << fmt(leaky / n) << ',' << split.size() << '\n';
  }
  write_resolved(app, out_dir / "resolved.cfg");
  std::cout << "precision " << fmt(precision / n) << " leaky_fraction " << fmt(leaky / n) << '\n';
}

void cmd_defend(const EvalOpts& o, std::uint64_t seed, const CLI::App& app) {
  if (o.out.empty()) throw ConfigError("--out is required");
  auto m = load_model(o.model);
  const auto ds = load_dataset(o.data);
  check_modality(m.model, ds);
  const auto split = pick_split(ds, o.split);
  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);
  const BlindConfig blind{o.alpha};
  blind.validate();
  const bool continuous = m.model.spec().modality == Modality::Continuous;

  if (continuous) {
    const auto mask = draw_mask(parse_mask_family(o.mask), seed, ds.manifest.side);
    const auto r = evaluate_blinding(m.model, ds.program, split, m.enc, m.norm, mask, blind);
    const double base = mean_image_baseline(inputs_of(ds.train()), inputs_of(split));
    auto out = open_out(out_dir / "blinding.csv");
    out << "mask,alpha,mse_unblinded,mse_blinded,mse_blinded_to_mask,closer_to_mask,max_recovery_error,baseline,"
           "samples\n"
        << o.mask << ',' << fmt(r.alpha) << ',' << fmt(r.mse_unblinded) << ',' << fmt(r.mse_blinded) << ','
        << fmt(r.mse_blinded_to_mask) << ',' << fmt(r.closer_to_mask) << ',' << fmt(r.max_recovery_error) << ','
        << fmt(base) << ',' << r.samples << '\n';
    std::cout << "mse unblinded " << fmt(r.mse_unblinded) << " blinded " << fmt(r.mse_blinded) << '\n';
  } else {
    // Blinded sentences are longer than anything seen in training.
    m.enc.overflow = Overflow::Truncate;
    const auto r = evaluate_text_blinding(m.model, ds.program, split, m.enc, m.norm, blind);
    auto out = open_out(out_dir / "blinding.csv");
    out << "alpha,copies,accuracy_unblinded,accuracy_blinded,recovery_exact,baseline,samples\n"
        << fmt(r.alpha) << ',' << r.copies << ',' << fmt(r.accuracy_unblinded) << ',' << fmt(r.accuracy_blinded)
        << ',' << (r.recovery_exact ? "true" : "false") << ',' << fmt(random_word_baseline(Vocabulary::toy()))
        << ',' << r.samples << '\n';
    std::cout << "accuracy unblinded " << fmt(r.accuracy_unblinded) << " blinded " << fmt(r.accuracy_blinded)
              << '\n';
  }

  if (!o.noise.empty()) {
    const auto scheme = NoiseScheme::parse(o.noise, seed);
    const Metric metric = continuous ? Metric::Mse : Metric::WordAccuracy;
    const auto clean = attack_score(m, split, metric, nullptr, "eval");
    const auto noisy = attack_score(m, split, metric, &scheme, "eval");
    auto out = open_out(out_dir / "noise.csv");
    // wrongorder flattens the bit stream, so pairs may straddle two vectors
    const char* note = scheme.kind == NoiseKind::WrongOrder ? "exchanges_cross_vectors" : "";
    out << "scheme,metric,clean,noisy,baseline,samples,note\n"
        << scheme.name() << ',' << metric_name(metric) << ',' << fmt(clean.value) << ',' << fmt(noisy.value) << ','
        << fmt(baseline_for(metric, ds, split, m.model)) << ',' << split.size() << ',' << note << '\n';
    std::cout << scheme.name() << ' ' << metric_name(metric) << " clean " << fmt(clean.value) << " noisy "
              << fmt(noisy.value) << '\n';
  }
  write_resolved(app, out_dir / "resolved.cfg");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msca: side-channel attack workbench"};
  app.set_config("--config", "", "read options from a key=value file (as written to resolved.cfg)");
  app.fallthrough();
  app.require_subcommand(1);
  std::uint64_t seed = 7;
  app.add_option("--seed", seed, "base seed for every random stream")->capture_default_str();

  GenOpts gen;
  auto* c_gen = app.add_subcommand("gen", "generate a victim dataset directory");
  c_gen->add_option("--victim", gen.victim, "lookup, transform or hashcheck")->capture_default_str();
  c_gen->add_option("--n", gen.n, "total samples (train + test)")->required();
  c_gen->add_option("--test", gen.test, "test samples (default n/5)");
  c_gen->add_option("--side", gen.side, "image side for continuous victims")->capture_default_str();
  c_gen->add_option("--max-words", gen.max_words, "sentence length cap")->capture_default_str();
  c_gen->add_option("--out", gen.out, "dataset directory");

  FileOpts derive;
  auto* c_derive = app.add_subcommand("derive", "memory trace -> side-channel records");
  c_derive->add_option("input", derive.input, "memory trace file")->required();
  c_derive->add_option("--kind", derive.enc.kind, "cachebank, cacheline or pagetable")->capture_default_str();
  c_derive->add_option("-o,--output", derive.output, "output file (default stdout)");

  FileOpts fold_o;
  auto* c_fold = app.add_subcommand("fold", "side-channel or Prime+Probe file -> K x N x N matrix");
  c_fold->add_option("input", fold_o.input, "side-channel or Prime+Probe file")->required();
  fold_o.enc.add_shape(c_fold);
  c_fold->add_flag("--normalize", fold_o.normalize, "min-max scale side-channel records first");
  c_fold->add_option("-o,--output", fold_o.output, "output file (default stdout)");

  FileOpts pp;
  auto* c_pp = app.add_subcommand("pp", "simulate Prime+Probe on a memory trace");
  c_pp->add_option("input", pp.input, "memory trace file")->required();
  pp.enc.add_cache(c_pp);
  c_pp->add_option("-o,--output", pp.output, "output file (default stdout)");

  FileOpts noise;
  auto* c_noise = app.add_subcommand("noise", "apply a noise scheme to a trace file");
  c_noise->add_option("input", noise.input, "side-channel or Prime+Probe file")->required();
  c_noise->add_option("--scheme", noise.scheme, "e.g. gaussian-low, removal:30, wrongorder-high")->required();
  c_noise->add_option("-o,--output", noise.output, "output file (default stdout)");

  TrainOpts tr;
  auto* c_train = app.add_subcommand("train", "train the attack model on a dataset");
  c_train->add_option("--data", tr.data, "dataset directory");
  c_train->add_option("--out", tr.out, "output directory");
  tr.enc.add_all(c_train);
  c_train->add_option("--latent", tr.latent, "latent dimension")->capture_default_str();
  c_train->add_option("--conv", tr.conv, "encoder conv channels")->delimiter(',')->capture_default_str();
  c_train->add_option("--kernel", tr.kernel, "encoder conv kernel")->capture_default_str();
  c_train->add_option("--attention-kernel", tr.attention_kernel, "spatial attention kernel")->capture_default_str();
  c_train->add_option("--attention-reduction", tr.attention_reduction, "channel attention reduction")
      ->capture_default_str();
  c_train->add_option("--decoder-channels", tr.decoder_channels, "image decoder width")->capture_default_str();
  c_train->add_option("--disc-channels", tr.disc_channels, "discriminator width")->capture_default_str();
  c_train->add_option("--embed", tr.embed, "word embedding size")->capture_default_str();
  c_train->add_option("--hidden", tr.hidden, "recurrent state size")->capture_default_str();
  c_train->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "batch size")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  c_train->add_option("--lambda", tr.lambda, "explicit loss weight")->capture_default_str();
  c_train->add_option("--implicit", tr.implicit, "adversarial loss weight")->capture_default_str();
  c_train->add_option("--privacy", tr.privacy, "privacy loss weight")->capture_default_str();
  c_train->add_flag("--l1", tr.l1, "L1 instead of MSE for the explicit term");
  c_train->add_option("--noise", tr.noise, "noise schemes redrawn on the training traces every epoch")
      ->delimiter(',');
  c_train->add_flag("--noise-clean", tr.noise_clean, "keep clean traces among the per-epoch noise choices");

  EvalOpts at;
  auto* c_attack = app.add_subcommand("attack", "reconstruct inputs of a dataset split");
  c_attack->add_option("--model", at.model, "checkpoint from train");
  c_attack->add_option("--data", at.data, "dataset directory");
  c_attack->add_option("--split", at.split, "train or test")->capture_default_str();
  c_attack->add_option("--metric", at.metric, "mse, word_accuracy or privacy_match");
  c_attack->add_option("--noise", at.noise, "noise scheme applied to the traces first");
  c_attack->add_option("--out", at.out, "output directory");

  EvalOpts lo;
  auto* c_loc = app.add_subcommand("localize", "rank leaky records by attention and map them to code");
  c_loc->add_option("--model", lo.model, "checkpoint from train");
  c_loc->add_option("--data", lo.data, "dataset directory");
  c_loc->add_option("--split", lo.split, "train or test")->capture_default_str();
  c_loc->add_option("--topk", lo.topk, "records flagged per trace, or auto (0.1%)")->capture_default_str();
  c_loc->add_option("--out", lo.out, "output directory");

  EvalOpts de;
  auto* c_def = app.add_subcommand("defend", "evaluate perception blinding and noise against the attack");
  c_def->add_option("--model", de.model, "checkpoint from train");
  c_def->add_option("--data", de.data, "dataset directory");
  c_def->add_option("--split", de.split, "train or test")->capture_default_str();
  c_def->add_option("--mask", de.mask, "same-family or other-family")->capture_default_str();
  c_def->add_option("--alpha", de.alpha, "share of the private input, in (0, 0.5]")->capture_default_str();
  c_def->add_option("--noise", de.noise, "also report the attack under this noise scheme");
  c_def->add_option("--out", de.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*c_gen) cmd_gen(gen, seed, app);
    else if (*c_derive) cmd_derive(derive, app);
    else if (*c_fold) cmd_fold(fold_o, app);
    else if (*c_pp) cmd_pp(pp, app);
    else if (*c_noise) cmd_noise(noise, seed, app);
    else if (*c_train) cmd_train(tr, seed, app);
    else if (*c_attack) cmd_attack(at, seed, app);
    else if (*c_loc) cmd_localize(lo, app);
    else if (*c_def) cmd_defend(de, seed, app);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
