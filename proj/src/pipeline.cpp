#include "msca/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>

#include "msca/errors.hpp"

namespace msca {

Observation observe(const MemoryTrace& trace, const TraceEncoding& enc) {
  Observation obs;
  obs.form = enc.form;
  if (enc.form == TraceForm::SideChannel) {
    obs.scalar = derive_side_channel(trace, enc.kind);
  } else {
    obs.pp = repeat_concat(trace, enc.cache, enc.epoch_len, enc.repeats);
  }
  return obs;
}

NormStats fit_encoding_norm(std::span<const DatasetSample> train, const TraceEncoding& enc) {
  if (enc.form == TraceForm::PrimeProbe) return {0.0, 1.0};
  std::vector<SideChannelTrace> traces;
  traces.reserve(train.size());
  for (const auto& s : train) traces.push_back(derive_side_channel(s.trace, enc.kind));
  return fit_norm(traces);
}

TraceMatrix encode_observation(const Observation& obs, const TraceEncoding& enc, const NormStats& norm,
                               const NoiseScheme* noise, std::string_view stream) {
  Rng rng;
  if (noise) rng = make_rng(noise->seed, "noise/" + std::string(stream));
  if (obs.form == TraceForm::SideChannel) {
    auto values = normalize_records(obs.scalar, norm);
    if (noise) values = apply_noise(values, *noise, rng);
    return fold(values, enc.shape, enc.overflow);
  }
  if (noise) return encode_pp(apply_noise(obs.pp, *noise, rng).vectors, enc.shape, enc.overflow);
  return encode_pp(obs.pp.vectors, enc.shape, enc.overflow);
}

TraceMatrix encode_trace(const MemoryTrace& trace, const TraceEncoding& enc, const NormStats& norm,
                         const NoiseScheme* noise, std::string_view stream) {
  return encode_observation(observe(trace, enc), enc, norm, noise, stream);
}

std::vector<TrainExample> make_examples(std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                        const NormStats& norm, const NoiseScheme* noise,
                                        std::string_view tag) {
  std::vector<TrainExample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({encode_trace(samples[i].trace, enc, norm, noise, std::string(tag) + "/" + std::to_string(i)),
                   samples[i].input, samples[i].label});
  }
  return out;
}

std::function<void(std::size_t, std::vector<TrainExample>&)> noisy_refresh(
    std::span<const DatasetSample> samples, const TraceEncoding& enc, const NormStats& norm,
    std::vector<NoiseScheme> schemes, bool include_clean) {
  if (schemes.empty()) throw ConfigError("noisy training needs at least one noise scheme");
  auto obs = std::make_shared<std::vector<Observation>>();
  for (const auto& s : samples) obs->push_back(observe(s.trace, enc));
  return [obs, enc, norm, schemes = std::move(schemes), include_clean](std::size_t epoch,
                                                                        std::vector<TrainExample>& examples) {
    const auto options = schemes.size() + (include_clean ? 1 : 0);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto stream = "train/" + std::to_string(epoch) + "/" + std::to_string(i);
      std::size_t pick = 0;
      if (options > 1) {
        auto rng = make_rng(schemes.front().seed, "pick/" + stream);
        pick = std::uniform_int_distribution<std::size_t>(0, options - 1)(rng);
      }
      const NoiseScheme* scheme = pick < schemes.size() ? &schemes[pick] : nullptr;
      examples[i].matrix = encode_observation((*obs)[i], enc, norm, scheme, stream);
    }
  };
}

std::vector<MediaSample> reconstruct_all(const AttackModel& model, std::span<const TrainExample> examples) {
  std::vector<MediaSample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(model.reconstruct(e.matrix));
  return out;
}

std::vector<MediaSample> targets_of(std::span<const TrainExample> examples) {
  std::vector<MediaSample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.target);
  return out;
}

MaskFamily parse_mask_family(std::string_view name) {
  if (name == "same-family" || name == "same") return MaskFamily::Same;
  if (name == "other-family" || name == "other") return MaskFamily::Other;
  throw ConfigError("unknown mask family '" + std::string(name) + "' (expected same-family or other-family)");
}

ContinuousMedia draw_mask(MaskFamily family, std::uint64_t seed, std::size_t side) {
  auto rng = make_rng(seed, "mask");
  if (family == MaskFamily::Same) return render_blob(sample_blob_factors(rng, side), side);
  return sample_grating(rng, side);
}

namespace {

Eigen::MatrixXd output_matrix(const MediaSample& s) {
  const auto* c = std::get_if<ContinuousMedia>(&s);
  if (!c) throw ConfigError("continuous blinding needs a continuous victim output");
  return c->values;
}

}  // namespace

BlindingReport evaluate_blinding(const AttackModel& model, const VictimProgram& program,
                                 std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                 const NormStats& norm, const ContinuousMedia& mask, const BlindConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw DataError("blinding evaluation needs at least one sample");
  BlindingReport r;
  r.alpha = cfg.alpha;
  r.samples = samples.size();
  const auto p_mask = output_matrix(victim_output(program, mask));
  std::size_t closer = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& input = std::get<ContinuousMedia>(samples[i].input);
    const auto plain = std::get<ContinuousMedia>(model.reconstruct(encode_trace(samples[i].trace, enc, norm)));

    const auto blinded_in = blind_continuous(input, mask, cfg);
    const auto run = run_victim(program, blinded_in);
    const auto recon = std::get<ContinuousMedia>(model.reconstruct(encode_trace(run.trace, enc, norm)));

    const double to_private = sample_mse(recon, input);
    const double to_mask = sample_mse(recon, mask);
    r.mse_unblinded += sample_mse(plain, input);
    r.mse_blinded += to_private;
    r.mse_blinded_to_mask += to_mask;
    closer += to_mask < to_private;

    const auto recovered = unblind_output(output_matrix(run.output), p_mask, cfg.alpha);
    const auto truth = output_matrix(samples[i].output);
    const double scale = std::max(truth.cwiseAbs().maxCoeff(), 1e-300);
    r.max_recovery_error = std::max(r.max_recovery_error, (recovered - truth).cwiseAbs().maxCoeff() / scale);
  }
  const double n = static_cast<double>(samples.size());
  r.mse_unblinded /= n;
  r.mse_blinded /= n;
  r.mse_blinded_to_mask /= n;
  r.closer_to_mask = static_cast<double>(closer) / n;
  return r;
}

TextBlindingReport evaluate_text_blinding(const AttackModel& model, const VictimProgram& program,
                                          std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                          const NormStats& norm, const BlindConfig& cfg) {
  TextBlindingReport r;
  r.alpha = cfg.alpha;
  r.copies = cfg.copies();
  r.samples = samples.size();
  if (samples.empty()) throw DataError("blinding evaluation needs at least one sample");
  for (const auto& s : samples) {
    const auto& tokens = std::get<TokenSequence>(s.input);
    const auto plain = std::get<TokenSequence>(model.reconstruct(encode_trace(s.trace, enc, norm)));
    const auto blinded = blind_text(tokens, cfg);
    const auto run = run_victim(program, blinded);
    const auto recon = std::get<TokenSequence>(model.reconstruct(encode_trace(run.trace, enc, norm)));
    r.accuracy_unblinded += word_accuracy(tokens, plain);
    r.accuracy_blinded += word_accuracy(tokens, recon);
    if (unblind_text(std::get<TokenSequence>(run.output), cfg) != std::get<TokenSequence>(s.output)) {
      r.recovery_exact = false;
    }
  }
  r.accuracy_unblinded /= static_cast<double>(samples.size());
  r.accuracy_blinded /= static_cast<double>(samples.size());
  return r;
}

namespace {

std::string numbered(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.%s", i, ext);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const char* sub : {"samples", "traces", "outputs"}) fs::create_directories(dir / sub);
  {
    auto out = open_out(dir / "manifest.txt");
    write_manifest(out, ds.manifest);
  }
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    auto a = open_out(dir / "samples" / numbered(i, "sample"));
    write_sample(a, s.input, s.label);
    auto b = open_out(dir / "traces" / numbered(i, "trace"));
    write_memory_trace(b, s.trace);
    auto c = open_out(dir / "outputs" / numbered(i, "sample"));
    write_sample(c, s.output);
    if (!a || !b || !c) throw DataError("write failed for sample " + std::to_string(i) + " in " + dir.string());
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  {
    auto in = open_in(dir / "manifest.txt");
    ds.manifest = read_manifest(in);
  }
  ds.manifest.validate();
  ds.program = VictimProgram::make(ds.manifest.victim);
  ds.samples.resize(ds.manifest.count());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    auto& s = ds.samples[i];
    auto a = open_in(dir / "samples" / numbered(i, "sample"));
    auto b = open_in(dir / "traces" / numbered(i, "trace"));
    auto c = open_in(dir / "outputs" / numbered(i, "sample"));
    try {
      s.input = read_sample(a, &s.label);
      s.trace = parse_memory_trace(b, std::string(victim_name(ds.manifest.victim)));
      s.output = read_sample(c);
    } catch (const DataError& e) {
      throw DataError(dir.string() + ", sample " + std::to_string(i) + ": " + e.what());
    }
  }
  return ds;
}

void write_pgm(std::ostream& out, const ContinuousMedia& image) {
  const auto& v = image.values;
  out << "P5\n" << v.cols() << ' ' << v.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const double x = std::clamp(v(r, c), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0))));
    }
  }
}

namespace {

std::string exact(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

const std::string& need(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw DataError("missing header key '" + key + "'");
  return it->second;
}

double to_double(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc()) throw DataError("bad number '" + s + "'");
  return v;
}

}  // namespace

void encoding_to_header(const TraceEncoding& enc, const NormStats& norm,
                        std::map<std::string, std::string>& h) {
  h["encoding.form"] = enc.form == TraceForm::SideChannel ? "sidechannel" : "primeprobe";
  h["encoding.kind"] = enc.kind.name();
  h["encoding.sets"] = std::to_string(enc.cache.num_sets);
  h["encoding.ways"] = std::to_string(enc.cache.ways);
  h["encoding.line_size"] = std::to_string(enc.cache.line_size);
  h["encoding.epoch_len"] = std::to_string(enc.epoch_len);
  h["encoding.repeats"] = std::to_string(enc.repeats);
  h["encoding.channels"] = std::to_string(enc.shape.channels);
  h["encoding.side"] = std::to_string(enc.shape.side);
  h["encoding.overflow"] = enc.overflow == Overflow::Error ? "error" : "truncate";
  h["encoding.norm_min"] = exact(norm.min);
  h["encoding.norm_max"] = exact(norm.max);
}

std::pair<TraceEncoding, NormStats> encoding_from_header(const std::map<std::string, std::string>& h) {
  TraceEncoding enc;
  const auto& form = need(h, "encoding.form");
  if (form == "sidechannel") enc.form = TraceForm::SideChannel;
  else if (form == "primeprobe") enc.form = TraceForm::PrimeProbe;
  else throw DataError("unknown encoding.form '" + form + "'");
  enc.kind = ChannelKind::parse(need(h, "encoding.kind"));
  auto size = [&](const char* key) { return static_cast<std::size_t>(std::stoull(need(h, key))); };
  enc.cache.num_sets = size("encoding.sets");
  enc.cache.ways = size("encoding.ways");
  enc.cache.line_size = size("encoding.line_size");
  enc.epoch_len = size("encoding.epoch_len");
  enc.repeats = size("encoding.repeats");
  enc.shape = {size("encoding.channels"), size("encoding.side")};
  enc.overflow = need(h, "encoding.overflow") == "truncate" ? Overflow::Truncate : Overflow::Error;
  NormStats norm{to_double(need(h, "encoding.norm_min")), to_double(need(h, "encoding.norm_max"))};
  return {enc, norm};
}

}  // namespace msca
