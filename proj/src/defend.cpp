#include "msca/defend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msca/errors.hpp"

namespace msca {

void BlindConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw ConfigError("alpha must be in (0, 0.5] so that beta >> alpha (got " + std::to_string(alpha) + ")");
  }
}

std::size_t BlindConfig::copies() const {
  validate();
  const auto n = static_cast<long>(std::floor(1.0 / alpha + 1e-9)) - 1;
  if (n < 1) throw ConfigError("alpha too large: fewer than one mask word per original word");
  return static_cast<std::size_t>(n);
}

ContinuousMedia blind_continuous(const ContinuousMedia& input, const ContinuousMedia& mask,
                                 const BlindConfig& cfg) {
  cfg.validate();
  if (input.values.rows() != mask.values.rows() || input.values.cols() != mask.values.cols()) {
    throw ShapeError("mask shape differs from the input shape");
  }
  return {cfg.alpha * input.values + cfg.beta() * mask.values};
}

Eigen::MatrixXd unblind_output(const Eigen::MatrixXd& p_blinded, const Eigen::MatrixXd& p_mask,
                               double alpha) {
  BlindConfig{alpha}.validate();
  if (p_blinded.rows() != p_mask.rows() || p_blinded.cols() != p_mask.cols()) {
    throw ShapeError("blinded output and mask output differ in shape");
  }
  return (p_blinded - (1.0 - alpha) * p_mask) / alpha;
}

namespace {

void check_framed(const TokenSequence& s) {
  if (s.tokens.size() < 2 || s.tokens.front() != Vocabulary::kSos || s.tokens.back() != Vocabulary::kEos) {
    throw DataError("token sequence must be framed by SOS ... EOS");
  }
}

}  // namespace

TokenSequence blind_text(const TokenSequence& tokens, const BlindConfig& cfg) {
  const auto n = cfg.copies();
  check_framed(tokens);
  if (cfg.mask_word >= Vocabulary::toy().size() || cfg.mask_word == Vocabulary::kSos ||
      cfg.mask_word == Vocabulary::kEos) {
    throw ConfigError("mask word must be a non-sentinel vocabulary entry");
  }
  TokenSequence out;
  out.tokens.push_back(Vocabulary::kSos);
  for (std::size_t i = 1; i + 1 < tokens.tokens.size(); ++i) {
    out.tokens.push_back(tokens.tokens[i]);
    out.tokens.insert(out.tokens.end(), n, cfg.mask_word);
  }
  out.tokens.push_back(Vocabulary::kEos);
  return out;
}

TokenSequence unblind_text(const TokenSequence& blinded, const BlindConfig& cfg) {
  const auto n = cfg.copies();
  check_framed(blinded);
  const auto body = blinded.tokens.size() - 2;
  if (body % (n + 1) != 0) throw DataError("blinded sequence length is not a multiple of N + 1");
  TokenSequence out;
  out.tokens.push_back(Vocabulary::kSos);
  for (std::size_t i = 1; i + 1 < blinded.tokens.size(); i += n + 1) out.tokens.push_back(blinded.tokens[i]);
  out.tokens.push_back(Vocabulary::kEos);
  return out;
}

// ------------------------------------------------------------------- noise

namespace {

struct Preset {
  const char* name;
  NoiseKind kind;
  double low, high;
};

constexpr Preset kPresets[] = {
    {"gaussian", NoiseKind::Gaussian, 0.2, 0.5},
    {"removal", NoiseKind::Removal, 20, 50},
    {"shift", NoiseKind::RoundShift, 10, 100},
    {"leaveout", NoiseKind::LeaveOut, 20, 50},
    {"falsehitmiss", NoiseKind::FalseHitMiss, 20, 50},
    {"wrongorder", NoiseKind::WrongOrder, 100, 500},
};

const Preset* find_kind(std::string_view name) {
  if (name == "roundshift") name = "shift";
  for (const auto& p : kPresets)
    if (name == p.name) return &p;
  return nullptr;
}

/// k distinct positions out of n, in draw order.
std::vector<std::size_t> pick(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, n - 1);
    std::swap(idx[i], idx[d(rng)]);
  }
  idx.resize(k);
  return idx;
}

std::size_t percent_of(double pct, std::size_t n) {
  return static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(n)));
}

}  // namespace

NoiseScheme NoiseScheme::parse(std::string_view name, std::uint64_t seed) {
  NoiseScheme s;
  s.seed = seed;
  const auto colon = name.find(':');
  const auto dash = name.rfind('-');
  if (colon != std::string_view::npos) {
    const auto* p = find_kind(name.substr(0, colon));
    if (!p) throw ConfigError("unknown noise scheme '" + std::string(name) + "'");
    s.kind = p->kind;
    try {
      s.param = std::stod(std::string(name.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("bad noise parameter in '" + std::string(name) + "'");
    }
  } else if (dash != std::string_view::npos) {
    const auto* p = find_kind(name.substr(0, dash));
    const auto level = name.substr(dash + 1);
    if (!p || (level != "low" && level != "high")) {
      throw ConfigError("unknown noise preset '" + std::string(name) + "'");
    }
    s.kind = p->kind;
    s.param = level == "low" ? p->low : p->high;
  } else {
    throw ConfigError("noise scheme must be '<kind>-low', '<kind>-high' or '<kind>:<param>', got '" +
                      std::string(name) + "'");
  }
  s.validate();
  return s;
}

std::vector<std::string> NoiseScheme::preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) {
    out.push_back(std::string(p.name) + "-low");
    out.push_back(std::string(p.name) + "-high");
  }
  return out;
}

bool NoiseScheme::on_scalar() const {
  return kind == NoiseKind::Gaussian || kind == NoiseKind::Removal || kind == NoiseKind::RoundShift;
}

std::string NoiseScheme::name() const {
  for (const auto& p : kPresets) {
    if (p.kind != kind) continue;
    if (param == p.low) return std::string(p.name) + "-low";
    if (param == p.high) return std::string(p.name) + "-high";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s:%g", p.name, param);
    return buf;
  }
  return "?";
}

void NoiseScheme::validate() const {
  switch (kind) {
    case NoiseKind::Gaussian:
      if (!(param >= 0.0 && param <= 1.0)) throw ConfigError("gaussian weight must be in [0, 1]");
      break;
    case NoiseKind::Removal:
    case NoiseKind::LeaveOut:
    case NoiseKind::FalseHitMiss:
      if (!(param >= 0.0 && param <= 100.0)) throw ConfigError("percentage must be in [0, 100]");
      break;
    case NoiseKind::RoundShift:
    case NoiseKind::WrongOrder:
      if (!(param >= 0.0) || param != std::floor(param)) throw ConfigError("count must be a non-negative integer");
      break;
  }
}

std::vector<double> apply_noise(std::span<const double> trace, const NoiseScheme& scheme, Rng& rng) {
  scheme.validate();
  if (!scheme.on_scalar()) {
    throw ConfigError("noise scheme " + scheme.name() + " applies to Prime+Probe records, not scalar traces");
  }
  std::vector<double> out(trace.begin(), trace.end());
  const auto n = out.size();
  switch (scheme.kind) {
    case NoiseKind::Gaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& d : out) d = gaussian_mix(d, normal(rng), scheme.param);
      break;
    }
    case NoiseKind::Removal: {
      std::vector<bool> drop(n, false);
      for (auto i : pick(n, percent_of(scheme.param, n), rng)) drop[i] = true;
      std::vector<double> kept;
      for (std::size_t i = 0; i < n; ++i)
        if (!drop[i]) kept.push_back(out[i]);
      out = std::move(kept);
      break;
    }
    case NoiseKind::RoundShift:
      if (n > 0) {
        const auto steps = static_cast<std::size_t>(scheme.param) % n;
        std::rotate(out.begin(), out.end() - static_cast<std::ptrdiff_t>(steps), out.end());
      }
      break;
    default:
      break;
  }
  return out;
}

PPTrace apply_noise(const PPTrace& trace, const NoiseScheme& scheme, Rng& rng) {
  scheme.validate();
  if (scheme.on_scalar()) {
    throw ConfigError("noise scheme " + scheme.name() + " applies to scalar traces, not Prime+Probe records");
  }
  const auto s = trace.config.num_sets;
  std::vector<std::uint8_t> bits;
  for (const auto& v : trace.vectors) bits.insert(bits.end(), v.begin(), v.end());
  const auto n = bits.size();
  switch (scheme.kind) {
    case NoiseKind::LeaveOut: {
      // Drop x% of the observed cache-set records.
      std::vector<std::size_t> ones;
      for (std::size_t i = 0; i < n; ++i)
        if (bits[i]) ones.push_back(i);
      for (auto j : pick(ones.size(), percent_of(scheme.param, ones.size()), rng)) bits[ones[j]] = 0;
      break;
    }
    case NoiseKind::FalseHitMiss:
      for (auto i : pick(n, percent_of(scheme.param, n), rng)) bits[i] ^= 1;
      break;
    case NoiseKind::WrongOrder: {
      const auto x = static_cast<std::size_t>(scheme.param);
      if (x > n) {
        throw ConfigError("wrongorder needs " + std::to_string(x) + " records but the trace has " +
                          std::to_string(n));
      }
      const auto chosen = pick(n, x, rng);
      for (std::size_t i = 0; i + 1 < chosen.size(); i += 2) std::swap(bits[chosen[i]], bits[chosen[i + 1]]);
      break;
    }
    default:
      break;
  }
  PPTrace out{{}, trace.config, trace.repeats};
  for (std::size_t v = 0; v < trace.vectors.size(); ++v) {
    out.vectors.emplace_back(bits.begin() + static_cast<std::ptrdiff_t>(v * s),
                             bits.begin() + static_cast<std::ptrdiff_t>((v + 1) * s));
  }
  return out;
}

std::vector<double> apply_noise(std::span<const double> trace, const NoiseScheme& scheme) {
  auto rng = make_rng(scheme.seed, "noise");
  return apply_noise(trace, scheme, rng);
}

PPTrace apply_noise(const PPTrace& trace, const NoiseScheme& scheme) {
  auto rng = make_rng(scheme.seed, "noise");
  return apply_noise(trace, scheme, rng);
}

}  // namespace msca
