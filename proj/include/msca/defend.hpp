#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msca/cache_sim.hpp"
#include "msca/seeding.hpp"
#include "msca/victim_corpus.hpp"

namespace msca {

// ---------------------------------------------------------------- blinding

/// i_blinded = alpha * i + (1 - alpha) * mask. alpha must lie in (0, 0.5].
struct BlindConfig {
  double alpha = 0.1;
  std::uint32_t mask_word = Vocabulary::kMask;

  void validate() const;
  double beta() const { return 1.0 - alpha; }
  /// Mask words inserted after each original word: floor(1/alpha) - 1.
  std::size_t copies() const;
};

/// No clamping: the result stays in real space so recovery is exact.
ContinuousMedia blind_continuous(const ContinuousMedia& input, const ContinuousMedia& mask,
                                 const BlindConfig& cfg);
/// (P_blinded - (1 - alpha) * P_mask) / alpha, elementwise.
Eigen::MatrixXd unblind_output(const Eigen::MatrixXd& p_blinded, const Eigen::MatrixXd& p_mask,
                               double alpha);

TokenSequence blind_text(const TokenSequence& tokens, const BlindConfig& cfg);
TokenSequence unblind_text(const TokenSequence& blinded, const BlindConfig& cfg);

// ------------------------------------------------------------------- noise

enum class NoiseKind { Gaussian, Removal, RoundShift, LeaveOut, FalseHitMiss, WrongOrder };

struct NoiseScheme {
  NoiseKind kind = NoiseKind::Gaussian;
  double param = 0.2;  // x, x% or steps depending on kind
  std::uint64_t seed = 0;

  /// "gaussian-low", "removal-high", "shift-low" (alias "roundshift-low"),
  /// "leaveout-*", "falsehitmiss-*", "wrongorder-*", or "<kind>:<param>".
  static NoiseScheme parse(std::string_view name, std::uint64_t seed = 0);
  static std::vector<std::string> preset_names();

  /// Gaussian, Removal and RoundShift act on scalar traces; the others on
  /// Prime+Probe bit records.
  bool on_scalar() const;
  std::string name() const;
  void validate() const;
};

/// x * n + (1 - x) * d.
inline double gaussian_mix(double d, double n, double x) { return x * n + (1.0 - x) * d; }

/// Throws ConfigError when the scheme targets Prime+Probe records.
std::vector<double> apply_noise(std::span<const double> trace, const NoiseScheme& scheme, Rng& rng);
/// Throws ConfigError for scalar-only schemes. WrongOrder exchanges may cross
/// activity-vector boundaries.
PPTrace apply_noise(const PPTrace& trace, const NoiseScheme& scheme, Rng& rng);

/// Same, drawing from the scheme's own "noise" sub-stream.
std::vector<double> apply_noise(std::span<const double> trace, const NoiseScheme& scheme);
PPTrace apply_noise(const PPTrace& trace, const NoiseScheme& scheme);

}  // namespace msca
