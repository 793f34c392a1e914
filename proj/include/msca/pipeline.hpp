#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "msca/cache_sim.hpp"
#include "msca/defend.hpp"
#include "msca/sca_model.hpp"
#include "msca/trace_repr.hpp"
#include "msca/victim_corpus.hpp"

namespace msca {

enum class TraceForm { SideChannel, PrimeProbe };

/// How an attacker's view of one execution becomes an encoder input.
struct TraceEncoding {
  TraceForm form = TraceForm::SideChannel;
  ChannelKind kind = ChannelKind::cache_line();
  CacheConfig cache;
  std::size_t epoch_len = 40;
  std::size_t repeats = 1;
  MatrixShape shape{1, 64};
  Overflow overflow = Overflow::Error;
};

/// Side-channel records or Prime+Probe vectors for one memory trace.
struct Observation {
  TraceForm form = TraceForm::SideChannel;
  SideChannelTrace scalar;
  PPTrace pp;
};

Observation observe(const MemoryTrace& trace, const TraceEncoding& enc);

/// Min-max over the training traces (side channels); {0, 1} for bit records.
NormStats fit_encoding_norm(std::span<const DatasetSample> train, const TraceEncoding& enc);

/// Normalize (scalar) -> optional noise -> fold. Noise draws from sub-stream
/// "noise/<stream>" of the scheme's seed.
TraceMatrix encode_observation(const Observation& obs, const TraceEncoding& enc, const NormStats& norm,
                               const NoiseScheme* noise = nullptr, std::string_view stream = "");
TraceMatrix encode_trace(const MemoryTrace& trace, const TraceEncoding& enc, const NormStats& norm,
                         const NoiseScheme* noise = nullptr, std::string_view stream = "");

/// Example i is encoded with noise stream "<tag>/<i>".
std::vector<TrainExample> make_examples(std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                        const NormStats& norm, const NoiseScheme* noise = nullptr,
                                        std::string_view tag = "eval");

/// A TrainConfig::refresh hook that redraws the noise of every training
/// example each epoch (stream "train/<epoch>/<i>"). With several schemes,
/// each example picks one uniformly per epoch, or stays clean when
/// `include_clean` adds that option. Observations are computed once up front.
std::function<void(std::size_t, std::vector<TrainExample>&)> noisy_refresh(
    std::span<const DatasetSample> samples, const TraceEncoding& enc, const NormStats& norm,
    std::vector<NoiseScheme> schemes, bool include_clean = false);

/// Model reconstructions of every example, in order.
std::vector<MediaSample> reconstruct_all(const AttackModel& model, std::span<const TrainExample> examples);
std::vector<MediaSample> targets_of(std::span<const TrainExample> examples);

enum class MaskFamily { Same, Other };
MaskFamily parse_mask_family(std::string_view name);
/// One blob ("same-family") or grating ("other-family") mask, drawn from
/// sub-stream "mask" of `seed`.
ContinuousMedia draw_mask(MaskFamily family, std::uint64_t seed, std::size_t side);

/// Attack on blinded inputs versus the unblinded attack, plus the exact
/// output-recovery check, over a set of continuous samples.
struct BlindingReport {
  double alpha = 0.0;
  double mse_unblinded = 0.0;       // recon(trace(i)) vs i
  double mse_blinded = 0.0;         // recon(trace(blind(i))) vs i
  double mse_blinded_to_mask = 0.0; // recon(trace(blind(i))) vs mask
  double closer_to_mask = 0.0;      // fraction with mse to mask < mse to i
  double max_recovery_error = 0.0;  // max |recovered - P(i)| / max |P(i)|
  std::size_t samples = 0;
};

BlindingReport evaluate_blinding(const AttackModel& model, const VictimProgram& program,
                                 std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                 const NormStats& norm, const ContinuousMedia& mask, const BlindConfig& cfg);

/// Text analog: word accuracy of the attack on blinded sentences against the
/// originals, and whether unblind_text recovers every victim output exactly.
struct TextBlindingReport {
  double alpha = 0.0;
  std::size_t copies = 0;
  double accuracy_unblinded = 0.0;
  double accuracy_blinded = 0.0;
  bool recovery_exact = true;
  std::size_t samples = 0;
};

TextBlindingReport evaluate_text_blinding(const AttackModel& model, const VictimProgram& program,
                                          std::span<const DatasetSample> samples, const TraceEncoding& enc,
                                          const NormStats& norm, const BlindConfig& cfg);

/// Dataset directory: manifest.txt, then samples/, traces/ and outputs/
/// holding one file per sample (NNNNN.sample, NNNNN.trace, NNNNN.sample).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Throws DataError when a file is missing or does not parse.
Dataset load_dataset(const std::filesystem::path& dir);

/// 8-bit binary graymap (P5), values clamped to [0, 1].
void write_pgm(std::ostream& out, const ContinuousMedia& image);

/// Key=value round trip, stored in checkpoint headers under "encoding.*".
void encoding_to_header(const TraceEncoding& enc, const NormStats& norm,
                        std::map<std::string, std::string>& header);
std::pair<TraceEncoding, NormStats> encoding_from_header(const std::map<std::string, std::string>& header);

}  // namespace msca
