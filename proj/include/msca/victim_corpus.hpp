#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "msca/seeding.hpp"
#include "msca/trace_model.hpp"

namespace msca {

/// H x W image (or frame matrix) with values in [0, 1].
struct ContinuousMedia {
  Eigen::MatrixXd values;
};

/// Word indices framed by SOS ... EOS.
struct TokenSequence {
  std::vector<std::uint32_t> tokens;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

using MediaSample = std::variant<ContinuousMedia, TokenSequence>;

/// Fixed vocabulary: SOS, EOS, MASK, then the content words.
class Vocabulary {
 public:
  static constexpr std::uint32_t kSos = 0;
  static constexpr std::uint32_t kEos = 1;
  static constexpr std::uint32_t kMask = 2;
  static constexpr std::uint32_t kFirstWord = 3;

  /// The toy grammar's 32-word vocabulary.
  static const Vocabulary& toy();

  std::size_t size() const { return words_.size(); }
  std::size_t content_words() const { return words_.size() - kFirstWord; }
  const std::string& word(std::uint32_t id) const { return words_.at(id); }
  std::optional<std::uint32_t> find(std::string_view word) const;

  std::string render(const TokenSequence& seq) const;

 private:
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {}
  std::vector<std::string> words_;
};

struct SymbolRange {
  std::uint64_t begin = 0;  // inclusive
  std::uint64_t end = 0;    // exclusive
  std::string name;
};

/// Instruction-address ranges of the victim's functions. Ranges never overlap.
class SymbolMap {
 public:
  void add(std::uint64_t begin, std::uint64_t end, std::string name);
  std::optional<std::string_view> lookup(std::uint64_t ip) const;
  const std::vector<SymbolRange>& ranges() const { return ranges_; }

 private:
  std::vector<SymbolRange> ranges_;
};

enum class VictimId { Lookup, Transform, HashCheck };

std::string_view victim_name(VictimId id);
VictimId parse_victim(std::string_view name);

/// An interpreted access-pattern emitter. Each program walks its input,
/// emitting input-invariant scaffolding accesses plus one secret-indexed
/// access per element from its leaky function.
struct VictimProgram {
  VictimId id = VictimId::Lookup;
  std::uint64_t table_base = 0;    // secret-indexed table (lookup/transform/buckets)
  std::uint64_t table_stride = 64;
  std::uint64_t scratch_base = 0;  // input/output buffers, stack, constants
  unsigned quant_levels = 8;
  std::size_t buckets = 64;        // HashCheck only
  SymbolMap symbols;
  std::string leaky_function;

  static VictimProgram lookup();
  static VictimProgram transform();
  static VictimProgram hash_check();
  static VictimProgram make(VictimId id);

  bool is_continuous() const { return id != VictimId::HashCheck; }
  bool is_leaky(std::uint64_t ip) const;
  unsigned quantize(double v) const;
  std::uint64_t bucket_of(std::uint32_t token) const;
};

struct VictimRun {
  MemoryTrace trace;
  MediaSample output;
};

/// Throws ConfigError on modality mismatch (continuous program given tokens
/// or the reverse).
VictimRun run_victim(const VictimProgram& program, const MediaSample& input);

/// The public output map alone (linear in the input).
MediaSample victim_output(const VictimProgram& program, const MediaSample& input);

/// One record per access, true when it came from the leaky function.
std::vector<bool> leak_ground_truth(const VictimProgram& program, const MemoryTrace& trace);

// ---------------------------------------------------------------- datasets

/// Four latent factors (blob centre x/y, blob width, background level).
struct BlobFactors {
  double cx = 0, cy = 0, width = 0, background = 0;
};

ContinuousMedia render_blob(const BlobFactors& f, std::size_t side);
BlobFactors sample_blob_factors(Rng& rng, std::size_t side);
/// Privacy class of a blob sample: the quadrant holding its centre (0..3).
int blob_class(const BlobFactors& f, std::size_t side);
/// Oriented sinusoidal gratings: a different generative family.
ContinuousMedia sample_grating(Rng& rng, std::size_t side);
TokenSequence sample_sentence(Rng& rng, std::size_t max_words);

struct DatasetManifest {
  VictimId victim = VictimId::Lookup;
  std::size_t train = 512;
  std::size_t test = 128;
  std::uint64_t seed = 7;
  std::size_t side = 16;        // continuous samples are side x side
  std::size_t max_words = 12;   // token samples

  std::size_t count() const { return train + test; }
  void validate() const;
};

struct DatasetSample {
  MediaSample input;
  int label = 0;  // privacy class
  MemoryTrace trace;
  MediaSample output;
};

struct Dataset {
  DatasetManifest manifest;
  VictimProgram program;
  std::vector<DatasetSample> samples;  // train first, then test

  std::span<const DatasetSample> train() const { return {samples.data(), manifest.train}; }
  std::span<const DatasetSample> test() const {
    return {samples.data() + manifest.train, manifest.test};
  }
};

/// Seeded and reproducible; sample i draws from sub-stream "dataset/<i>".
/// Test samples never duplicate a training sample's content.
Dataset gen_dataset(const DatasetManifest& manifest);

void write_manifest(std::ostream& out, const DatasetManifest& m);
DatasetManifest read_manifest(std::istream& in);

/// "continuous H W label" + rows, or "tokens n label" + ids.
void write_sample(std::ostream& out, const MediaSample& s, int label = 0);
MediaSample read_sample(std::istream& in, int* label = nullptr);

}  // namespace msca
