#include "msca/victim_corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "msca/errors.hpp"

namespace msca {

namespace {

// Function layout shared by all toy programs: each gets a 0x100-byte block
// of "code"; access sites are 4 bytes apart.
constexpr std::uint64_t kSite = 4;

struct Emitter {
  MemoryTrace& trace;
  void operator()(std::uint64_t ip, std::uint64_t addr) {
    trace.records.push_back({ip, addr});
  }
};

const std::vector<std::string>& determiners() {
  static const std::vector<std::string> w{"the", "a", "every", "some"};
  return w;
}
const std::vector<std::string>& adjectives() {
  static const std::vector<std::string> w{"red", "quick", "lazy", "old", "small", "bright"};
  return w;
}
const std::vector<std::string>& nouns() {
  static const std::vector<std::string> w{"dog", "cat", "bird", "fox", "horse", "child", "robot", "tree"};
  return w;
}
const std::vector<std::string>& verbs() {
  static const std::vector<std::string> w{"sees", "chases", "likes", "finds", "hears", "helps"};
  return w;
}
const std::vector<std::string>& prepositions() {
  static const std::vector<std::string> w{"near", "under", "behind", "with"};
  return w;
}
const std::vector<std::string>& adverbs() {
  static const std::vector<std::string> w{"quietly", "often", "today", "again"};
  return w;
}

const ContinuousMedia& expect_continuous(const VictimProgram& p, const MediaSample& s) {
  const auto* c = std::get_if<ContinuousMedia>(&s);
  if (!c) {
    throw ConfigError(std::string(victim_name(p.id)) + " victim expects continuous media");
  }
  return *c;
}

const TokenSequence& expect_tokens(const VictimProgram& p, const MediaSample& s) {
  const auto* t = std::get_if<TokenSequence>(&s);
  if (!t) throw ConfigError(std::string(victim_name(p.id)) + " victim expects a token sequence");
  return *t;
}

// Lookup victim: per pixel, thirteen scaffolding accesses around one
// table[quantized pixel] load (the Huffman-extend pattern).
MemoryTrace run_lookup(const VictimProgram& p, const ContinuousMedia& in) {
  MemoryTrace trace;
  trace.victim_id = "lookup";
  Emitter emit{trace};
  const auto code = p.symbols.ranges();
  const std::uint64_t decode = code[0].begin, leak = code[1].begin, store = code[2].begin;
  const std::uint64_t src = p.scratch_base, dst = p.scratch_base + 0x100,
                      stack = p.scratch_base + 0x200, coef = p.scratch_base + 0x240,
                      quant = p.scratch_base + 0x280, header = p.scratch_base + 0x2c0;

  for (std::uint64_t i = 0; i < 16; ++i) emit(decode + kSite * (16 + i % 4), header + 4 * i);
  const auto rows = static_cast<std::size_t>(in.values.rows());
  const auto cols = static_cast<std::size_t>(in.values.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::uint64_t px = r * cols + c;
      const auto s = p.quantize(in.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      emit(decode + kSite * 0, src + px % 0x100);
      emit(decode + kSite * 1, stack);
      emit(decode + kSite * 2, coef + (px % 8) * 8);
      emit(decode + kSite * 3, stack + 8);
      emit(leak + kSite * 4, p.table_base + s * p.table_stride);
      emit(decode + kSite * 5, quant + (px % 8) * 8);
      emit(decode + kSite * 6, stack + 16);
      emit(decode + kSite * 8, coef + 32 + (px % 4) * 8);
      emit(decode + kSite * 9, stack + 24);
      emit(decode + kSite * 10, quant + 32 + (px % 4) * 8);
      emit(store + kSite * 0, dst + px % 0x100);
      emit(store + kSite * 1, stack + 32);
      emit(decode + kSite * 11, header + (px % 16) * 4);
      emit(decode + kSite * 7, stack);
    }
  }
  for (std::uint64_t i = 0; i < 8; ++i) emit(store + kSite * (8 + i % 2), stack + 8 * (i % 3));
  return trace;
}

// Transform victim: per frame row, transform[s][i] * src[i * step] loads
// with s the quantized sample.
MemoryTrace run_transform(const VictimProgram& p, const ContinuousMedia& in) {
  MemoryTrace trace;
  trace.victim_id = "transform";
  Emitter emit{trace};
  const auto code = p.symbols.ranges();
  const std::uint64_t frame = code[0].begin, leak = code[1].begin, store = code[2].begin;
  const std::uint64_t src = p.scratch_base, dst = p.scratch_base + 0x800,
                      state = p.scratch_base + 0x1000;
  const auto rows = static_cast<std::uint64_t>(in.values.rows());
  const auto cols = static_cast<std::uint64_t>(in.values.cols());
  for (std::uint64_t r = 0; r < rows; ++r) {
    emit(frame + kSite * 0, state);
    emit(frame + kSite * 1, state + 8);
    for (std::uint64_t i = 0; i < cols; ++i) {
      const auto s = p.quantize(in.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)));
      emit(frame + kSite * 2, src + ((r * cols + i) * 8) % 0x800);
      emit(leak + kSite * 0, p.table_base + (s * cols + i) * 8);
      emit(store + kSite * 0, dst + ((r * cols + i) * 8) % 0x800);
    }
  }
  return trace;
}

// HashCheck victim: per word, dictionary bucket probe at hash(word).
MemoryTrace run_hash_check(const VictimProgram& p, const TokenSequence& in) {
  MemoryTrace trace;
  trace.victim_id = "hashcheck";
  Emitter emit{trace};
  const auto code = p.symbols.ranges();
  const std::uint64_t check = code[0].begin, leak = code[1].begin, report = code[2].begin;
  const std::uint64_t input = p.scratch_base, header = p.scratch_base + 0x40,
                      stack = p.scratch_base + 0x80, result = p.scratch_base + 0xc0;
  for (std::uint64_t i = 0; i < 8; ++i) emit(check + kSite * (8 + i % 2), header + 8 * (i % 4));
  std::uint64_t pos = 0;
  for (auto tok : in.tokens) {
    if (tok == Vocabulary::kSos || tok == Vocabulary::kEos) continue;
    emit(check + kSite * 0, input + (pos * 8) % 0x40);
    emit(check + kSite * 1, header);
    emit(check + kSite * 2, stack);
    emit(leak + kSite * 0, p.table_base + p.bucket_of(tok) * p.table_stride);
    emit(check + kSite * 3, stack + 8);
    emit(report + kSite * 0, result + pos % 0x40);
    ++pos;
  }
  for (std::uint64_t i = 0; i < 4; ++i) emit(report + kSite * 4, stack + 8 * i);
  return trace;
}

// Orthonormal DCT-II basis, used as TransformVictim's public output map.
Eigen::MatrixXd dct_matrix(Eigen::Index n) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      m(k, i) = scale * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                 static_cast<double>(k) / static_cast<double>(n));
    }
  }
  return m;
}

std::string content_key(const MediaSample& s) {
  std::ostringstream os;
  write_sample(os, s);
  return os.str();
}

}  // namespace

// ------------------------------------------------------------- vocabulary

const Vocabulary& Vocabulary::toy() {
  static const Vocabulary vocab = [] {
    std::vector<std::string> words{"<sos>", "<eos>", "<mask>"};
    for (const auto* group : {&determiners(), &adjectives(), &nouns(), &verbs(),
                              &prepositions(), &adverbs()}) {
      words.insert(words.end(), group->begin(), group->end());
    }
    return Vocabulary(std::move(words));
  }();
  return vocab;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view word) const {
  const auto it = std::find(words_.begin(), words_.end(), word);
  if (it == words_.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - words_.begin());
}

std::string Vocabulary::render(const TokenSequence& seq) const {
  std::string out;
  for (auto t : seq.tokens) {
    if (!out.empty()) out += ' ';
    out += t < words_.size() ? words_[t] : "<?>";
  }
  return out;
}

// ------------------------------------------------------------- symbol map

void SymbolMap::add(std::uint64_t begin, std::uint64_t end, std::string name) {
  if (end <= begin) throw ConfigError("symbol range for '" + name + "' is empty");
  for (const auto& r : ranges_) {
    if (begin < r.end && r.begin < end) {
      throw ConfigError("symbol range for '" + name + "' overlaps '" + r.name + "'");
    }
  }
  ranges_.push_back({begin, end, std::move(name)});
}

std::optional<std::string_view> SymbolMap::lookup(std::uint64_t ip) const {
  for (const auto& r : ranges_) {
    if (ip >= r.begin && ip < r.end) return std::string_view(r.name);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- victims

std::string_view victim_name(VictimId id) {
  switch (id) {
    case VictimId::Lookup: return "lookup";
    case VictimId::Transform: return "transform";
    case VictimId::HashCheck: return "hashcheck";
  }
  return "?";
}

VictimId parse_victim(std::string_view name) {
  if (name == "lookup") return VictimId::Lookup;
  if (name == "transform") return VictimId::Transform;
  if (name == "hashcheck") return VictimId::HashCheck;
  throw ConfigError("unknown victim '" + std::string(name) +
                    "' (expected lookup, transform or hashcheck)");
}

VictimProgram VictimProgram::lookup() {
  VictimProgram p;
  p.id = VictimId::Lookup;
  p.table_base = 0x10000;
  p.table_stride = 64;
  p.scratch_base = 0xfd00;
  p.symbols.add(0x401000, 0x401100, "decode_mcu");
  p.symbols.add(0x401100, 0x401200, "huff_extend");
  p.symbols.add(0x401200, 0x401300, "emit_pixels");
  p.leaky_function = "huff_extend";
  return p;
}

VictimProgram VictimProgram::transform() {
  VictimProgram p;
  p.id = VictimId::Transform;
  p.table_base = 0x20000;
  p.table_stride = 8;
  p.scratch_base = 0x30000;
  p.symbols.add(0x402000, 0x402100, "imdct_frame");
  p.symbols.add(0x402100, 0x402200, "transform_row");
  p.symbols.add(0x402200, 0x402300, "store_frame");
  p.leaky_function = "transform_row";
  return p;
}

VictimProgram VictimProgram::hash_check() {
  VictimProgram p;
  p.id = VictimId::HashCheck;
  p.table_base = 0x20000;
  p.table_stride = 64;
  p.scratch_base = 0x21000;
  p.buckets = 64;
  p.symbols.add(0x403000, 0x403100, "spell_check");
  p.symbols.add(0x403100, 0x403200, "hash_lookup");
  p.symbols.add(0x403200, 0x403300, "report_word");
  p.leaky_function = "hash_lookup";
  return p;
}

VictimProgram VictimProgram::make(VictimId id) {
  switch (id) {
    case VictimId::Lookup: return lookup();
    case VictimId::Transform: return transform();
    case VictimId::HashCheck: return hash_check();
  }
  return lookup();
}

bool VictimProgram::is_leaky(std::uint64_t ip) const {
  const auto fn = symbols.lookup(ip);
  return fn && *fn == leaky_function;
}

unsigned VictimProgram::quantize(double v) const {
  const double scaled = std::floor(v * quant_levels);
  if (!(scaled > 0.0)) return 0;
  return std::min(quant_levels - 1, static_cast<unsigned>(scaled));
}

std::uint64_t VictimProgram::bucket_of(std::uint32_t token) const {
  // 37 is odd, so this is a bijection on [0, 64) and distinct words never share a bucket.
  return (static_cast<std::uint64_t>(token) * 37 + 11) % buckets;
}

MediaSample victim_output(const VictimProgram& p, const MediaSample& input) {
  switch (p.id) {
    case VictimId::Lookup:
      return ContinuousMedia{2.0 * expect_continuous(p, input).values};
    case VictimId::Transform: {
      const auto& x = expect_continuous(p, input).values;
      return ContinuousMedia{x * dct_matrix(x.cols()).transpose()};
    }
    case VictimId::HashCheck:
      return expect_tokens(p, input);
  }
  return input;
}

VictimRun run_victim(const VictimProgram& p, const MediaSample& input) {
  VictimRun run;
  switch (p.id) {
    case VictimId::Lookup: run.trace = run_lookup(p, expect_continuous(p, input)); break;
    case VictimId::Transform: run.trace = run_transform(p, expect_continuous(p, input)); break;
    case VictimId::HashCheck: run.trace = run_hash_check(p, expect_tokens(p, input)); break;
  }
  run.output = victim_output(p, input);
  return run;
}

std::vector<bool> leak_ground_truth(const VictimProgram& p, const MemoryTrace& trace) {
  std::vector<bool> truth;
  truth.reserve(trace.records.size());
  for (const auto& r : trace.records) truth.push_back(p.is_leaky(r.instruction_address));
  return truth;
}

// ---------------------------------------------------------------- families

ContinuousMedia render_blob(const BlobFactors& f, std::size_t side) {
  const auto n = static_cast<Eigen::Index>(side);
  Eigen::MatrixXd img(n, n);
  for (Eigen::Index y = 0; y < n; ++y) {
    for (Eigen::Index x = 0; x < n; ++x) {
      const double dx = static_cast<double>(x) - f.cx, dy = static_cast<double>(y) - f.cy;
      const double blob = std::exp(-(dx * dx + dy * dy) / (2.0 * f.width * f.width));
      img(y, x) = f.background + (1.0 - f.background) * blob;
    }
  }
  return {std::move(img)};
}

BlobFactors sample_blob_factors(Rng& rng, std::size_t side) {
  const double s = static_cast<double>(side);
  std::uniform_real_distribution<double> centre(0.15 * s, 0.85 * s);
  std::uniform_real_distribution<double> width(0.1 * s, 0.25 * s);
  std::uniform_real_distribution<double> background(0.0, 0.4);
  BlobFactors f;
  f.cx = centre(rng);
  f.cy = centre(rng);
  f.width = width(rng);
  f.background = background(rng);
  return f;
}

int blob_class(const BlobFactors& f, std::size_t side) {
  const double mid = (static_cast<double>(side) - 1.0) / 2.0;
  return (f.cx >= mid ? 1 : 0) + (f.cy >= mid ? 2 : 0);
}

ContinuousMedia sample_grating(Rng& rng, std::size_t side) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> period(2.0, 6.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double theta = angle(rng), lambda = period(rng), phi = phase(rng);
  const auto n = static_cast<Eigen::Index>(side);
  Eigen::MatrixXd img(n, n);
  for (Eigen::Index y = 0; y < n; ++y) {
    for (Eigen::Index x = 0; x < n; ++x) {
      const double u = static_cast<double>(x) * std::cos(theta) + static_cast<double>(y) * std::sin(theta);
      img(y, x) = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * u / lambda + phi);
    }
  }
  return {std::move(img)};
}

TokenSequence sample_sentence(Rng& rng, std::size_t max_words) {
  const auto& vocab = Vocabulary::toy();
  std::bernoulli_distribution coin_adj(0.5), coin_pp(0.3), coin_adv(0.3);
  auto pick = [&](const std::vector<std::string>& group) {
    std::uniform_int_distribution<std::size_t> d(0, group.size() - 1);
    return *vocab.find(group[d(rng)]);
  };
  std::vector<std::uint32_t> words;
  auto noun_phrase = [&](bool allow_adj) {
    words.push_back(pick(determiners()));
    if (allow_adj && coin_adj(rng)) words.push_back(pick(adjectives()));
    words.push_back(pick(nouns()));
  };
  noun_phrase(true);
  words.push_back(pick(verbs()));
  noun_phrase(true);
  if (coin_pp(rng)) {
    words.push_back(pick(prepositions()));
    noun_phrase(false);
  }
  if (coin_adv(rng)) words.push_back(pick(adverbs()));
  if (words.size() > max_words) words.resize(max_words);

  TokenSequence seq;
  seq.tokens.push_back(Vocabulary::kSos);
  seq.tokens.insert(seq.tokens.end(), words.begin(), words.end());
  seq.tokens.push_back(Vocabulary::kEos);
  return seq;
}

// ---------------------------------------------------------------- datasets

void DatasetManifest::validate() const {
  if (train == 0 || test == 0) throw ConfigError("dataset needs at least one train and one test sample");
  if (side == 0) throw ConfigError("sample side must be positive");
  if (max_words == 0) throw ConfigError("max_words must be positive");
}

Dataset gen_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  Dataset ds{manifest, VictimProgram::make(manifest.victim), {}};
  ds.samples.reserve(manifest.count());
  std::set<std::string> train_keys;
  for (std::size_t i = 0; i < manifest.count(); ++i) {
    const bool is_test = i >= manifest.train;
    for (std::size_t attempt = 0;; ++attempt) {
      auto rng = make_rng(manifest.seed, "dataset/" + std::to_string(i) + "/" + std::to_string(attempt));
      DatasetSample s;
      if (ds.program.is_continuous()) {
        const auto f = sample_blob_factors(rng, manifest.side);
        s.input = render_blob(f, manifest.side);
        s.label = blob_class(f, manifest.side);
      } else {
        s.input = sample_sentence(rng, manifest.max_words);
        s.label = 0;
      }
      auto key = content_key(s.input);
      if (is_test && train_keys.contains(key)) continue;
      if (!is_test) train_keys.insert(std::move(key));
      auto run = run_victim(ds.program, s.input);
      s.trace = std::move(run.trace);
      s.output = std::move(run.output);
      ds.samples.push_back(std::move(s));
      break;
    }
  }
  return ds;
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << "victim=" << victim_name(m.victim) << '\n'
      << "train=" << m.train << '\n'
      << "test=" << m.test << '\n'
      << "seed=" << m.seed << '\n'
      << "side=" << m.side << '\n'
      << "max_words=" << m.max_words << '\n';
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const auto key = line.substr(0, eq), value = line.substr(eq + 1);
    auto number = [&]() -> std::uint64_t {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw ParseError(line_no, "expected an unsigned integer for '" + key + "'");
      }
      return v;
    };
    if (key == "victim") m.victim = parse_victim(value);
    else if (key == "train") m.train = number();
    else if (key == "test") m.test = number();
    else if (key == "seed") m.seed = number();
    else if (key == "side") m.side = number();
    else if (key == "max_words") m.max_words = number();
    else throw ParseError(line_no, "unknown manifest key '" + key + "'");
  }
  m.validate();
  return m;
}

void write_sample(std::ostream& out, const MediaSample& s, int label) {
  char buf[64];
  if (const auto* c = std::get_if<ContinuousMedia>(&s)) {
    out << "continuous " << c->values.rows() << ' ' << c->values.cols() << ' ' << label << '\n';
    for (Eigen::Index r = 0; r < c->values.rows(); ++r) {
      for (Eigen::Index col = 0; col < c->values.cols(); ++col) {
        auto res = std::to_chars(buf, buf + sizeof(buf), c->values(r, col));
        if (col) out.put(' ');
        out.write(buf, res.ptr - buf);
      }
      out.put('\n');
    }
  } else {
    const auto& t = std::get<TokenSequence>(s);
    out << "tokens " << t.tokens.size() << ' ' << label << '\n';
    for (std::size_t i = 0; i < t.tokens.size(); ++i) out << (i ? " " : "") << t.tokens[i];
    out << '\n';
  }
}

MediaSample read_sample(std::istream& in, int* label) {
  std::string kind;
  if (!(in >> kind)) throw DataError("empty sample file");
  int lab = 0;
  if (kind == "continuous") {
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> rows >> cols >> lab) || rows <= 0 || cols <= 0) {
      throw DataError("bad continuous sample header");
    }
    Eigen::MatrixXd values(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(in >> values(r, c))) throw DataError("continuous sample truncated");
    if (label) *label = lab;
    return ContinuousMedia{std::move(values)};
  }
  if (kind == "tokens") {
    std::size_t n = 0;
    if (!(in >> n >> lab)) throw DataError("bad token sample header");
    TokenSequence t;
    t.tokens.resize(n);
    for (auto& tok : t.tokens)
      if (!(in >> tok)) throw DataError("token sample truncated");
    if (label) *label = lab;
    return t;
  }
  throw DataError("unknown sample kind '" + kind + "'");
}

}  // namespace msca
