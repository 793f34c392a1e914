// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: msca_acceptance [work_dir]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "msca/cache_sim.hpp"
#include "msca/defend.hpp"
#include "msca/localize.hpp"
#include "msca/neural/adam.hpp"
#include "msca/neural/grad_check.hpp"
#include "msca/neural/recurrent.hpp"
#include "msca/neural/sequential.hpp"
#include "msca/pipeline.hpp"
#include "msca/sca_model.hpp"
#include "msca/trace_model.hpp"
#include "msca/trace_repr.hpp"

using namespace msca;
using neural::Shape;
using neural::Tensor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(int id, bool ok, const std::string& detail, double seconds, double budget) {
  const bool in_time = seconds <= budget;
  if (!ok || !in_time) ++failures;
  char buf[96];
  std::snprintf(buf, sizeof(buf), " [%.1fs, budget %.0fs%s]", seconds, budget, in_time ? "" : ", over budget");
  std::cout << (ok && in_time ? "PASS" : "FAIL") << " criterion " << id << ": " << detail << buf << std::endl;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

// ------------------------------------------------------------- criterion 1

void criterion1() {
  const auto t0 = Clock::now();
  const auto bank = ChannelKind::cache_bank(), line = ChannelKind::cache_line(), page = ChannelKind::page_table();
  bool ok = bank.derive(4096) == 1024 && line.derive(4096) == 64 && page.derive(4096) == 4096 &&
            page.derive(8191) == 4096;
  Rng rng(101);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t a = rng();
    // division by 4 / 64 and subtraction of the remainder mod 4096
    bad += bank.derive(a) != a / 4 || line.derive(a) != a / 64 || page.derive(a) != a - a % 4096;
  }
  MemoryTrace t;
  for (int i = 0; i < 50; ++i) t.records.push_back({rng(), rng()});
  const auto sc = derive_side_channel(t, line);
  for (std::size_t i = 0; i < t.records.size(); ++i) bad += sc.records[i] != t.records[i].memory_address / 64;
  ok = ok && bad == 0;
  report(1, ok, "1000 random addresses + worked cases, mismatches " + std::to_string(bad), since(t0), 1);
}

// ------------------------------------------------------------- criterion 2

void criterion2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  std::size_t bad = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const MatrixShape shape{1 + rng() % 4, 1 + rng() % 32};
    const std::size_t len = rng() % (shape.capacity() + 1);
    std::vector<double> v(len);
    for (auto& x : v) x = static_cast<double>(rng() % 100000) / 7.0;
    const auto m = fold(v, shape);
    if (m.valid_len != len || static_cast<std::size_t>(m.values.size()) != shape.capacity()) {
      ++bad;
      continue;
    }
    std::vector<int> seen(len, 0);
    for (std::size_t flat = 0; flat < shape.capacity(); ++flat) {
      const auto pos = unfold_index(flat, shape, len);
      const CellIndex cell{flat / shape.plane(), (flat % shape.plane()) / shape.side, flat % shape.side};
      if (unfold_index(cell, shape, len) != pos) ++bad;
      if (!pos) {
        bad += flat < len;
        continue;
      }
      if (*pos >= len || m.values[static_cast<Eigen::Index>(flat)] != v[*pos]) ++bad;
      else ++seen[*pos];
    }
    bad += static_cast<std::size_t>(std::count_if(seen.begin(), seen.end(), [](int s) { return s != 1; }));
  }
  report(2, bad == 0, "1000 random (length, K, N) fold/unfold round trips, mismatches " + std::to_string(bad),
         since(t0), 5);
}

// ------------------------------------------------------------- criterion 3

double check_layer(const neural::LayerSpec& spec, Shape input, Rng& rng) {
  std::vector<Tensor> params;
  for (const auto& s : neural::param_shapes(spec)) params.push_back(random_tensor(s, rng, 0.5));
  return neural::grad_check_layer(spec, params, random_tensor(std::move(input), rng), rng).max_relative_error;
}

double check_sequential(neural::Sequential& net, Tensor x, Rng& rng) {
  for (auto& layer : net.params())
    for (auto& p : layer) p = random_tensor(p.shape(), rng, 0.5);
  auto pass = net.forward(x);
  const auto probe = random_tensor(pass.output.shape(), rng);
  auto grads = net.zero_grads();
  const auto gx = net.backward(pass, probe, grads);
  std::vector<Tensor*> vars;
  std::vector<Tensor> analytic;
  for (std::size_t l = 0; l < net.params().size(); ++l)
    for (std::size_t p = 0; p < net.params()[l].size(); ++p) {
      vars.push_back(&net.params()[l][p]);
      analytic.push_back(grads[l][p]);
    }
  vars.push_back(&x);
  analytic.push_back(gx);
  return neural::grad_check([&] { return net.forward(x).output.data().dot(probe.data()); }, vars, analytic)
      .max_relative_error;
}

ModelSpec mini_spec(Modality modality) {
  ModelSpec s;
  s.modality = modality;
  s.encoder.input = {1, 8};
  s.encoder.conv_channels = {2, 2};
  s.encoder.latent_dim = 4;
  s.image_side = 8;
  s.decoder_channels = 2;
  s.decoder_base = 4;
  s.disc_channels = 2;
  s.privacy_classes = 3;
  if (modality == Modality::Sequence) {
    s.vocab_size = 8;
    s.embed_dim = 3;
    s.hidden_dim = 5;
    s.max_words = 4;
  }
  return s;
}

std::vector<Tensor*> randomized(std::vector<neural::NamedTensor> named, Rng& rng) {
  std::vector<Tensor*> out;
  for (auto& n : named) {
    *n.tensor = random_tensor(n.tensor->shape(), rng, 0.3);
    out.push_back(n.tensor);
  }
  return out;
}

std::vector<Tensor> copies(const std::vector<Tensor*>& ptrs) {
  std::vector<Tensor> out;
  for (auto* p : ptrs) out.push_back(*p);
  return out;
}

void criterion3() {
  using namespace neural;
  const auto t0 = Clock::now();
  Rng rng(303);
  std::map<std::string, double> worst;
  auto note = [&](const std::string& name, double e) { worst[name] = std::max(worst[name], e); };

  note("Conv2D", check_layer(Conv2D{2, 3, 3, 1, 1}, {2, 6, 6}, rng));
  note("Conv2D", check_layer(Conv2D{2, 4, 3, 2, 1}, {2, 7, 7}, rng));
  note("FullyConnected", check_layer(FullyConnected{7, 5}, {7}, rng));
  note("ReLU", check_layer(ReLU{}, {3, 4, 4}, rng));
  note("Sigmoid", check_layer(Sigmoid{}, {10}, rng));
  note("Tanh", check_layer(Tanh{}, {10}, rng));
  note("NearestUpsample", check_layer(NearestUpsample{2}, {2, 3, 3}, rng));
  note("ChannelAttention", check_layer(ChannelAttention{4, 2}, {4, 5, 5}, rng));
  note("SpatialAttention", check_layer(SpatialAttention{7}, {3, 8, 8}, rng));
  note("Softmax", check_layer(Softmax{}, {6}, rng));
  note("Reshape", check_layer(Reshape{{2, 3, 3}}, {18}, rng));

  {
    const GruCell cell{5, 4};
    auto params = cell.init_params(rng);
    auto x = random_tensor({5}, rng), h = random_tensor({4}, rng);
    const auto probe = random_tensor({4}, rng);
    GruStepCache cache;
    gru_forward(cell, params, x.data(), h.data(), &cache);
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.emplace_back(p.shape());
    const auto g = gru_backward(cell, params, cache, probe.data(), grads);
    std::vector<Tensor*> vars;
    std::vector<Tensor> analytic = grads;
    for (auto& p : params) vars.push_back(&p);
    vars.push_back(&x);
    analytic.emplace_back(Shape{5}, g.grad_x);
    vars.push_back(&h);
    analytic.emplace_back(Shape{4}, g.grad_h_prev);
    note("GRU", grad_check([&] { return gru_forward(cell, params, x.data(), h.data(), nullptr).dot(probe.data()); },
                           vars, analytic)
                    .max_relative_error);
  }

  {
    Sequential pair({ChannelAttention{4, 2}, SpatialAttention{7}});
    pair.init(rng);
    note("attention pair", check_sequential(pair, random_tensor({4, 8, 8}, rng), rng));
  }

  for (auto metric : {ExplicitMetric::Mse, ExplicitMetric::L1}) {
    LossWeights w;
    w.metric = metric;
    auto recon = random_tensor({12}, rng), ref = random_tensor({12}, rng), priv = random_tensor({4}, rng);
    auto logit = random_tensor({1}, rng);
    const auto t = total_loss(recon.data(), ref.data(), logit[0], priv.data(), 2, w);
    std::vector<Tensor*> vars{&recon, &logit, &priv};
    const std::vector<Tensor> analytic{Tensor({12}, t.grad_recon),
                                       Tensor({1}, Eigen::VectorXd::Constant(1, t.grad_realism_logit)),
                                       Tensor({4}, t.grad_privacy_logits)};
    note("total_loss", grad_check([&] { return total_loss(recon.data(), ref.data(), logit[0], priv.data(), 2, w).total; },
                                  vars, analytic)
                           .max_relative_error);
  }

  {
    // full miniature stack: encoder + decoder + discriminator through the objective
    AttackModel m(mini_spec(Modality::Continuous));
    m.init(3);
    std::vector<double> v(59);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : v) x = u(rng);
    ContinuousMedia img{Eigen::MatrixXd(8, 8)};
    for (Eigen::Index i = 0; i < img.values.size(); ++i) img.values(i) = u(rng);
    const TrainExample ex{fold(v, {1, 8}), img, 1};
    LossWeights w;
    w.lambda = 2.0;
    auto gp = randomized(m.generator_parameters(), rng);
    auto grads = m.zero_grads();
    m.generator_objective(ex, w, &grads);
    note("encoder+decoder stack",
         grad_check([&] { return m.generator_objective(ex, w, nullptr).total; }, gp,
                    copies(AttackModel::generator_grads(grads, Modality::Continuous)))
             .max_relative_error);

    ContinuousMedia fake{Eigen::MatrixXd(8, 8)};
    for (Eigen::Index i = 0; i < fake.values.size(); ++i) fake.values(i) = u(rng);
    auto dp = randomized(m.discriminator_parameters(), rng);
    auto dgrads = m.zero_grads();
    m.discriminator_objective(MediaSample{img}, fake, 2, &dgrads);
    note("discriminator stack",
         grad_check([&] { return m.discriminator_objective(MediaSample{img}, fake, 2, nullptr); }, dp,
                    copies(AttackModel::discriminator_grads(dgrads)))
             .max_relative_error);

    AttackModel s(mini_spec(Modality::Sequence));
    s.init(4);
    const TrainExample tex{fold(v, {1, 8}), TokenSequence{{0, 4, 6, 3, 1}}, 0};
    auto sp = randomized(s.generator_parameters(), rng);
    auto sgrads = s.zero_grads();
    s.generator_objective(tex, LossWeights{}, &sgrads);
    note("encoder+sequence decoder stack",
         grad_check([&] { return s.generator_objective(tex, LossWeights{}, nullptr).total; }, sp,
                    copies(AttackModel::generator_grads(sgrads, Modality::Sequence)))
             .max_relative_error);
  }

  double max_err = 0;
  std::string worst_name;
  for (const auto& [name, e] : worst)
    if (e >= max_err) {
      max_err = e;
      worst_name = name;
    }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu gradient checks, max relative error %.3g (%s) < 1e-4", worst.size(), max_err,
                worst_name.c_str());
  report(3, max_err < 1e-4, buf, since(t0), 60);
}

// ------------------------------------------------------------- criterion 4

void criterion4() {
  const auto t0 = Clock::now();
  Tensor a = Tensor::constant({4}, 0.3), g = Tensor::constant({4}, 1.0);
  std::vector<Tensor*> params{&a}, grads{&g};
  neural::AdamState state;
  neural::adam_step(params, grads, state);
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs((a[i] - 0.3) + 0.0002));
  const bool moments = std::abs(state.m[0][0] - 0.1) < 1e-15 && std::abs(state.v[0][0] - 0.001) < 1e-15;
  report(4, worst < 1e-7 && moments, fmt("max |dtheta + 0.0002| = %.3g, moments m=%.3g", worst, state.m[0][0]),
         since(t0), 1);
}

// ------------------------------------------------------------- criterion 5

void criterion5() {
  const auto t0 = Clock::now();
  Rng rng(505);
  std::size_t mismatches = 0, empty = 0, vectors = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t sets = iter % 2 ? 64 : 4;
    const std::size_t ways = std::array<std::size_t, 3>{1, 2, 8}[iter % 3];
    const CacheConfig cfg{sets, ways, 64};
    MemoryTrace t;
    const std::size_t n = 1 + rng() % 150;
    const std::uint64_t span = 64 * sets * (1 + rng() % 16);
    for (std::size_t i = 0; i < n; ++i) t.records.push_back({0x400000 + 4 * (rng() % 64), 0x100000 + rng() % span});
    const std::size_t epoch = 1 + rng() % 12;
    const auto a = simulate_prime_probe(t, cfg, epoch);
    const auto b = reference_prime_probe(t, cfg, epoch);
    mismatches += a.vectors != b.vectors;
    for (const auto& v : a.vectors) {
      ++vectors;
      empty += std::count(v.begin(), v.end(), 1) == 0;
    }
  }
  report(5, mismatches == 0 && empty == 0,
         "1000 random victims: " + std::to_string(mismatches) + " mismatches, " + std::to_string(empty) +
             " all-zero vectors of " + std::to_string(vectors),
         since(t0), 30);
}

// ----------------------------------------------------------- criteria 6-10

struct Timed {
  bool ok = false;
  std::string detail;
  double seconds = 0;
};

struct SuiteResult {
  std::map<int, Timed> c;
};

std::vector<MediaSample> recon_of(const AttackModel& m, const std::vector<TrainExample>& ex) {
  return reconstruct_all(m, ex);
}

void write_csv(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

std::vector<NoiseScheme> low_presets(bool pp) {
  std::vector<NoiseScheme> v;
  for (const char* n : pp ? std::array<const char*, 3>{"leaveout-low", "falsehitmiss-low", "wrongorder-low"}
                          : std::array<const char*, 3>{"gaussian-low", "removal-low", "shift-low"})
    v.push_back(NoiseScheme::parse(n, 3));
  return v;
}

DatasetManifest manifest(VictimId v) {
  DatasetManifest m;
  m.victim = v;
  m.train = 512;
  m.test = 128;
  m.seed = 7;
  m.side = 16;
  return m;
}

ModelSpec continuous_spec(const TraceEncoding& enc) {
  ModelSpec spec;
  spec.encoder.input = enc.shape;
  spec.encoder.latent_dim = 32;
  spec.image_side = 16;
  return spec;
}

ModelSpec text_spec(const TraceEncoding& enc) {
  ModelSpec spec;
  spec.modality = Modality::Sequence;
  spec.encoder.input = enc.shape;
  spec.encoder.latent_dim = 32;
  spec.encoder.conv_channels = {4, 4};
  spec.vocab_size = Vocabulary::toy().size();
  return spec;
}

TrainConfig train_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.learning_rate = 1e-3;
  cfg.batch = 64;
  cfg.seed = 1;
  return cfg;
}

SuiteResult run_suite(const fs::path& dir) {
  fs::create_directories(dir);
  SuiteResult res;

  // -- 6: continuous attack on the lookup victim
  auto t0 = Clock::now();
  const auto ds = gen_dataset(manifest(VictimId::Lookup));
  TraceEncoding enc;
  enc.shape = {1, 64};
  const auto norm = fit_encoding_norm(ds.train(), enc);
  const auto tr = make_examples(ds.train(), enc, norm);
  const auto te = make_examples(ds.test(), enc, norm);
  const auto model = train(tr, continuous_spec(enc), train_config(20)).model;
  const auto refs = targets_of(te);
  const auto train_refs = targets_of(tr);
  const double mse = evaluate(recon_of(model, te), refs, Metric::Mse).mean;
  const double base = mean_image_baseline(train_refs, refs);
  res.c[6] = {mse <= 0.5 * base, fmt("test MSE %.5f vs 0.5 x mean-image baseline %.5f", mse, 0.5 * base), since(t0)};
  write_csv(dir / "c6.csv", "metric,value,baseline,samples\nmse," + num(mse) + "," + num(base) + "," +
                                std::to_string(te.size()) + "\n");

  // -- 8: localization on the same model
  t0 = Clock::now();
  double precision = 0, leaky = 0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    const auto truth = leak_ground_truth(ds.program, ds.test()[i].trace);
    const auto top = rank_records(attention_map(model, te[i].matrix), 20);
    precision += flagged_precision(top, truth);
    leaky += static_cast<double>(std::count(truth.begin(), truth.end(), true)) / static_cast<double>(truth.size());
  }
  precision /= static_cast<double>(te.size());
  leaky /= static_cast<double>(te.size());
  res.c[8] = {precision >= 3 * leaky, fmt("top-20 precision %.4f vs 3 x leaky fraction %.4f", precision, 3 * leaky),
              since(t0)};
  write_csv(dir / "c8.csv", "topk,precision,leaky_fraction,samples\n20," + num(precision) + "," + num(leaky) + "," +
                                std::to_string(te.size()) + "\n");

  // -- 9: blinding with a same-family mask
  t0 = Clock::now();
  const auto mask = draw_mask(MaskFamily::Same, 7, 16);
  const auto br = evaluate_blinding(model, ds.program, ds.test(), enc, norm, mask, BlindConfig{0.1});
  const bool c9 = br.mse_blinded >= 2 * br.mse_unblinded && br.closer_to_mask >= 0.8 && br.max_recovery_error < 1e-9;
  char buf9[256];
  std::snprintf(buf9, sizeof(buf9),
                "blinded MSE %.5f vs 2 x unblinded %.5f, closer to mask on %.3f of samples, recovery error %.2g",
                br.mse_blinded, 2 * br.mse_unblinded, br.closer_to_mask, br.max_recovery_error);
  res.c[9] = {c9, buf9, since(t0)};
  write_csv(dir / "c9.csv",
            "alpha,mse_unblinded,mse_blinded,mse_blinded_to_mask,closer_to_mask,max_recovery_error,samples\n" +
                num(br.alpha) + "," + num(br.mse_unblinded) + "," + num(br.mse_blinded) + "," +
                num(br.mse_blinded_to_mask) + "," + num(br.closer_to_mask) + "," + num(br.max_recovery_error) + "," +
                std::to_string(br.samples) + "\n");

  // -- 7: text attack on the hash-check victim
  t0 = Clock::now();
  const auto tds = gen_dataset(manifest(VictimId::HashCheck));
  TraceEncoding tenc;
  tenc.shape = {1, 16};
  const auto tnorm = fit_encoding_norm(tds.train(), tenc);
  const auto ttr = make_examples(tds.train(), tenc, tnorm);
  const auto tte = make_examples(tds.test(), tenc, tnorm);
  const auto tmodel = train(ttr, text_spec(tenc), train_config(100)).model;
  const auto trefs = targets_of(tte);
  const double acc = evaluate(recon_of(tmodel, tte), trefs, Metric::WordAccuracy).mean;
  const double rnd = random_word_baseline(Vocabulary::toy());
  res.c[7] = {acc >= 5 * rnd, fmt("word accuracy %.4f vs 5 x random %.4f", acc, 5 * rnd), since(t0)};
  write_csv(dir / "c7.csv", "metric,value,baseline,samples\nword_accuracy," + num(acc) + "," + num(rnd) + "," +
                                std::to_string(tte.size()) + "\n");

  // -- 10: Low presets, one noise-profiled model per (victim, trace form)
  t0 = Clock::now();
  std::string csv = "victim,form,scheme,metric,value,baseline,samples\n";
  bool all = true;
  std::string worst;
  double worst_margin = 1e300;
  struct Setup {
    const Dataset* ds;
    TraceForm form;
    std::size_t epoch_len, side, epochs;
  };
  const std::array<Setup, 4> setups{{{&ds, TraceForm::SideChannel, 0, 64, 40},
                                     {&ds, TraceForm::PrimeProbe, 64, 64, 20},
                                     {&tds, TraceForm::SideChannel, 0, 16, 100},
                                     {&tds, TraceForm::PrimeProbe, 6, 32, 100}}};
  for (const auto& s : setups) {
    const bool text = !s.ds->program.is_continuous();
    const bool pp = s.form == TraceForm::PrimeProbe;
    TraceEncoding e;
    e.form = s.form;
    e.shape = {1, s.side};
    if (pp) e.epoch_len = s.epoch_len;
    const auto n = fit_encoding_norm(s.ds->train(), e);
    const auto schemes = low_presets(pp);
    auto cfg = train_config(s.epochs);
    cfg.refresh = noisy_refresh(s.ds->train(), e, n, schemes, true);
    const auto ex = make_examples(s.ds->train(), e, n);
    const auto m = train(ex, text ? text_spec(e) : continuous_spec(e), cfg).model;
    for (const auto& scheme : schemes) {
      const auto noisy = make_examples(s.ds->test(), e, n, &scheme);
      const auto r = targets_of(noisy);
      const auto ev = evaluate(recon_of(m, noisy), r, text ? Metric::WordAccuracy : Metric::Mse);
      const double b = text ? random_word_baseline(Vocabulary::toy()) : mean_image_baseline(targets_of(ex), r);
      const bool ok = text ? ev.mean > 2 * b : ev.mean < b;
      const double margin = text ? ev.mean / (2 * b) : b / ev.mean;
      const std::string label = std::string(text ? "hashcheck" : "lookup") + "/" + (pp ? "primeprobe" : "sidechannel") +
                                "/" + scheme.name();
      if (margin < worst_margin) {
        worst_margin = margin;
        worst = label + fmt(text ? " (accuracy %.4f vs 2 x random %.4f)" : " (MSE %.5f vs baseline %.5f)", ev.mean,
                            text ? 2 * b : b);
      }
      all = all && ok;
      csv += std::string(text ? "hashcheck," : "lookup,") + (pp ? "primeprobe," : "sidechannel,") + scheme.name() +
             "," + std::string(metric_name(ev.metric)) + "," + num(ev.mean) + "," + num(b) + "," +
             std::to_string(noisy.size()) + "\n";
    }
  }
  res.c[10] = {all, "all 12 (attack, Low preset) pairs beat their baselines; tightest " + worst, since(t0)};
  write_csv(dir / "c10.csv", csv);
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "msca_acceptance";
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();

    const auto first = run_suite(work / "run1");
    const std::map<int, double> budget{{6, 600}, {7, 600}, {8, 30}, {9, 300}, {10, 900}};
    for (const auto& [id, r] : first.c) report(id, r.ok, r.detail, r.seconds, budget.at(id));

    const auto t0 = Clock::now();
    run_suite(work / "run2");
    std::vector<std::string> differ;
    for (const char* f : {"c6.csv", "c7.csv", "c8.csv", "c9.csv", "c10.csv"}) {
      const auto a = slurp(work / "run1" / f), b = slurp(work / "run2" / f);
      if (a.empty() || a != b) differ.push_back(f);
    }
    std::string detail = "rerun of criteria 6-10 with the same seeds: ";
    if (differ.empty()) {
      detail += "all 5 metrics CSVs bit-identical";
    } else {
      detail += "differing:";
      for (const auto& f : differ) detail += " " + f;
    }
    report(11, differ.empty(), detail, since(t0), 3600);
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures ? "acceptance: FAILED (" + std::to_string(failures) + ")" : std::string("acceptance: all passed"))
            << std::endl;
  return failures ? 1 : 0;
}
