// Acceptance runner: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is the number of failed criteria.

#include "cli.hpp"
#include "gradcheck.hpp"

#include "styland/data/dataset.hpp"
#include "styland/depth_ops.hpp"
#include "styland/io/checkpoint.hpp"
#include "styland/metrics.hpp"
#include "styland/service/service.hpp"
#include "styland/training.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace styland;
namespace fs = std::filesystem;
using nn::Shape;
using nn::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path cache;
  fs::path work;
  long s2d_steps = 600;
  long pair_steps = 1000;
  long overfit_budget = 2000;
  int eval_every = 0;
};

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

std::vector<data::Triplet> scenes(std::uint64_t seed, int n, int res) {
  std::vector<data::Triplet> out;
  for (int i = 0; i < n; ++i) out.push_back(data::generate_scene(data::SceneParams::sample(seed, i), res, data::scene_id(i)));
  return out;
}

// ---------------------------------------------------------------------------

Outcome shapes(const Options&) {
  std::vector<std::string> bad;
  for (int res : {64, 256}) {
    for (Mode mode : {Mode::s2d, Mode::sd2i, Mode::s2i}) {
      const auto cfg = res == 64 ? ModelConfig::desk(mode) : ModelConfig::full(mode);
      const auto w = GeneratorWeights<float>::init(cfg, 1);
      const SegmentationMap seg(LabelGrid::Zero(res, res), cfg.label_set);
      const DepthMap<float> depth(res, res, 0.5f);
      nn::Graph<float> g(false);
      const auto cond = g.constant(prepare_condition(cfg, seg, mode == Mode::sd2i ? &depth : nullptr));
      const auto z = g.constant(sample_z<float>(cfg, 1, 3));
      auto expect = [&](const Shape& got, const Shape& want, const std::string& what) {
        if (!(got == want)) bad.push_back(fmt("%d/%s %s", res, to_string(mode), what.c_str()));
      };
      expect(map_random_latent(g, w, z).shape(), Shape{1, 64, 8, 8}, "w");
      const auto latents = intermediate_latents(g, w, cond, z);
      if (static_cast<int>(latents.size()) != cfg.layer_count()) bad.push_back(fmt("%d layer count", res));
      for (int i = 0; i < cfg.layer_count() && i < static_cast<int>(latents.size()); ++i) {
        expect(latents[static_cast<std::size_t>(i)].shape(), cfg.latent_shape(i), fmt("latent %d", i));
        expect(build_condition_latent(g, w, cond, i).shape(), cfg.latent_shape(i), fmt("condition latent %d", i));
      }
      expect(latents.back().shape(), Shape{1, cfg.channels.back(), res, res}, "last latent");
      const auto out = synthesize(g, w, latents, NoiseSpec<float>::from_seed(cfg, 1, 4));
      expect(out.shape(), Shape{1, cfg.output_channels(), res, res}, "output");
      const auto enc = encode(EncoderWeights<float>::init(cfg, 2), Tensor<float>(Shape{1, cfg.output_channels(), res, res}));
      for (int i = 0; i < cfg.layer_count(); ++i) expect(enc[static_cast<std::size_t>(i)].values.shape(), cfg.latent_shape(i), fmt("encoded %d", i));
    }
  }
  if (!bad.empty()) return {false, "mismatch: " + bad.front()};
  return {true, "64x64 (4 layers) and 256x256 (6 layers) chains match for s2d/sd2i/s2i; base w is 64x8x8"};
}

// ---------------------------------------------------------------------------

ModelConfig grad_config(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  c.output_resolution = 16;
  c.channels = {4, 3};
  c.critic_channels = {4, 3};
  c.z_dim = 6;
  c.mapping_layers = 1;
  c.mapping_width = 8;
  return c;
}

Outcome gradients(const Options&) {
  double worst = 0;
  std::string where;
  auto note = [&](double err, const std::string& what) {
    if (err > worst || !std::isfinite(err)) {
      worst = err;
      where = what;
    }
  };
  for (Mode mode : {Mode::sd2i, Mode::s2i, Mode::s2d}) {
    const auto cfg = grad_config(mode);
    const auto d = DiscriminatorWeights<double>::init(cfg, 3);
    const int ch = cfg.output_channels();
    const auto x0 = testing::random_tensor(Shape{2, ch, 16, 16}, 5, 0.5);
    const auto cond = testing::random_tensor(Shape{2, cfg.condition_channels(), 16, 16}, 6, 0.5);
    auto logits_sum = [&](const DiscriminatorWeights<double>& w, const Tensor<double>& x) {
      nn::Graph<double> g(false);
      return discriminate(g, w, g.constant(x), g.constant(cond)).value().data().sum();
    };

    nn::Graph<double> g;
    const auto xv = g.variable(x0);
    g.backward(nn::sum(discriminate(g, d, xv, g.constant(cond))));
    const auto fd = testing::numeric_gradient([&](const Tensor<double>& x) { return logits_sum(d, x); }, x0);
    note(testing::relative_error(g.grad(xv), fd), std::string(to_string(mode)) + " input gradient");

    const double expected = 10.0 / 2 * fd.data().square().sum() / 2;
    const auto r1 = r1_penalty(d, x0, cond, 10.0, true);
    note(std::abs(r1.value - expected) / expected, std::string(to_string(mode)) + " r1 value");
    for (int idx : {d.head.weight, d.hidden.weight, d.from_input.weight, d.final_conv.bias}) {
      const auto numeric = testing::numeric_gradient(
          [&](const Tensor<double>& v) {
            auto copy = d;
            copy.params[idx].value = v;
            return r1_penalty(copy, x0, cond, 10.0, false).value;
          },
          d.params[idx].value);
      note(testing::relative_error(r1.weight_grads[static_cast<std::size_t>(idx)], numeric),
           std::string(to_string(mode)) + " r1 d/d " + d.params[idx].name);
    }
  }
  return {worst < 1e-3, fmt("max relative error %.2e (%s) on 16x16 configs", worst, where.c_str())};
}

// ---------------------------------------------------------------------------

Outcome overfit(const Options& o) {
  const auto items = scenes(1, 8, 64);
  std::vector<int> all(8);
  std::iota(all.begin(), all.end(), 0);
  const auto batch = data::make_batch(items, all, Mode::sd2i);
  auto state = TrainState<float>::create(ModelConfig::desk(Mode::sd2i), 1);
  const auto t0 = std::chrono::steady_clock::now();
  double l1 = 1;
  for (long step = 0; step < o.overfit_budget; ++step) {
    LossReport r;
    try {
      r = train_step(state, batch);
    } catch (const Error& e) {
      return {false, fmt("step %ld: %s", step, e.what())};
    }
    if (!r.all_finite()) return {false, fmt("step %ld: non-finite %s", step, r.first_non_finite().c_str())};
    if (state.step % 25 == 0) {
      const auto rec = reconstruct(state.generator, state.encoder, batch.real);
      l1 = (rec.data() - batch.real.data()).abs().mean();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << fmt("  overfit step %ld l1 %.4f (%.0fs)\n", state.step, l1, secs);
      if (l1 < 0.08) {
        return {true, fmt("reconstruction L1 %.4f at step %ld of %ld, all losses finite, %.0fs", l1, state.step,
                          o.overfit_budget, secs)};
      }
    }
  }
  return {false, fmt("reconstruction L1 %.4f after %ld steps", l1, o.overfit_budget)};
}

// ---------------------------------------------------------------------------

Outcome metric_oracles(const Options&) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  std::vector<std::string> fails;
  const VectorXd z1 = VectorXd::Zero(1);
  const MatrixXd i1 = MatrixXd::Identity(1, 1);
  const double c0 = metrics::frechet_distance(z1, i1, z1, i1);
  const double c1 = metrics::frechet_distance(z1, i1, VectorXd::Constant(1, 1.0), i1);
  const double c25 = metrics::frechet_distance(VectorXd::Zero(2), MatrixXd::Identity(2, 2), (VectorXd(2) << 3, 4).finished(),
                                               MatrixXd::Identity(2, 2));
  if (std::abs(c0) > 1e-9 || std::abs(c1 - 1) > 1e-9 || std::abs(c25 - 25) > 1e-9) fails.push_back("analytic cases");

  const auto extractor = FeatureExtractor<float>::random();
  std::vector<Tensor<float>> imgs;
  for (const auto& t : scenes(5, 8, 32)) imgs.push_back(t.image.tensor());
  const auto x = metrics::stack(imgs);
  const double self = metrics::fid(x, x, extractor);
  if (!(self < 1e-6)) fails.push_back("self fid");
  std::vector<double> seq;
  for (float c : {0.05f, 0.1f, 0.2f}) {
    Tensor<float> shifted = x;
    shifted.data() += c;
    seq.push_back(metrics::fid(x, shifted, extractor));
  }
  if (!(seq[0] > self && seq[1] > seq[0] && seq[2] > seq[1])) fails.push_back("monotonicity");
  const double rmse = metrics::depth_rmse(DepthMap<float>(8, 8, 0.0f), DepthMap<float>(8, 8, 0.125f));
  if (rmse != 31.875) fails.push_back("rmse offset");
  const auto detail = fmt("FD %.1e/%.12f/%.12f, fid self %.1e, offsets %.4f<%.4f<%.4f, rmse(0.125) %.6f", c0, c1, c25, self,
                          seq[0], seq[1], seq[2], rmse);
  return {fails.empty(), fails.empty() ? detail : fails.front() + "; " + detail};
}

// ---------------------------------------------------------------------------

Outcome depth_editing(const Options&) {
  LabelGrid g(2, 2);
  g << 0, 0, 1, 1;
  const SegmentationMap seg(g, {"sky", "grass"});
  Grid<double> v(2, 2);
  v << 0.2, 0.4, 0.6, 0.8;
  const DepthMap<double> depth(v);
  std::vector<std::string> fails;
  if (!(shift_segment_depth(depth, seg, 0, 0.0) == depth)) fails.push_back("identity");
  Grid<double> want(2, 2);
  want << 0.2 + 0.1, 0.4 + 0.1, 0.6, 0.8;
  if (!(shift_segment_depth(depth, seg, 0, 0.1) == DepthMap<double>(want))) fails.push_back("accepted");
  try {
    (void)shift_segment_depth(depth, seg, 0, 0.5);
    fails.push_back("violation not raised");
  } catch (const OrderViolation& e) {
    if (e.first() != "sky" || e.second() != "grass") fails.push_back("violation pair");
  }

  nn::Rng rng(77);
  int reverted = 0;
  int mismatched = 0;
  for (int trial = 0; reverted < 1000 && trial < 50000; ++trial) {
    LabelGrid lg(8, 8);
    Grid<float> dv(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        lg(y, x) = static_cast<std::uint8_t>(std::min<std::uint64_t>(3, (static_cast<std::uint64_t>(y) * 4 + rng.below(3)) / 8));
        dv(y, x) = static_cast<float>(rng.below(65537)) / 65536.0f;
      }
    }
    const SegmentationMap s(lg, {"a", "b", "c", "d"});
    const DepthMap<float> d(dv);
    const auto present = depth_order(d, s);
    const int label = present[rng.below(present.size())];
    const double delta = (static_cast<double>(rng.below(16385)) - 8192.0) / 65536.0;
    bool clamped = false;
    for (int i = 0; i < 64; ++i) {
      if (lg.data()[i] == label) clamped |= dv.data()[i] + delta < 0 || dv.data()[i] + delta > 1;
    }
    if (clamped) continue;
    DepthMap<float> out;
    try {
      out = shift_segment_depth(d, s, label, delta);
    } catch (const OrderViolation&) {
      continue;
    }
    const auto back = shift_segment_depth(out, s, label, -delta);
    mismatched += !(back.values().array() == d.values().array()).all();
    ++reverted;
  }
  if (reverted < 1000 || mismatched) fails.push_back(fmt("round trips %d, mismatched %d", reverted, mismatched));
  return {fails.empty(), fails.empty() ? fmt("3 hand examples exact; %d/%d unclamped shift-reverts bitwise", reverted - mismatched, reverted)
                                       : fails.front()};
}

// ---------------------------------------------------------------------------

GeneratorWeights<float> trained(const Options& o, Mode mode, const std::vector<data::Triplet>& items, long steps,
                                std::uint64_t seed, const std::function<void(const TrainState<float>&)>& probe = {}) {
  const auto config = ModelConfig::desk(mode);
  const fs::path cached =
      o.cache.empty() ? fs::path() : o.cache / fmt("%s_n%zu_steps%ld_seed%llu.ckpt", to_string(mode), items.size(), steps,
                                                   static_cast<unsigned long long>(seed));
  if (!cached.empty() && fs::exists(cached)) {
    std::cerr << "  reusing " << cached.string() << "\n";
    return io::load_checkpoint(cached).generator;
  }
  auto state = TrainState<float>::create(config, seed);
  const data::BatchSampler sampler(items, config.optimizer.batch, mode, nn::mix_seed(seed, 7));
  data::Prefetcher prefetch(sampler);
  TrainLoopHooks<float> hooks;
  hooks.next_batch = [&](long step) { return prefetch.next(step); };
  hooks.on_report = [&](const LossReport& r, double secs) {
    if (!r.all_finite()) throw Error(ErrorKind::non_finite, "non-finite " + r.first_non_finite());
    if (r.step % 100 == 0) std::cerr << fmt("  %s step %ld rec_l1 %.4f adv_d %.3f (%.0fs)\n", to_string(mode), r.step, r.reconstruction_l1, r.adv_d, secs);
  };
  if (probe && o.eval_every > 0) {
    hooks.checkpoint_every = o.eval_every;
    hooks.on_checkpoint = probe;
  }
  train(state, steps, hooks);
  if (!cached.empty()) {
    fs::create_directories(o.cache);
    io::save_checkpoint(cached, state, false);
  }
  return std::move(state.generator);
}

constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kHeldOutSeed = 2;
constexpr std::uint64_t kSampleSeed = 3;

struct Fig2Stats {
  int ordered = 0;
  int maps = 0;
  double worst_w1 = 0;
  std::string worst_label;
  std::string per_label;
};

// sky > mountain > every foreground label present, on per-label mean depth
bool ordered(const std::map<int, double>& m) {
  if (!m.count(0) || !m.count(1) || !(m.at(0) > m.at(1))) return false;
  for (const auto& [label, mean] : m) {
    if (label > 1 && !(m.at(1) > mean)) return false;
  }
  return true;
}

Fig2Stats fig2_stats(const GeneratorWeights<float>& w, const std::vector<data::Triplet>& test) {
  Fig2Stats s;
  std::vector<std::pair<SegmentationMap, DepthMap<float>>> truth;
  std::vector<std::pair<SegmentationMap, DepthMap<float>>> gen;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto d = generate_depth(w, test[i].seg, sample_z<float>(w.config, 1, nn::mix_seed(kSampleSeed, 2 * i)),
                                  nn::mix_seed(kSampleSeed, 2 * i + 1));
    s.ordered += ordered(segment_mean_depth(d, test[i].seg));
    ++s.maps;
    truth.emplace_back(test[i].seg, test[i].depth);
    gen.emplace_back(test[i].seg, d);
  }
  const auto& labels = test.front().seg.label_set();
  const auto a = depth_distribution(truth, labels, 20);
  const auto b = depth_distribution(gen, labels, 20);
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (a.samples[l].empty()) continue;
    const double w1 = wasserstein1(a.histograms[l], b.histograms[l]);
    s.per_label += fmt("%s%s %.3f", s.per_label.empty() ? "" : ", ", labels[l].c_str(), w1);
    if (w1 > s.worst_w1) {
      s.worst_w1 = w1;
      s.worst_label = labels[l];
    }
  }
  return s;
}

Outcome s2d_distribution(const Options& o) {
  const auto train_set = scenes(kTrainSeed, 48, 64);
  const auto test = scenes(kHeldOutSeed, 32, 64);
  int truth_ordered = 0;
  for (const auto& t : test) truth_ordered += ordered(segment_mean_depth(t.depth, t.seg));
  if (truth_ordered != 32) return {false, fmt("ground truth itself ordered on %d/32 maps", truth_ordered)};
  const auto w = trained(o, Mode::s2d, train_set, o.s2d_steps, kTrainSeed, [&](const TrainState<float>& st) {
    const auto s = fig2_stats(st.generator, test);
    std::cerr << fmt("  s2d probe step %ld ordered %d/%d worst W1 %.3f (%s)\n", st.step, s.ordered, s.maps, s.worst_w1,
                     s.worst_label.c_str());
  });
  const auto s = fig2_stats(w, test);
  const double share = static_cast<double>(s.ordered) / s.maps;
  return {share >= 0.9 && s.worst_w1 < 0.15,
          fmt("%ld steps on 48 triplets: ordering on %d/%d held-out maps (%.0f%%); W1 per label: %s", o.s2d_steps, s.ordered,
              s.maps, 100 * share, s.per_label.c_str())};
}

// ---------------------------------------------------------------------------

Outcome depth_guidance(const Options& o) {
  const auto train_set = scenes(kTrainSeed, 48, 64);
  const auto test = scenes(kHeldOutSeed, 32, 64);
  const auto readout = metrics::DepthReadout::fit(train_set);
  const auto extractor = FeatureExtractor<float>::random();
  const metrics::EvalSettings settings{kSampleSeed, 10, 8};
  auto probe = [&](const TrainState<float>& st) {
    const auto r = metrics::evaluate_model(st.generator, test, extractor, settings, &readout);
    std::cerr << fmt("  %s probe step %ld diversity %.4f rmse %.2f\n", to_string(st.config.mode), st.step, r.diversity, r.depth_rmse);
  };
  const auto s2i = metrics::evaluate_model(trained(o, Mode::s2i, train_set, o.pair_steps, kTrainSeed, probe), test, extractor,
                                           settings, &readout, "s2i");
  const auto sd2i = metrics::evaluate_model(trained(o, Mode::sd2i, train_set, o.pair_steps, kTrainSeed, probe), test,
                                            extractor, settings, &readout, "sd2i");
  return {sd2i.diversity <= s2i.diversity && sd2i.depth_rmse <= s2i.depth_rmse,
          fmt("%ld steps each: diversity sd2i %.4f vs s2i %.4f; depth RMSE sd2i %.2f vs s2i %.2f; FID sd2i %.3f vs s2i %.3f",
              o.pair_steps, sd2i.diversity, s2i.diversity, sd2i.depth_rmse, s2i.depth_rmse, sd2i.fid, s2i.fid)};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> run_cli_pipeline(const fs::path& dir, std::vector<std::string>& errors) {
  const auto d = dir.string();
  auto run = [&](std::vector<std::string> args) {
    std::ostringstream out, err;
    if (styland::cli::run(args, out, err) != 0) errors.push_back(args.front() + ": " + err.str());
  };
  run({"dataset", "build", "--out", d + "/ds", "--count", "8", "--resolution", "32", "--seed", "4"});
  for (const char* mode : {"s2d", "sd2i"}) {
    run({"train", "--mode", mode, "--data", d + "/ds", "--steps", "6", "--seed", "5", "--checkpoint-every", "3", "--log-every",
         "0", "--out", d + "/" + mode});
  }
  run({"infer", "--s2d", d + "/s2d/final.ckpt", "--sd2i", d + "/sd2i/final.ckpt", "--seg", d + "/ds/seg/scene_00002.png",
       "--n-depths", "4", "--pick", "2", "--n-images", "4", "--seed", "6", "--out", d + "/infer"});
  run({"eval", "--model", "s2d=" + d + "/s2d/final.ckpt", "--model", "sd2i=" + d + "/sd2i/final.ckpt", "--data", d + "/ds",
       "--k", "4", "--maps", "2", "--out", d + "/eval.csv"});
  run({"analyze-depth", "--data", d + "/ds", "--s2d", d + "/s2d/final.ckpt", "--out", d + "/analysis"});
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto bytes = io::read_file(e.path());
    std::string text(bytes.begin(), bytes.end());
    for (auto at = text.find(d); at != std::string::npos; at = text.find(d, at)) text.replace(at, d.size(), "<dir>");
    files[fs::relative(e.path(), dir).string()] = text;
  }
  return files;
}

Outcome cli_determinism(const Options& o) {
  std::vector<std::string> errors;
  const auto a = run_cli_pipeline(o.work / "cli_a", errors);
  const auto b = run_cli_pipeline(o.work / "cli_b", errors);
  if (!errors.empty()) return {false, errors.front()};
  int pngs = 0, csvs = 0, others = 0;
  for (const auto& [name, bytes] : a) {
    if (!b.count(name) || b.at(name) != bytes) return {false, "differs: " + name};
    (name.ends_with(".png") ? pngs : name.ends_with(".csv") ? csvs : others)++;
  }
  if (a.size() != b.size()) return {false, "file sets differ"};

  // serve: two independent services fed the same requests
  service::ServiceOptions so;
  so.workers = 1;
  auto s2d = io::load_checkpoint(o.work / "cli_a/s2d/final.ckpt").generator;
  auto sd2i = io::load_checkpoint(o.work / "cli_a/sd2i/final.ckpt").generator;
  const auto seg = io::read_file(o.work / "cli_a/ds/seg/scene_00003.png");
  std::vector<io::Bytes> assets[2];
  for (auto& out : assets) {
    service::Service svc(s2d, sd2i, so);
    const std::string sid = svc.create_session().at("session_id");
    svc.upload_segmentation(sid, seg);
    const auto depths = svc.request_depths(sid, 2, 42);
    for (const auto& c : depths.at("candidates")) out.push_back(svc.fetch_asset(sid, c.at("id")));
    const auto images = svc.request_images(sid, depths.at("candidates")[1].at("id"), 2, 43);
    for (const auto& i : images.at("images")) out.push_back(svc.fetch_asset(sid, i.at("id")));
  }
  if (assets[0] != assets[1]) return {false, "service assets differ across identical seeded requests"};
  fs::remove_all(o.work / "cli_a");
  fs::remove_all(o.work / "cli_b");
  return {true, fmt("dataset/train/infer/eval/analyze-depth reruns identical: %d PNG, %d CSV, %d other files; serve: %zu seeded assets identical",
                    pngs, csvs, others, assets[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Options o;
  std::vector<std::string> only;
  std::string cache, work = (fs::temp_directory_path() / "styland_acceptance").string();
  app.add_option("--only", only, "Run a subset by name");
  app.add_option("--cache", cache, "Reuse trained checkpoints from this directory");
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--eval-every", o.eval_every, "Probe trained criteria every N steps (stderr)");
  CLI11_PARSE(app, argc, argv);
  o.cache = cache;
  o.work = work;

  const std::vector<std::pair<std::string, std::function<Outcome(const Options&)>>> criteria{
      {"shapes", shapes},
      {"gradients", gradients},
      {"overfit", overfit},
      {"metric_oracles", metric_oracles},
      {"depth_editing", depth_editing},
      {"s2d_depth_distribution", s2d_distribution},
      {"depth_guidance_direction", depth_guidance},
      {"cli_determinism", cli_determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = check(o);
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << name << " [" << fmt("%.1fs", secs) << "] " << r.detail << std::endl;
  }
  return failed;
}
