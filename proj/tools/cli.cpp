#include "cli.hpp"

#include "styland/core/config_io.hpp"
#include "styland/data/dataset.hpp"
#include "styland/depth_ops.hpp"
#include "styland/inference.hpp"
#include "styland/io/checkpoint.hpp"
#include "styland/metrics.hpp"
#include "styland/nn/rng.hpp"
#include "styland/service/http.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef STYLAND_GIT_REVISION
#define STYLAND_GIT_REVISION "unknown"
#endif

namespace styland::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path, io::Bytes(text.begin(), text.end()));
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_run_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& args,
                        const json& config, const json& seeds) {
  write_json(path, {{"tool", "styland"},
                    {"version", kVersion},
                    {"command", command},
                    {"args", args},
                    {"config", config},
                    {"config_hash", hex64(fnv1a(config.dump()))},
                    {"seeds", seeds},
                    {"git_revision", STYLAND_GIT_REVISION}});
}

std::string file_hash(const fs::path& path) {
  const auto bytes = io::read_file(path);
  return hex64(fnv1a(std::string(bytes.begin(), bytes.end())));
}

std::string dataset_hash(const std::string& dir) { return file_hash(fs::path(dir) / "manifest.json"); }

std::string indexed_name(const std::string& stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02zu.png", stem.c_str(), i);
  return buf;
}

GeneratorWeights<float> load_generator(const std::string& path, Mode expect, const char* flag) {
  auto state = io::load_checkpoint(path);
  if (state.config.mode != expect) {
    throw Error(ErrorKind::invalid_argument, std::string(flag) + " checkpoint holds a " + to_string(state.config.mode) +
                                                 " model, expected " + to_string(expect));
  }
  return std::move(state.generator);
}

// --- dataset build ----------------------------------------------------------

struct DatasetArgs {
  std::string out;
  int count = 48;
  int resolution = 64;
  std::uint64_t seed = 1;
};

void dataset_build(const DatasetArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto m = data::build_dataset(a.seed, a.count, a.resolution, a.out);
  write_run_manifest(fs::path(a.out) / "run_manifest.json", "dataset build", argv,
                     {{"count", a.count}, {"resolution", a.resolution}}, {{"dataset", a.seed}});
  out << "wrote " << m.ids.size() << " triplets to " << a.out << "\n";
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string mode;
  std::string data;
  std::string out;
  std::string resume;
  long steps = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  long checkpoint_every = 0;
  long log_every = 50;
  bool wall_time = false;
};

void train_cmd(TrainArgs a, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  json file = json::object();
  if (!a.config.empty()) file = read_json_file(a.config);
  auto pick = [&](std::string& v, const char* key) {
    if (v.empty() && file.contains(key)) v = file.at(key).get<std::string>();
  };
  pick(a.mode, "mode");
  pick(a.data, "data");
  pick(a.out, "out");
  if (a.steps < 0) a.steps = file.value("steps", 2000L);
  if (!a.seed_set) a.seed = file.value("seed", std::uint64_t{0});
  if (a.mode.empty()) a.mode = "sd2i";
  if (a.data.empty() || a.out.empty()) throw Error(ErrorKind::invalid_argument, "train needs --data and --out");
  const Mode mode = parse_mode(a.mode);

  const auto items = data::load_dataset(a.data);
  const int res = items.front().seg.height();
  json model = file.value("model", json::object());
  model["mode"] = to_string(mode);
  if (!model.contains("output_resolution")) model["output_resolution"] = res;
  const auto config = model_config_from_json(model);
  if (config.output_resolution != res) {
    throw Error(ErrorKind::shape_mismatch, "dataset resolution " + std::to_string(res) + " differs from model resolution " +
                                               std::to_string(config.output_resolution));
  }

  TrainState<float> state = a.resume.empty() ? TrainState<float>::create(config, a.seed) : io::load_checkpoint(a.resume);
  if (!a.resume.empty() && state.config.mode != mode) throw Error(ErrorKind::invalid_argument, "resumed checkpoint has another mode");
  const data::BatchSampler sampler(items, state.config.optimizer.batch, mode, nn::mix_seed(state.seed, 7));
  data::Prefetcher prefetch(sampler);

  fs::create_directories(a.out);
  std::ostringstream log_text;
  LossLog log(log_text, a.wall_time);
  TrainLoopHooks<float> hooks;
  hooks.next_batch = [&](long step) { return prefetch.next(step); };
  hooks.on_report = [&](const LossReport& r, double seconds) {
    log.append(r, seconds);
    if (a.log_every > 0 && (r.step % a.log_every == 0)) {
      err << "step " << r.step << " total_g " << r.total_g << " total_d " << r.total_d << " rec_l1 " << r.reconstruction_l1
          << "\n";
    }
  };
  hooks.checkpoint_every = a.checkpoint_every;
  hooks.on_checkpoint = [&](const TrainState<float>& s) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%06ld.ckpt", s.step);
    io::save_checkpoint(fs::path(a.out) / name, s);
    write_text(fs::path(a.out) / "loss.csv", log_text.str());
  };
  train(state, a.steps, hooks);
  io::save_checkpoint(fs::path(a.out) / "final.ckpt", state);
  write_text(fs::path(a.out) / "loss.csv", log_text.str());
  write_run_manifest(fs::path(a.out) / "run_manifest.json", "train", argv,
                     {{"model", to_json(state.config)},
                      {"steps", a.steps},
                      {"dataset", dataset_hash(a.data)},
                      {"resume", a.resume.empty() ? json(nullptr) : json(file_hash(a.resume))}},
                     {{"train", state.seed},
                      {"batch_order", nn::mix_seed(state.seed, 7)},
                      {"extractor", state.extractor.seed()}});
  out << "trained " << to_string(mode) << " to step " << state.step << ", wrote " << (fs::path(a.out) / "final.ckpt").string()
      << "\n";
}

// --- infer --------------------------------------------------------------------

struct InferArgs {
  std::string s2d;
  std::string sd2i;
  std::string seg;
  std::string out;
  int n_depths = 4;
  int pick = 0;
  std::vector<std::string> shifts;
  int n_images = 4;
  std::uint64_t seed = 0;
};

void infer_cmd(const InferArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto s2d = load_generator(a.s2d, Mode::s2d, "--s2d");
  const auto sd2i = load_generator(a.sd2i, Mode::sd2i, "--sd2i");
  const auto seg = io::decode_segmentation(io::read_file(a.seg), s2d.config.label_set);
  std::vector<inference::DepthEdit> edits;
  for (const auto& s : a.shifts) edits.push_back(inference::parse_edit(s));
  const auto r = inference::two_phase(s2d, sd2i, seg, a.n_depths, a.pick, edits, a.n_images, a.seed);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  json candidates = json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto name = indexed_name("depth_candidate", i);
    io::write_file(dir / name, io::encode_depth(r.candidates[i]));
    const auto s = inference::sample_seeds(a.seed, static_cast<int>(i));
    candidates.push_back({{"file", name}, {"z_seed", s.z}, {"noise_seed", s.noise}});
  }
  io::write_file(dir / "depth_selected.png", io::encode_depth(r.depth));
  json images = json::array();
  for (std::size_t i = 0; i < r.images.size(); ++i) {
    const auto name = indexed_name("image", i);
    io::write_file(dir / name, io::encode_image(r.images[i]));
    const auto s = inference::sample_seeds(a.seed, static_cast<int>(i));
    images.push_back({{"file", name}, {"z_seed", s.z}, {"noise_seed", s.noise}});
  }
  json edit_list = json::array();
  for (const auto& e : edits) edit_list.push_back({{"label", e.label}, {"delta", e.delta}});
  write_json(dir / "infer.json", {{"seed", a.seed},
                                  {"pick", a.pick},
                                  {"edits", edit_list},
                                  {"depth_candidates", candidates},
                                  {"selected_depth", "depth_selected.png"},
                                  {"images", images},
                                  {"checkpoints", {{"s2d", file_hash(a.s2d)}, {"sd2i", file_hash(a.sd2i)}}}});
  write_run_manifest(dir / "run_manifest.json", "infer", argv,
                     {{"s2d", to_json(s2d.config)}, {"sd2i", to_json(sd2i.config)}, {"n_depths", a.n_depths},
                      {"n_images", a.n_images}, {"pick", a.pick}, {"edits", edit_list}},
                     {{"inference", a.seed}});
  out << "wrote " << r.candidates.size() << " depth candidates and " << r.images.size() << " images to " << a.out << "\n";
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> models;
  std::string data;
  std::string readout_data;
  std::string out;
  std::uint64_t seed = 0;
  int k = 10;
  int maps = 4;
};

void eval_cmd(const EvalArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto test = data::load_dataset(a.data);
  const auto readout = metrics::DepthReadout::fit(a.readout_data.empty() ? test : data::load_dataset(a.readout_data));
  const auto extractor = FeatureExtractor<float>::random();
  metrics::EvalSettings settings{a.seed, a.k, a.maps};
  std::vector<metrics::EvalReport> reports;
  json models = json::array();
  for (const auto& spec : a.models) {
    const auto eq = spec.find('=');
    const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    const auto state = io::load_checkpoint(path);
    reports.push_back(metrics::evaluate_model(state.generator, test, extractor, settings, &readout, name));
    models.push_back({{"name", name}, {"checkpoint_hash", file_hash(path)}, {"config", to_json(state.config)}});
  }
  std::ostringstream csv;
  metrics::write_report_csv(csv, reports);
  write_text(a.out, csv.str());
  write_run_manifest(fs::path(a.out).string() + ".manifest.json", "eval", argv,
                     {{"models", models}, {"diversity_k", a.k}, {"diversity_maps", a.maps}, {"extractor", extractor.id()},
                      {"dataset", dataset_hash(a.data)},
                      {"readout", dataset_hash(a.readout_data.empty() ? a.data : a.readout_data)}},
                     {{"eval", a.seed}, {"extractor", extractor.seed()}});
  out << csv.str();
}

// --- analyze-depth ------------------------------------------------------------

struct AnalyzeArgs {
  std::string data;
  std::string out;
  std::string s2d;
  int bins = 20;
  std::uint64_t seed = 0;
};

void write_distribution(const fs::path& dir, const std::string& stem, const DepthDistribution& d) {
  std::ostringstream csv;
  write_distribution_csv(csv, d);
  write_text(dir / (stem + ".csv"), csv.str());
  constexpr int width = 320;
  constexpr int panel = 40;
  io::write_file(dir / (stem + ".png"),
                 io::encode_rgb8(width, panel * static_cast<int>(d.label_set.size()), render_distribution_plot(d, width, panel)));
}

void analyze_cmd(const AnalyzeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const auto items = data::load_dataset(a.data);
  const auto& labels = items.front().seg.label_set();
  std::vector<std::pair<SegmentationMap, DepthMap<float>>> truth;
  for (const auto& t : items) truth.emplace_back(t.seg, t.depth);
  const fs::path dir(a.out);
  const auto gt = depth_distribution(truth, labels, a.bins);
  write_distribution(dir, "distribution", gt);
  json seeds = json::object();
  if (!a.s2d.empty()) {
    const auto s2d = load_generator(a.s2d, Mode::s2d, "--s2d");
    std::vector<std::pair<SegmentationMap, DepthMap<float>>> gen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      gen.emplace_back(items[i].seg, inference::phase1_sample_depths(s2d, items[i].seg, 1, nn::mix_seed(a.seed, i)).front());
    }
    const auto g = depth_distribution(gen, labels, a.bins);
    write_distribution(dir, "generated_distribution", g);
    std::ostringstream cmp;
    cmp << "label,truth_images,generated_images,truth_median,generated_median,wasserstein1\n";
    char buf[256];
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (gt.samples[l].empty() || g.samples[l].empty()) continue;
      std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f\n", labels[l].c_str(), gt.samples[l].size(), g.samples[l].size(),
                    gt.histograms[l].median(), g.histograms[l].median(), wasserstein1(gt.samples[l], g.samples[l]));
      cmp << buf;
    }
    write_text(dir / "comparison.csv", cmp.str());
    seeds["generation"] = a.seed;
  }
  write_run_manifest(dir / "run_manifest.json", "analyze-depth", argv,
                     {{"bins", a.bins}, {"dataset", dataset_hash(a.data)}, {"s2d", a.s2d.empty() ? json(nullptr) : json(file_hash(a.s2d))}},
                     seeds);
  out << "wrote depth distribution for " << items.size() << " maps to " << a.out << "\n";
}

// --- serve --------------------------------------------------------------------

struct ServeArgs {
  std::string s2d;
  std::string sd2i;
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  int threads = 8;
  std::string persist;
};

void serve_cmd(const ServeArgs& a, std::ostream& out) {
  service::ServiceOptions o;
  o.workers = a.workers;
  o.persist_dir = a.persist;
  service::Service svc(load_generator(a.s2d, Mode::s2d, "--s2d"), load_generator(a.sd2i, Mode::sd2i, "--sd2i"), o);
  const int restored = svc.restore();
  out << "serving /api/v1 on " << a.host << ":" << a.port << " (" << restored << " sessions restored)" << std::endl;
  if (!service::serve(svc, a.host, a.port, a.threads)) {
    throw Error(ErrorKind::io, "cannot listen on " + a.host + ":" + std::to_string(a.port));
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic and depth guided landscape synthesis", "styland"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  DatasetArgs ds;
  auto* dataset = app.add_subcommand("dataset", "Synthetic dataset tools");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Render procedural (image, segmentation, depth) triplets");
  build->add_option("--out", ds.out, "Output directory")->required();
  build->add_option("--count", ds.count, "Number of scenes")->check(CLI::PositiveNumber);
  build->add_option("--resolution", ds.resolution, "Square side in pixels");
  build->add_option("--seed", ds.seed, "Scene seed");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train an S2D, SD2I or S2I model");
  train->add_option("--config", tr.config, "Run config JSON (mode, model, data, steps, seed, out)");
  train->add_option("--mode", tr.mode, "s2d | sd2i | s2i");
  train->add_option("--data", tr.data, "Dataset directory");
  train->add_option("--out", tr.out, "Output directory");
  train->add_option("--steps", tr.steps, "Step budget");
  train->add_option("--seed", tr.seed, "Training seed")->each([&](const std::string&) { tr.seed_set = true; });
  train->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint period in steps (0: final only)");
  train->add_option("--resume", tr.resume, "Continue from a checkpoint");
  train->add_option("--log-every", tr.log_every, "Progress line period on stderr (0: silent)");
  train->add_flag("--wall-time", tr.wall_time, "Add a wall_time column to loss.csv");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Two-phase inference: depth candidates, edits, images");
  infer->add_option("--s2d", inf.s2d, "S2D checkpoint")->required();
  infer->add_option("--sd2i", inf.sd2i, "SD2I checkpoint")->required();
  infer->add_option("--seg", inf.seg, "Segmentation PNG")->required();
  infer->add_option("--out", inf.out, "Output directory")->required();
  infer->add_option("--n-depths", inf.n_depths, "Depth candidates");
  infer->add_option("--pick", inf.pick, "Index of the chosen candidate");
  infer->add_option("--shift", inf.shifts, "Depth edit label:delta (repeatable, applied in order)");
  infer->add_option("--n-images", inf.n_images, "Images to synthesize");
  infer->add_option("--seed", inf.seed, "Sampling seed");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "FID, diversity and depth RMSE report");
  eval->add_option("--model", ev.models, "Checkpoint, optionally name=path (repeatable)")->required();
  eval->add_option("--data", ev.data, "Test dataset directory")->required();
  eval->add_option("--readout-data", ev.readout_data, "Dataset used to fit the depth readout (default: --data)");
  eval->add_option("--out", ev.out, "CSV report path")->required();
  eval->add_option("--seed", ev.seed, "Sampling seed");
  eval->add_option("--k", ev.k, "Samples per diversity map")->check(CLI::Range(2, 100));
  eval->add_option("--maps", ev.maps, "Maps used for diversity");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "HTTP session service under /api/v1");
  serve->add_option("--s2d", sv.s2d, "S2D checkpoint")->required();
  serve->add_option("--sd2i", sv.sd2i, "SD2I checkpoint")->required();
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--port", sv.port, "Port");
  serve->add_option("--workers", sv.workers, "Concurrent inference jobs");
  serve->add_option("--threads", sv.threads, "HTTP threads");
  serve->add_option("--persist-dir", sv.persist, "Mirror sessions to this directory");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze-depth", "Per-label mean-depth distributions");
  analyze->add_option("--data", an.data, "Dataset directory")->required();
  analyze->add_option("--out", an.out, "Output directory")->required();
  analyze->add_option("--s2d", an.s2d, "Also sample this S2D model on every map");
  analyze->add_option("--bins", an.bins, "Histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--seed", an.seed, "Sampling seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    if (*build) dataset_build(ds, args, out);
    if (*train) train_cmd(tr, args, out, err);
    if (*infer) infer_cmd(inf, args, out);
    if (*eval) eval_cmd(ev, args, out);
    if (*serve) serve_cmd(sv, out);
    if (*analyze) analyze_cmd(an, args, out);
  } catch (const std::exception& e) {
    err << "styland: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace styland::cli
