#pragma once

#include "styland/core/types.hpp"
#include "styland/training.hpp"

#include <cstdint>
#include <filesystem>
#include <future>
#include <string>
#include <vector>

namespace styland::data {

struct Triplet {
  ImageTensor<float> image;
  SegmentationMap seg;
  DepthMap<float> depth;
  std::string id;
};

/// One procedural landscape. Vertical positions are fractions of the image
/// height measured from the top; depths are in [0,1] with sky = 1.
struct SceneParams {
  // far ridge
  double far_base = 0.45;       // [0.38, 0.52]
  double far_amplitude = 0.15;  // [0.08, 0.22]
  double far_depth = 0.8;       // [0.72, 0.88]
  // near ridge
  double near_base = 0.6;        // far_base + [0.1, 0.18]
  double near_amplitude = 0.1;   // [0.05, 0.14]
  double near_depth = 0.55;      // [0.45, 0.62]
  bool near_is_forest = false;   // near ridge labelled tree instead of mountain
  // foreground ground plane
  double ground_base = 0.75;      // near_base + [0.08, 0.15]
  double ground_amplitude = 0.03; // [0.0, 0.05]
  double ground_depth = 0.35;     // depth at the ground's top edge, [0.28, 0.38]
  bool ground_is_earth = false;
  bool water = false;
  double shore = 0.85;  // water spans ground_base..shore when `water`
  // layered 1-D noise: per-ridge frequencies and phases
  std::array<double, 4> far_freq{};
  std::array<double, 4> far_phase{};
  std::array<double, 4> near_freq{};
  std::array<double, 4> near_phase{};
  std::array<double, 2> ground_freq{};
  std::array<double, 2> ground_phase{};
  // appearance, RGB in [0,1]
  std::array<double, 3> sky_top{};
  std::array<double, 3> sky_bottom{};
  std::array<double, 3> far_color{};
  std::array<double, 3> near_color{};
  std::array<double, 3> ground_color{};
  std::array<double, 3> water_color{};
  double haze = 0.5;  // [0.3, 0.8], blend toward the horizon sky color per unit depth
  std::uint64_t texture_seed = 0;

  /// Fully determined by (seed, index).
  static SceneParams sample(std::uint64_t seed, std::uint64_t index);
  /// Throws Error(invalid_argument) when a field leaves its range.
  void validate() const;
};

/// Deterministic render at `resolution` x `resolution` (power of two >= 8).
Triplet generate_scene(const SceneParams& params, int resolution, const std::string& id = "scene");

struct Manifest {
  std::uint64_t seed = 0;
  int resolution = 0;
  std::vector<std::string> label_set;
  std::vector<std::string> ids;
};

std::string scene_id(std::uint64_t index);

/// Layout: images/<id>.png, seg/<id>.png, depth/<id>.png, manifest.json.
/// Files whose bytes already match are left untouched.
Manifest build_dataset(std::uint64_t seed, int count, int resolution, const std::filesystem::path& out_dir);

Manifest read_manifest(const std::filesystem::path& dir);
Triplet load_triplet(const std::filesystem::path& dir, const std::string& id, const std::vector<std::string>& label_set);
/// Triplets in manifest order, each validated.
std::vector<Triplet> load_dataset(const std::filesystem::path& dir);

/// Permutation of [0, n) for the given epoch; reproducible in (seed, epoch).
std::vector<int> shuffled_order(int n, std::uint64_t seed, std::uint64_t epoch);

/// Stacks triplets into a training batch for `mode`: real is the image, or
/// the depth map for s2d; the condition carries depth only for sd2i.
TrainingBatch<float> make_batch(const std::vector<Triplet>& items, const std::vector<int>& indices, Mode mode);

/// Epoch-shuffled batches over a fixed dataset. Batch k of an epoch takes
/// order[k*batch ...] wrapping into the next epoch's order when short.
class BatchSampler {
 public:
  BatchSampler(const std::vector<Triplet>& items, int batch, Mode mode, std::uint64_t seed);

  [[nodiscard]] std::vector<int> indices(long step) const;
  [[nodiscard]] TrainingBatch<float> batch(long step) const { return make_batch(items_, indices(step), mode_); }

 private:
  const std::vector<Triplet>& items_;
  int batch_;
  Mode mode_;
  std::uint64_t seed_;
};

/// Builds batch `step + 1` on a worker thread while the caller consumes batch
/// `step`. Each batch is moved out to exactly one caller.
class Prefetcher {
 public:
  explicit Prefetcher(const BatchSampler& sampler) : sampler_(sampler) {}
  TrainingBatch<float> next(long step);

 private:
  const BatchSampler& sampler_;
  long pending_step_ = -1;
  std::future<TrainingBatch<float>> pending_;
};

}  // namespace styland::data
