#pragma once

#include "styland/core/error.hpp"
#include "styland/nn/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace styland {

using LabelGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// {sky, mountain, tree, grass, earth, water, rock}
const std::vector<std::string>& default_label_set();

[[nodiscard]] bool is_power_of_two(int v);

/// Categorical label grid (the content condition). Stored as label ids; the
/// one-hot L x H x W form is derived on demand. Label ids are not range
/// checked on construction so malformed maps can be represented and rejected
/// by validate().
class SegmentationMap {
 public:
  SegmentationMap() = default;
  SegmentationMap(LabelGrid labels, std::vector<std::string> label_set)
      : labels_(std::move(labels)), label_set_(std::move(label_set)) {}

  /// Builds from a (1, L, H, W) tensor; every pixel must hold exactly one 1.
  template <typename Scalar>
  static SegmentationMap from_one_hot(const nn::Tensor<Scalar>& one_hot, std::vector<std::string> label_set);

  [[nodiscard]] const LabelGrid& labels() const { return labels_; }
  [[nodiscard]] const std::vector<std::string>& label_set() const { return label_set_; }
  [[nodiscard]] int height() const { return static_cast<int>(labels_.rows()); }
  [[nodiscard]] int width() const { return static_cast<int>(labels_.cols()); }
  [[nodiscard]] int label_count() const { return static_cast<int>(label_set_.size()); }
  [[nodiscard]] int label_at(int y, int x) const { return labels_(y, x); }
  [[nodiscard]] std::optional<int> label_id(const std::string& name) const;

  /// (1, L, H, W) one-hot tensor.
  template <typename Scalar>
  [[nodiscard]] nn::Tensor<Scalar> one_hot() const;

  /// Throws Error on L < 2, non power-of-two sides < 8, or ids >= L.
  void validate() const;

  friend bool operator==(const SegmentationMap& a, const SegmentationMap& b) {
    return a.label_set_ == b.label_set_ && a.labels_ == b.labels_;
  }

 private:
  LabelGrid labels_;
  std::vector<std::string> label_set_;
};

/// Scalar depth in [0,1] with 0 = near and 1 = far.
template <typename Scalar = float>
class DepthMap {
 public:
  DepthMap() = default;
  explicit DepthMap(Grid<Scalar> values) : values_(std::move(values)) {}
  DepthMap(int height, int width, Scalar fill) : values_(Grid<Scalar>::Constant(height, width, fill)) {}

  /// From a (1, 1, H, W) tensor.
  static DepthMap from_tensor(const nn::Tensor<Scalar>& t, int sample = 0);

  [[nodiscard]] const Grid<Scalar>& values() const { return values_; }
  Grid<Scalar>& values() { return values_; }
  [[nodiscard]] int height() const { return static_cast<int>(values_.rows()); }
  [[nodiscard]] int width() const { return static_cast<int>(values_.cols()); }
  [[nodiscard]] Scalar operator()(int y, int x) const { return values_(y, x); }

  [[nodiscard]] nn::Tensor<Scalar> tensor() const;

  /// Throws Error when any value is non-finite or outside [0,1].
  void validate() const;

  friend bool operator==(const DepthMap& a, const DepthMap& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           (a.values_ == b.values_).all();
  }

 private:
  Grid<Scalar> values_;
};

/// 3 x H x W image with values in [-1,1], held as a (1,3,H,W) tensor.
template <typename Scalar = float>
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(nn::Tensor<Scalar> values) : values_(std::move(values)) {}

  [[nodiscard]] const nn::Tensor<Scalar>& tensor() const { return values_; }
  nn::Tensor<Scalar>& tensor() { return values_; }
  [[nodiscard]] int height() const { return values_.h(); }
  [[nodiscard]] int width() const { return values_.w(); }
  [[nodiscard]] int channels() const { return values_.c(); }

  void validate() const;

 private:
  nn::Tensor<Scalar> values_;
};

/// Spatial latent code of one generator layer; values are (N, C, h, w).
template <typename Scalar = float>
struct SpatialLatent {
  nn::Tensor<Scalar> values;
  int layer_index = 0;
};

enum class Mode {
  s2d,   ///< segmentation -> depth
  sd2i,  ///< segmentation + depth -> image
  s2i,   ///< segmentation -> image (depth ablation)
};

const char* to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct LossWeights {
  double adversarial = 1.0;
  double r1_gamma = 10.0;
  int r1_interval = 16;
  double perceptual = 1.0;
  double domain_guided = 1.0;
  double reconstruction = 1.0;
};

struct OptimizerSettings {
  double lr = 0.002;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
  int batch = 8;
};

struct ModelConfig {
  Mode mode = Mode::sd2i;
  int output_resolution = 64;
  /// Spatial side of the base latent and of layer 0.
  int base_resolution = 8;
  int z_dim = 512;
  int mapping_layers = 4;
  int mapping_width = 512;
  /// Channel width of each layer; channels[0] is the base latent depth.
  std::vector<int> channels{64, 64, 64, 32};
  /// Widths of the discriminator / encoder pyramids, index-aligned with layers.
  std::vector<int> critic_channels{64, 64, 64, 32};
  std::vector<std::string> label_set = default_label_set();
  LossWeights loss{};
  OptimizerSettings optimizer{};
  std::uint64_t init_seed = 0;

  /// 64x64 working configuration.
  static ModelConfig desk(Mode mode);
  /// 256x256 configuration.
  static ModelConfig full(Mode mode);
  /// desk(), full(), or for other sides 64-wide layers narrowing to 32 at the output.
  static ModelConfig for_resolution(Mode mode, int resolution);

  [[nodiscard]] int layer_count() const { return static_cast<int>(channels.size()); }
  [[nodiscard]] int layer_resolution(int layer) const { return base_resolution << layer; }
  [[nodiscard]] int label_count() const { return static_cast<int>(label_set.size()); }
  [[nodiscard]] bool uses_depth_condition() const { return mode == Mode::sd2i; }
  [[nodiscard]] int condition_channels() const { return label_count() + (uses_depth_condition() ? 1 : 0); }
  [[nodiscard]] int output_channels() const { return mode == Mode::s2d ? 1 : 3; }
  /// (C0, H0, W0) of the random latent.
  [[nodiscard]] nn::Shape base_latent_shape(int batch = 1) const {
    return {batch, channels.front(), base_resolution, base_resolution};
  }
  [[nodiscard]] nn::Shape latent_shape(int layer, int batch = 1) const {
    const int r = layer_resolution(layer);
    return {batch, channels.at(static_cast<std::size_t>(layer)), r, r};
  }

  /// Throws Error(invalid_argument) describing the first violated invariant.
  void validate() const;
};

/// Throws Error(shape_mismatch | out_of_range | not_one_hot | ...) unless the
/// pair is well formed.
template <typename Scalar>
void validate_pair(const SegmentationMap& seg, const DepthMap<Scalar>& depth);

/// Nearest-neighbour resize of labels and area-average resize of depth to a
/// square power-of-two target in [8, source].
template <typename Scalar>
std::pair<SegmentationMap, DepthMap<Scalar>> resize_condition(const SegmentationMap& seg,
                                                              const DepthMap<Scalar>& depth, int target);

SegmentationMap resize_segmentation(const SegmentationMap& seg, int target);
template <typename Scalar>
DepthMap<Scalar> resize_depth(const DepthMap<Scalar>& depth, int target);

/// Stacks condition maps into a (N, L [+1], H, W) tensor.
template <typename Scalar>
nn::Tensor<Scalar> condition_tensor(const std::vector<SegmentationMap>& segs,
                                    const std::vector<DepthMap<Scalar>>* depths);

}  // namespace styland
