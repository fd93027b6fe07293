#pragma once

#include "styland/nn/graph.hpp"
#include "styland/nn/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace styland {

/// Fixed, seeded, untrained convolutional stack used as the feature space of
/// the perceptual loss, FID and diversity metrics. Three stages of
/// conv3x3 + leaky ReLU, each followed by a 2x average pool; stage widths
/// 16, 32, 64. One-channel inputs (depth) are tiled to three channels.
///
/// Two extractors with the same id produce identical features.
template <typename Scalar>
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kDefaultSeed = 20220607;

  static FeatureExtractor random(std::uint64_t seed = kDefaultSeed);

  [[nodiscard]] const std::string& id() const { return id_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const nn::ParameterStore<Scalar>& params() const { return params_; }
  /// Length of pooled_features(): the summed stage widths.
  [[nodiscard]] int dim() const;
  [[nodiscard]] int stage_count() const { return static_cast<int>(stages_.size()); }

  /// Activations of every stage. The extractor's parameters are frozen in `g`.
  std::vector<nn::Var<Scalar>> features(nn::Graph<Scalar>& g, nn::Var<Scalar> x) const;

  /// Spatially averaged activations of all stages, (N, dim) row-major.
  [[nodiscard]] nn::RowMatrix<double> pooled_features(const nn::Tensor<Scalar>& x) const;

 private:
  std::string id_;
  std::uint64_t seed_ = 0;
  nn::ParameterStore<Scalar> params_;
  std::vector<nn::ConvLayer> stages_;
};

/// Mean over stages of the per-pixel squared distance between channel
/// unit-normalized features, averaged over batch and pixels.
template <typename Scalar>
nn::Var<Scalar> perceptual_loss(nn::Graph<Scalar>& g, const FeatureExtractor<Scalar>& extractor, nn::Var<Scalar> x,
                                nn::Var<Scalar> y);

template <typename Scalar>
Scalar perceptual_distance(const FeatureExtractor<Scalar>& extractor, const nn::Tensor<Scalar>& x,
                           const nn::Tensor<Scalar>& y);

extern template class FeatureExtractor<float>;
extern template class FeatureExtractor<double>;

}  // namespace styland
