#pragma once

#include "styland/core/types.hpp"
#include "styland/nn/graph.hpp"
#include "styland/nn/layers.hpp"

#include <cstdint>
#include <vector>

namespace styland {

/// Conditional discriminator. Its input is the channel-wise concatenation of
/// the sample (image or depth) with the condition maps; a strided pyramid of
/// 3x3 convolutions and 2x average pools reduces it to the base resolution,
/// followed by a two-layer realness head.
template <typename Scalar>
struct DiscriminatorWeights {
  ModelConfig config;
  nn::ParameterStore<Scalar> params;
  nn::ConvLayer from_input;
  std::vector<nn::ConvLayer> blocks;  // blocks[i] maps level i -> level i-1, for i >= 1
  nn::ConvLayer final_conv;
  nn::LinearLayer hidden;
  nn::LinearLayer head;

  static DiscriminatorWeights init(const ModelConfig& config, std::uint64_t seed);
  [[nodiscard]] int input_channels() const { return config.output_channels() + config.condition_channels(); }
};

/// Encoder pyramid: one latent per generator layer with exactly the w+_i
/// shapes, so that synthesize(encode(x)) reconstructs x.
template <typename Scalar>
struct EncoderWeights {
  ModelConfig config;
  nn::ParameterStore<Scalar> params;
  nn::ConvLayer from_input;
  std::vector<nn::ConvLayer> features;
  std::vector<nn::ConvLayer> heads;
  std::vector<nn::ConvLayer> down;  // down[i] maps level i -> level i-1 after pooling, i >= 1

  static EncoderWeights init(const ModelConfig& config, std::uint64_t seed);
};

/// Logits, one per sample: (N, 1, 1, 1).
template <typename Scalar>
nn::Var<Scalar> discriminate(nn::Graph<Scalar>& g, const DiscriminatorWeights<Scalar>& weights, nn::Var<Scalar> x,
                             nn::Var<Scalar> condition);

/// Value-level discriminator on one sample.
template <typename Scalar>
Scalar discriminate(const DiscriminatorWeights<Scalar>& weights, const nn::Tensor<Scalar>& x, const SegmentationMap& seg,
                    const DepthMap<Scalar>* depth);

template <typename Scalar>
std::vector<nn::Var<Scalar>> encode(nn::Graph<Scalar>& g, const EncoderWeights<Scalar>& weights, nn::Var<Scalar> x);

template <typename Scalar>
std::vector<SpatialLatent<Scalar>> encode(const EncoderWeights<Scalar>& weights, const nn::Tensor<Scalar>& x);

extern template struct DiscriminatorWeights<float>;
extern template struct DiscriminatorWeights<double>;
extern template struct EncoderWeights<float>;
extern template struct EncoderWeights<double>;

}  // namespace styland
