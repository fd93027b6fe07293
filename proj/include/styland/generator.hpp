#pragma once

#include "styland/core/types.hpp"
#include "styland/nn/graph.hpp"
#include "styland/nn/layers.hpp"

#include <cstdint>
#include <vector>

namespace styland {

/// Parameters of one generator instantiation (S2D, SD2I or S2I; the mode in
/// `config` fixes condition and output channel counts).
///
/// Condition preparation: a mapping network turns z into the spatial latent
/// w (C0 x 8 x 8) and one condition block per layer turns the resized
/// condition maps into m_i. Condition fusion: w+_i = conv(carry_i + m_i),
/// where carry_0 = w and carry_i is w+_{i-1} upsampled 2x and projected to
/// C_i. Synthesis: per layer, conv -> per-pixel noise -> instance norm ->
/// per-pixel modulation from w+_i -> leaky ReLU, with skip-summed output
/// projections squashed by tanh.
template <typename Scalar>
struct GeneratorWeights {
  struct SynthesisLayer {
    nn::ConvLayer conv;
    nn::ConvLayer modulation;  // 1x1, C_i -> 2 C_i (scale, bias)
    nn::ConvLayer to_output;   // 1x1, C_i -> output channels
    int noise_strength = -1;
  };

  ModelConfig config;
  nn::ParameterStore<Scalar> params;
  std::vector<nn::LinearLayer> mapping;
  std::vector<nn::ConvLayer> condition;
  std::vector<nn::ConvLayer> carry;  // carry[i] used for layer i >= 1; carry[0] unused
  std::vector<nn::ConvLayer> fusion;
  std::vector<SynthesisLayer> synthesis;
  int constant_input = -1;

  static GeneratorWeights init(const ModelConfig& config, std::uint64_t seed);
  [[nodiscard]] int layer_count() const { return config.layer_count(); }
};

/// Per-layer noise grids, each (N, 1, H_i, W_i).
template <typename Scalar>
struct NoiseSpec {
  std::vector<nn::Tensor<Scalar>> layers;

  static NoiseSpec zeros(const ModelConfig& config, int batch);
  static NoiseSpec from_seed(const ModelConfig& config, int batch, std::uint64_t seed);
  void validate(const ModelConfig& config, int batch) const;
};

/// Standard-normal latent vectors, (N, z_dim, 1, 1).
template <typename Scalar>
nn::Tensor<Scalar> sample_z(const ModelConfig& config, int batch, std::uint64_t seed);

// --- graph-level forward pieces (differentiable) ----------------------------

template <typename Scalar>
nn::Var<Scalar> map_random_latent(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, nn::Var<Scalar> z);

/// `condition` is (N, L[+1], H, W) at output resolution: one-hot labels,
/// followed by depth for SD2I. Labels are resized nearest-neighbour, depth by
/// area averaging.
template <typename Scalar>
nn::Var<Scalar> build_condition_latent(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights,
                                       nn::Var<Scalar> condition, int layer);

/// The latent that m_i is added to: w itself for layer 0, otherwise w+_{i-1}
/// upsampled and projected to layer i's shape.
template <typename Scalar>
nn::Var<Scalar> fusion_carry(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, nn::Var<Scalar> w_prev,
                             int layer);

/// w+_i = conv(fusion_carry(w_prev) + m_i).
template <typename Scalar>
nn::Var<Scalar> fuse(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, nn::Var<Scalar> w_prev,
                     nn::Var<Scalar> m, int layer);

/// Output in [-1,1] (images) or [0,1] (S2D depth).
template <typename Scalar>
nn::Var<Scalar> synthesize(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights,
                           const std::vector<nn::Var<Scalar>>& latents, const NoiseSpec<Scalar>& noise);

/// Mapping, condition blocks and fusion chain: returns w+_0 .. w+_{n-1}.
template <typename Scalar>
std::vector<nn::Var<Scalar>> intermediate_latents(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights,
                                                  nn::Var<Scalar> condition, nn::Var<Scalar> z);

template <typename Scalar>
nn::Var<Scalar> generate(nn::Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, nn::Var<Scalar> condition,
                         nn::Var<Scalar> z, const NoiseSpec<Scalar>& noise);

// --- value-level API --------------------------------------------------------

template <typename Scalar>
SpatialLatent<Scalar> map_random_latent(const GeneratorWeights<Scalar>& weights, const nn::Tensor<Scalar>& z);

template <typename Scalar>
SpatialLatent<Scalar> build_condition_latent(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                             const DepthMap<Scalar>* depth, int layer);

template <typename Scalar>
SpatialLatent<Scalar> fuse(const GeneratorWeights<Scalar>& weights, const SpatialLatent<Scalar>& w_prev,
                           const SpatialLatent<Scalar>& m);

template <typename Scalar>
nn::Tensor<Scalar> synthesize(const GeneratorWeights<Scalar>& weights, const std::vector<SpatialLatent<Scalar>>& latents,
                              const NoiseSpec<Scalar>& noise);

/// Full forward pass for one condition pair. `depth` must be given for SD2I
/// and is ignored otherwise. Deterministic in all arguments.
template <typename Scalar>
nn::Tensor<Scalar> generate(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                            const DepthMap<Scalar>* depth, const nn::Tensor<Scalar>& z, std::uint64_t noise_seed);

template <typename Scalar>
ImageTensor<Scalar> generate_image(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                   const DepthMap<Scalar>* depth, const nn::Tensor<Scalar>& z, std::uint64_t noise_seed);

template <typename Scalar>
DepthMap<Scalar> generate_depth(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                const nn::Tensor<Scalar>& z, std::uint64_t noise_seed);

/// Builds the (1, L[+1], H, W) condition tensor the weights expect, after
/// validating the maps against the config.
template <typename Scalar>
nn::Tensor<Scalar> prepare_condition(const ModelConfig& config, const SegmentationMap& seg,
                                     const DepthMap<Scalar>* depth);

extern template struct GeneratorWeights<float>;
extern template struct GeneratorWeights<double>;

}  // namespace styland
