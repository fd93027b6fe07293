#include "styland/generator.hpp"

#include "styland/nn/ops.hpp"
#include "styland/nn/rng.hpp"

namespace styland {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kMappingLrMul = 0.01;

std::string layer_name(const char* prefix, int i) { return std::string(prefix) + "." + std::to_string(i); }

template <typename Scalar>
void check_layer(const GeneratorWeights<Scalar>& weights, int layer) {
  if (layer < 0 || layer >= weights.layer_count()) {
    throw Error(ErrorKind::invalid_argument,
                "layer index " + std::to_string(layer) + " outside [0, " + std::to_string(weights.layer_count()) + ")");
  }
}

template <typename Scalar>
void check_shape(const Tensor<Scalar>& t, const Shape& expected, const std::string& what) {
  if (t.shape() != expected) {
    throw Error(ErrorKind::shape_mismatch, what + " has shape " + nn::to_string(t.shape()) + ", expected " +
                                               nn::to_string(expected));
  }
}

}  // namespace

template <typename Scalar>
GeneratorWeights<Scalar> GeneratorWeights<Scalar>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  GeneratorWeights w;
  w.config = config;
  nn::Rng rng(seed);
  auto& p = w.params;
  const auto lr_mul = static_cast<Scalar>(kMappingLrMul);

  int width = config.z_dim;
  for (int i = 0; i < config.mapping_layers; ++i) {
    w.mapping.push_back(nn::make_linear(p, layer_name("mapping", i), width, config.mapping_width, rng, lr_mul));
    width = config.mapping_width;
  }
  const Shape base = config.base_latent_shape();
  w.mapping.push_back(nn::make_linear(p, "mapping.out", width, static_cast<int>(base.sample()), rng, lr_mul));

  const int n = config.layer_count();
  const int out_ch = config.output_channels();
  w.constant_input = p.add("synthesis.constant", Tensor<Scalar>(Shape{1, config.channels[0], base.h, base.w}, Scalar(1)));
  for (int i = 0; i < n; ++i) {
    const int ci = config.channels[static_cast<std::size_t>(i)];
    const int cprev = i == 0 ? ci : config.channels[static_cast<std::size_t>(i - 1)];
    w.condition.push_back(nn::make_conv(p, layer_name("condition", i), config.condition_channels(), ci, 3, rng));
    w.carry.push_back(i == 0 ? nn::ConvLayer{} : nn::make_conv(p, layer_name("carry", i), cprev, ci, 1, rng));
    w.fusion.push_back(nn::make_conv(p, layer_name("fusion", i), ci, ci, 3, rng));

    SynthesisLayer s;
    s.conv = nn::make_conv(p, layer_name("synthesis.conv", i), cprev, ci, 3, rng);
    s.modulation = nn::make_conv(p, layer_name("synthesis.modulation", i), ci, 2 * ci, 1, rng);
    s.to_output = nn::make_conv(p, layer_name("synthesis.to_output", i), ci, out_ch, 1, rng);
    s.noise_strength = p.add_constant(layer_name("synthesis.noise_strength", i), Shape{1, 1, 1, 1}, Scalar(0));
    w.synthesis.push_back(s);
  }
  return w;
}

template <typename Scalar>
NoiseSpec<Scalar> NoiseSpec<Scalar>::zeros(const ModelConfig& config, int batch) {
  NoiseSpec spec;
  for (int i = 0; i < config.layer_count(); ++i) {
    const int r = config.layer_resolution(i);
    spec.layers.emplace_back(Shape{batch, 1, r, r});
  }
  return spec;
}

template <typename Scalar>
NoiseSpec<Scalar> NoiseSpec<Scalar>::from_seed(const ModelConfig& config, int batch, std::uint64_t seed) {
  NoiseSpec spec = zeros(config, batch);
  nn::Rng rng(nn::mix_seed(seed, 0x6e6f697365ULL));
  for (auto& t : spec.layers) {
    for (std::ptrdiff_t k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(rng.normal());
  }
  return spec;
}

template <typename Scalar>
void NoiseSpec<Scalar>::validate(const ModelConfig& config, int batch) const {
  if (static_cast<int>(layers.size()) != config.layer_count()) {
    throw Error(ErrorKind::shape_mismatch, "noise spec has " + std::to_string(layers.size()) + " layers, expected " +
                                               std::to_string(config.layer_count()));
  }
  for (int i = 0; i < config.layer_count(); ++i) {
    const int r = config.layer_resolution(i);
    check_shape(layers[static_cast<std::size_t>(i)], Shape{batch, 1, r, r}, "noise layer " + std::to_string(i));
  }
}

template <typename Scalar>
Tensor<Scalar> sample_z(const ModelConfig& config, int batch, std::uint64_t seed) {
  Tensor<Scalar> z(Shape{batch, config.z_dim, 1, 1});
  nn::Rng rng(nn::mix_seed(seed, 0x7a));
  for (std::ptrdiff_t k = 0; k < z.size(); ++k) z.data()[k] = static_cast<Scalar>(rng.normal());
  return z;
}

// --- graph-level ------------------------------------------------------------

template <typename Scalar>
Var<Scalar> map_random_latent(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, Var<Scalar> z) {
  const auto& cfg = weights.config;
  if (z.shape().sample() != cfg.z_dim) {
    throw Error(ErrorKind::shape_mismatch,
                "z has " + std::to_string(z.shape().sample()) + " entries, expected z_dim " + std::to_string(cfg.z_dim));
  }
  if (!z.value().all_finite()) throw Error(ErrorKind::non_finite, "z contains non-finite values");
  const int batch = z.shape().n;
  Var<Scalar> h = nn::pixel_norm(nn::reshape(z, Shape{batch, cfg.z_dim, 1, 1}));
  for (std::size_t i = 0; i + 1 < weights.mapping.size(); ++i) {
    h = nn::leaky_relu(nn::apply(g, weights.params, weights.mapping[i], h));
  }
  h = nn::apply(g, weights.params, weights.mapping.back(), h);
  return nn::reshape(h, cfg.base_latent_shape(batch));
}

template <typename Scalar>
Var<Scalar> build_condition_latent(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, Var<Scalar> condition,
                                   int layer) {
  check_layer(weights, layer);
  const auto& cfg = weights.config;
  const Shape s = condition.shape();
  if (s.c != cfg.condition_channels() || s.h != cfg.output_resolution || s.w != cfg.output_resolution) {
    throw Error(ErrorKind::shape_mismatch, "condition tensor " + nn::to_string(s) + " does not match config (" +
                                               std::to_string(cfg.condition_channels()) + " channels at " +
                                               std::to_string(cfg.output_resolution) + ")");
  }
  const int factor = cfg.output_resolution / cfg.layer_resolution(layer);
  const int labels = cfg.label_count();
  Var<Scalar> resized = nn::nearest_downsample(nn::slice_channels(condition, 0, labels), factor);
  if (cfg.uses_depth_condition()) {
    resized = nn::concat_channels<Scalar>({resized, nn::avg_pool(nn::slice_channels(condition, labels, 1), factor)});
  }
  return nn::leaky_relu(nn::apply(g, weights.params, weights.condition[static_cast<std::size_t>(layer)], resized));
}

template <typename Scalar>
Var<Scalar> fusion_carry(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, Var<Scalar> w_prev, int layer) {
  check_layer(weights, layer);
  const auto& cfg = weights.config;
  const int batch = w_prev.shape().n;
  if (layer == 0) {
    if (w_prev.shape() != cfg.base_latent_shape(batch)) {
      throw Error(ErrorKind::shape_mismatch, "random latent " + nn::to_string(w_prev.shape()) + ", expected " +
                                                 nn::to_string(cfg.base_latent_shape(batch)));
    }
    return w_prev;
  }
  if (w_prev.shape() != cfg.latent_shape(layer - 1, batch)) {
    throw Error(ErrorKind::shape_mismatch, "w+ of layer " + std::to_string(layer - 1) + " has shape " +
                                               nn::to_string(w_prev.shape()) + ", expected " +
                                               nn::to_string(cfg.latent_shape(layer - 1, batch)));
  }
  return nn::apply(g, weights.params, weights.carry[static_cast<std::size_t>(layer)], nn::upsample2x(w_prev));
}

template <typename Scalar>
Var<Scalar> fuse(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, Var<Scalar> w_prev, Var<Scalar> m,
                 int layer) {
  const Var<Scalar> carry = fusion_carry(g, weights, w_prev, layer);
  if (carry.shape() != m.shape()) {
    throw Error(ErrorKind::shape_mismatch, "condition latent " + nn::to_string(m.shape()) + " vs fused latent " +
                                               nn::to_string(carry.shape()));
  }
  return nn::apply(g, weights.params, weights.fusion[static_cast<std::size_t>(layer)], nn::add(carry, m));
}

template <typename Scalar>
Var<Scalar> synthesize(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, const std::vector<Var<Scalar>>& latents,
                       const NoiseSpec<Scalar>& noise) {
  const auto& cfg = weights.config;
  const int n = cfg.layer_count();
  if (static_cast<int>(latents.size()) != n) {
    throw Error(ErrorKind::shape_mismatch,
                "synthesis needs " + std::to_string(n) + " latents, got " + std::to_string(latents.size()));
  }
  const int batch = latents.front().shape().n;
  for (int i = 0; i < n; ++i) {
    check_shape(latents[static_cast<std::size_t>(i)].value(), cfg.latent_shape(i, batch),
                "latent " + std::to_string(i));
  }
  noise.validate(cfg, batch);
  const auto& p = weights.params;

  Var<Scalar> h = nn::repeat_batch(g.param(p, weights.constant_input), batch);
  Var<Scalar> out;
  for (int i = 0; i < n; ++i) {
    const auto& layer = weights.synthesis[static_cast<std::size_t>(i)];
    const int ci = cfg.channels[static_cast<std::size_t>(i)];
    if (i > 0) h = nn::upsample2x(h);
    h = nn::apply(g, p, layer.conv, h);
    h = nn::add_noise(h, noise.layers[static_cast<std::size_t>(i)], g.param(p, layer.noise_strength));
    h = nn::instance_norm(h);
    const Var<Scalar> style = nn::apply(g, p, layer.modulation, latents[static_cast<std::size_t>(i)]);
    const Var<Scalar> gamma = nn::slice_channels(style, 0, ci);
    const Var<Scalar> beta = nn::slice_channels(style, ci, ci);
    h = nn::leaky_relu(nn::add(nn::mul(h, nn::add_scalar(gamma, Scalar(1))), beta));
    const Var<Scalar> o = nn::apply(g, p, layer.to_output, h);
    out = i == 0 ? o : nn::add(nn::upsample2x(out), o);
  }
  out = nn::tanh(out);
  if (cfg.mode == Mode::s2d) out = nn::add_scalar(nn::scale(out, Scalar(0.5)), Scalar(0.5));
  return out;
}

template <typename Scalar>
std::vector<Var<Scalar>> intermediate_latents(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights,
                                              Var<Scalar> condition, Var<Scalar> z) {
  if (condition.shape().n != z.shape().n) {
    throw Error(ErrorKind::shape_mismatch, "condition batch " + std::to_string(condition.shape().n) + " vs z batch " +
                                               std::to_string(z.shape().n));
  }
  std::vector<Var<Scalar>> latents;
  Var<Scalar> prev = map_random_latent(g, weights, z);
  for (int i = 0; i < weights.layer_count(); ++i) {
    prev = fuse(g, weights, prev, build_condition_latent(g, weights, condition, i), i);
    latents.push_back(prev);
  }
  return latents;
}

template <typename Scalar>
Var<Scalar> generate(Graph<Scalar>& g, const GeneratorWeights<Scalar>& weights, Var<Scalar> condition, Var<Scalar> z,
                     const NoiseSpec<Scalar>& noise) {
  return synthesize(g, weights, intermediate_latents(g, weights, condition, z), noise);
}

// --- value-level ------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> prepare_condition(const ModelConfig& config, const SegmentationMap& seg, const DepthMap<Scalar>* depth) {
  if (seg.label_set() != config.label_set) {
    throw Error(ErrorKind::invalid_argument, "segmentation label set differs from the model's label set");
  }
  if (seg.height() != config.output_resolution || seg.width() != config.output_resolution) {
    throw Error(ErrorKind::shape_mismatch, "segmentation is " + std::to_string(seg.height()) + "x" +
                                               std::to_string(seg.width()) + ", model expects " +
                                               std::to_string(config.output_resolution));
  }
  if (config.uses_depth_condition()) {
    if (depth == nullptr) throw Error(ErrorKind::invalid_argument, "this model needs a depth map");
    validate_pair(seg, *depth);
    const std::vector<DepthMap<Scalar>> depths{*depth};
    return condition_tensor<Scalar>({seg}, &depths);
  }
  seg.validate();
  return condition_tensor<Scalar>({seg}, nullptr);
}

template <typename Scalar>
SpatialLatent<Scalar> map_random_latent(const GeneratorWeights<Scalar>& weights, const Tensor<Scalar>& z) {
  Graph<Scalar> g(false);
  return {map_random_latent(g, weights, g.constant(z)).value(), 0};
}

template <typename Scalar>
SpatialLatent<Scalar> build_condition_latent(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                             const DepthMap<Scalar>* depth, int layer) {
  Graph<Scalar> g(false);
  const auto cond = g.constant(prepare_condition(weights.config, seg, depth));
  return {build_condition_latent(g, weights, cond, layer).value(), layer};
}

template <typename Scalar>
SpatialLatent<Scalar> fuse(const GeneratorWeights<Scalar>& weights, const SpatialLatent<Scalar>& w_prev,
                           const SpatialLatent<Scalar>& m) {
  Graph<Scalar> g(false);
  return {fuse(g, weights, g.constant(w_prev.values), g.constant(m.values), m.layer_index).value(), m.layer_index};
}

template <typename Scalar>
Tensor<Scalar> synthesize(const GeneratorWeights<Scalar>& weights, const std::vector<SpatialLatent<Scalar>>& latents,
                          const NoiseSpec<Scalar>& noise) {
  Graph<Scalar> g(false);
  std::vector<Var<Scalar>> vars;
  for (std::size_t i = 0; i < latents.size(); ++i) {
    if (latents[i].layer_index != static_cast<int>(i)) {
      throw Error(ErrorKind::invalid_argument, "latents must be ordered by layer index");
    }
    vars.push_back(g.constant(latents[i].values));
  }
  return synthesize(g, weights, vars, noise).value();
}

template <typename Scalar>
Tensor<Scalar> generate(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg, const DepthMap<Scalar>* depth,
                        const Tensor<Scalar>& z, std::uint64_t noise_seed) {
  Graph<Scalar> g(false);
  const auto cond = g.constant(prepare_condition(weights.config, seg, depth));
  const auto noise = NoiseSpec<Scalar>::from_seed(weights.config, 1, noise_seed);
  return generate(g, weights, cond, g.constant(z), noise).value();
}

template <typename Scalar>
ImageTensor<Scalar> generate_image(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                   const DepthMap<Scalar>* depth, const Tensor<Scalar>& z, std::uint64_t noise_seed) {
  if (weights.config.mode == Mode::s2d) throw Error(ErrorKind::invalid_argument, "S2D weights produce depth, not images");
  return ImageTensor<Scalar>(generate(weights, seg, depth, z, noise_seed));
}

template <typename Scalar>
DepthMap<Scalar> generate_depth(const GeneratorWeights<Scalar>& weights, const SegmentationMap& seg,
                                const Tensor<Scalar>& z, std::uint64_t noise_seed) {
  if (weights.config.mode != Mode::s2d) throw Error(ErrorKind::invalid_argument, "only S2D weights produce depth");
  return DepthMap<Scalar>::from_tensor(generate<Scalar>(weights, seg, nullptr, z, noise_seed));
}

#define STYLAND_INSTANTIATE_GENERATOR(S)                                                                          \
  template struct GeneratorWeights<S>;                                                                            \
  template struct NoiseSpec<S>;                                                                                   \
  template Tensor<S> sample_z<S>(const ModelConfig&, int, std::uint64_t);                                         \
  template Var<S> map_random_latent(Graph<S>&, const GeneratorWeights<S>&, Var<S>);                               \
  template Var<S> build_condition_latent(Graph<S>&, const GeneratorWeights<S>&, Var<S>, int);                     \
  template Var<S> fusion_carry(Graph<S>&, const GeneratorWeights<S>&, Var<S>, int);                               \
  template Var<S> fuse(Graph<S>&, const GeneratorWeights<S>&, Var<S>, Var<S>, int);                               \
  template Var<S> synthesize(Graph<S>&, const GeneratorWeights<S>&, const std::vector<Var<S>>&, const NoiseSpec<S>&); \
  template std::vector<Var<S>> intermediate_latents(Graph<S>&, const GeneratorWeights<S>&, Var<S>, Var<S>);       \
  template Var<S> generate(Graph<S>&, const GeneratorWeights<S>&, Var<S>, Var<S>, const NoiseSpec<S>&);           \
  template Tensor<S> prepare_condition<S>(const ModelConfig&, const SegmentationMap&, const DepthMap<S>*);         \
  template SpatialLatent<S> map_random_latent(const GeneratorWeights<S>&, const Tensor<S>&);                      \
  template SpatialLatent<S> build_condition_latent(const GeneratorWeights<S>&, const SegmentationMap&,            \
                                                   const DepthMap<S>*, int);                                      \
  template SpatialLatent<S> fuse(const GeneratorWeights<S>&, const SpatialLatent<S>&, const SpatialLatent<S>&);   \
  template Tensor<S> synthesize(const GeneratorWeights<S>&, const std::vector<SpatialLatent<S>>&,                 \
                                const NoiseSpec<S>&);                                                             \
  template Tensor<S> generate(const GeneratorWeights<S>&, const SegmentationMap&, const DepthMap<S>*,             \
                              const Tensor<S>&, std::uint64_t);                                                   \
  template ImageTensor<S> generate_image(const GeneratorWeights<S>&, const SegmentationMap&, const DepthMap<S>*,  \
                                         const Tensor<S>&, std::uint64_t);                                        \
  template DepthMap<S> generate_depth(const GeneratorWeights<S>&, const SegmentationMap&, const Tensor<S>&,       \
                                      std::uint64_t);

STYLAND_INSTANTIATE_GENERATOR(float)
STYLAND_INSTANTIATE_GENERATOR(double)

}  // namespace styland
