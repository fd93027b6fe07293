#include "styland/adversary.hpp"

#include "styland/generator.hpp"
#include "styland/nn/ops.hpp"
#include "styland/nn/rng.hpp"

namespace styland {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

std::string layer_name(const char* prefix, int i) { return std::string(prefix) + "." + std::to_string(i); }

int width(const ModelConfig& c, int level) { return c.critic_channels[static_cast<std::size_t>(level)]; }

void check_input(const ModelConfig& c, const Shape& s, int channels, const char* what) {
  if (s.c != channels || s.h != c.output_resolution || s.w != c.output_resolution) {
    throw Error(ErrorKind::shape_mismatch, std::string(what) + " input " + nn::to_string(s) + ", expected " +
                                               std::to_string(channels) + " channels at " +
                                               std::to_string(c.output_resolution) + "x" +
                                               std::to_string(c.output_resolution));
  }
}

}  // namespace

template <typename Scalar>
DiscriminatorWeights<Scalar> DiscriminatorWeights<Scalar>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  DiscriminatorWeights w;
  w.config = config;
  nn::Rng rng(seed);
  const int n = config.layer_count();
  w.from_input = nn::make_conv(w.params, "from_input", w.input_channels(), width(config, n - 1), 1, rng);
  w.blocks.resize(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 1; --i) {
    w.blocks[static_cast<std::size_t>(i)] =
        nn::make_conv(w.params, layer_name("block", i), width(config, i), width(config, i - 1), 3, rng);
  }
  const int c0 = width(config, 0);
  w.final_conv = nn::make_conv(w.params, "final_conv", c0, c0, 3, rng);
  const int flat = c0 * config.base_resolution * config.base_resolution;
  w.hidden = nn::make_linear(w.params, "hidden", flat, c0, rng);
  w.head = nn::make_linear(w.params, "head", c0, 1, rng);
  return w;
}

template <typename Scalar>
EncoderWeights<Scalar> EncoderWeights<Scalar>::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderWeights w;
  w.config = config;
  nn::Rng rng(seed);
  const int n = config.layer_count();
  w.from_input = nn::make_conv(w.params, "from_input", config.output_channels(), width(config, n - 1), 1, rng);
  w.features.resize(static_cast<std::size_t>(n));
  w.heads.resize(static_cast<std::size_t>(n));
  w.down.resize(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    w.features[idx] = nn::make_conv(w.params, layer_name("feature", i), width(config, i), width(config, i), 3, rng);
    w.heads[idx] = nn::make_conv(w.params, layer_name("head", i), width(config, i), config.channels[idx], 1, rng);
    if (i >= 1) w.down[idx] = nn::make_conv(w.params, layer_name("down", i), width(config, i), width(config, i - 1), 3, rng);
  }
  return w;
}

template <typename Scalar>
Var<Scalar> discriminate(Graph<Scalar>& g, const DiscriminatorWeights<Scalar>& weights, Var<Scalar> x,
                         Var<Scalar> condition) {
  const auto& cfg = weights.config;
  check_input(cfg, x.shape(), cfg.output_channels(), "discriminator sample");
  check_input(cfg, condition.shape(), cfg.condition_channels(), "discriminator condition");
  if (x.shape().n != condition.shape().n) throw Error(ErrorKind::shape_mismatch, "sample/condition batch mismatch");
  const auto& p = weights.params;
  const int n = cfg.layer_count();
  Var<Scalar> h = nn::leaky_relu(nn::apply(g, p, weights.from_input, nn::concat_channels<Scalar>({x, condition})));
  for (int i = n - 1; i >= 1; --i) {
    h = nn::avg_pool(nn::leaky_relu(nn::apply(g, p, weights.blocks[static_cast<std::size_t>(i)], h)), 2);
  }
  h = nn::leaky_relu(nn::apply(g, p, weights.final_conv, h));
  const int batch = h.shape().n;
  h = nn::reshape(h, Shape{batch, static_cast<int>(h.shape().sample()), 1, 1});
  h = nn::leaky_relu(nn::apply(g, p, weights.hidden, h));
  return nn::apply(g, p, weights.head, h);
}

template <typename Scalar>
Scalar discriminate(const DiscriminatorWeights<Scalar>& weights, const Tensor<Scalar>& x, const SegmentationMap& seg,
                    const DepthMap<Scalar>* depth) {
  Graph<Scalar> g(false);
  const auto cond = g.constant(prepare_condition(weights.config, seg, depth));
  return discriminate(g, weights, g.constant(x), cond).value().item();
}

template <typename Scalar>
std::vector<Var<Scalar>> encode(Graph<Scalar>& g, const EncoderWeights<Scalar>& weights, Var<Scalar> x) {
  const auto& cfg = weights.config;
  check_input(cfg, x.shape(), cfg.output_channels(), "encoder");
  const auto& p = weights.params;
  const int n = cfg.layer_count();
  std::vector<Var<Scalar>> latents(static_cast<std::size_t>(n));
  Var<Scalar> h = nn::leaky_relu(nn::apply(g, p, weights.from_input, x));
  for (int i = n - 1; i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    h = nn::leaky_relu(nn::apply(g, p, weights.features[idx], h));
    latents[idx] = nn::apply(g, p, weights.heads[idx], h);
    if (i >= 1) h = nn::leaky_relu(nn::apply(g, p, weights.down[idx], nn::avg_pool(h, 2)));
  }
  return latents;
}

template <typename Scalar>
std::vector<SpatialLatent<Scalar>> encode(const EncoderWeights<Scalar>& weights, const Tensor<Scalar>& x) {
  Graph<Scalar> g(false);
  const auto vars = encode(g, weights, g.constant(x));
  std::vector<SpatialLatent<Scalar>> out;
  for (std::size_t i = 0; i < vars.size(); ++i) out.push_back({vars[i].value(), static_cast<int>(i)});
  return out;
}

#define STYLAND_INSTANTIATE_ADVERSARY(S)                                                                  \
  template struct DiscriminatorWeights<S>;                                                                \
  template struct EncoderWeights<S>;                                                                      \
  template Var<S> discriminate(Graph<S>&, const DiscriminatorWeights<S>&, Var<S>, Var<S>);                \
  template S discriminate(const DiscriminatorWeights<S>&, const Tensor<S>&, const SegmentationMap&,       \
                          const DepthMap<S>*);                                                            \
  template std::vector<Var<S>> encode(Graph<S>&, const EncoderWeights<S>&, Var<S>);                       \
  template std::vector<SpatialLatent<S>> encode(const EncoderWeights<S>&, const Tensor<S>&);

STYLAND_INSTANTIATE_ADVERSARY(float)
STYLAND_INSTANTIATE_ADVERSARY(double)

}  // namespace styland
