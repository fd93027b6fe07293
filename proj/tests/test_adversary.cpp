#include "doctest.h"

#include "gradcheck.hpp"
#include "styland/adversary.hpp"
#include "styland/features.hpp"
#include "styland/nn/ops.hpp"

using namespace styland;
using nn::Shape;
using nn::Tensor;

namespace {

ModelConfig tiny(Mode mode) {
  ModelConfig c;
  c.mode = mode;
  c.output_resolution = 16;
  c.channels = {4, 3};
  c.critic_channels = {5, 3};
  c.label_set = {"sky", "mountain", "water"};
  return c;
}

}  // namespace

TEST_CASE("discriminator takes sample plus condition channels") {
  const auto cfg = ModelConfig::desk(Mode::sd2i);
  const auto d = DiscriminatorWeights<float>::init(cfg, 1);
  CHECK(d.input_channels() == 3 + 7 + 1);
  CHECK(DiscriminatorWeights<float>::init(ModelConfig::desk(Mode::s2d), 1).input_channels() == 1 + 7);
  CHECK(DiscriminatorWeights<float>::init(ModelConfig::desk(Mode::s2i), 1).input_channels() == 3 + 7);

  const auto x = testing::random_tensor(Shape{2, 3, 64, 64}, 1, 0.5).cast<float>();
  const auto cond = testing::random_tensor(Shape{2, 8, 64, 64}, 2).cast<float>().data().abs().eval();
  Tensor<float> c(Shape{2, 8, 64, 64});
  c.data() = cond;
  nn::Graph<float> g(false);
  const auto logits = discriminate(g, d, g.constant(x), g.constant(c));
  CHECK(logits.shape() == Shape{2, 1, 1, 1});
  CHECK(logits.value().all_finite());
  nn::Graph<float> g2(false);
  CHECK((discriminate(g2, DiscriminatorWeights<float>::init(cfg, 1), g2.constant(x), g2.constant(c)).value().data() ==
         logits.value().data())
            .all());

  nn::Graph<float> bad(false);
  CHECK_THROWS_AS(discriminate(bad, d, bad.constant(x), bad.constant(Tensor<float>(Shape{2, 7, 64, 64}))), Error);
  CHECK_THROWS_AS(discriminate(bad, d, bad.constant(Tensor<float>(Shape{2, 3, 32, 32})), bad.constant(c)), Error);
}

TEST_CASE("value-level discriminator validates its inputs") {
  const auto cfg = tiny(Mode::sd2i);
  const auto d = DiscriminatorWeights<double>::init(cfg, 3);
  const SegmentationMap seg(LabelGrid::Zero(16, 16), cfg.label_set);
  const DepthMap<double> depth(16, 16, 0.4);
  const auto x = testing::random_tensor(Shape{1, 3, 16, 16}, 3, 0.3);
  CHECK(std::isfinite(discriminate(d, x, seg, &depth)));
  CHECK_THROWS_AS(discriminate<double>(d, x, seg, nullptr), Error);
}

TEST_CASE("discriminator input gradient matches finite differences") {
  const auto cfg = tiny(Mode::sd2i);
  const auto d = DiscriminatorWeights<double>::init(cfg, 5);
  const auto x0 = testing::random_tensor(Shape{2, 3, 16, 16}, 5, 0.5);
  const auto cond = testing::random_tensor(Shape{2, 4, 16, 16}, 6, 0.5);
  auto f = [&](const Tensor<double>& x) {
    nn::Graph<double> g(false);
    return discriminate(g, d, g.constant(x), g.constant(cond)).value().data().sum();
  };
  nn::Graph<double> g;
  const auto xv = g.variable(x0);
  g.backward(nn::sum(discriminate(g, d, xv, g.constant(cond))));
  CHECK(testing::relative_error(g.grad(xv), testing::numeric_gradient(f, x0)) < 1e-3);

  const auto grads = g.param_grads(d.params);
  for (int idx : {d.from_input.weight, d.final_conv.weight, d.hidden.bias}) {
    CAPTURE(d.params[idx].name);
    const auto numeric = testing::numeric_gradient(
        [&](const Tensor<double>& v) {
          auto copy = d;
          copy.params[idx].value = v;
          nn::Graph<double> h(false);
          return discriminate(h, copy, h.constant(x0), h.constant(cond)).value().data().sum();
        },
        d.params[idx].value);
    CHECK(testing::relative_error(grads[static_cast<std::size_t>(idx)], numeric) < 1e-3);
  }
}

TEST_CASE("encoder latents match generator latent shapes") {
  const auto cfg = ModelConfig::desk(Mode::sd2i);
  const auto e = EncoderWeights<float>::init(cfg, 2);
  const auto x = testing::random_tensor(Shape{1, 3, 64, 64}, 1, 0.5).cast<float>();
  const auto latents = encode(e, x);
  REQUIRE(latents.size() == 4);
  CHECK(latents[0].values.shape() == Shape{1, 64, 8, 8});
  CHECK(latents[1].values.shape() == Shape{1, 64, 16, 16});
  CHECK(latents[2].values.shape() == Shape{1, 64, 32, 32});
  CHECK(latents[3].values.shape() == Shape{1, 32, 64, 64});
  for (int i = 0; i < 4; ++i) CHECK(latents[static_cast<std::size_t>(i)].layer_index == i);
  CHECK_THROWS_AS(encode(e, Tensor<float>(Shape{1, 1, 64, 64})), Error);
}

TEST_CASE("encoder gradient matches finite differences") {
  const auto cfg = tiny(Mode::s2i);
  const auto e = EncoderWeights<double>::init(cfg, 8);
  // seed 9 puts a pre-activation within 1e-4 of the leaky ReLU kink
  const auto x0 = testing::random_tensor(Shape{1, 3, 16, 16}, 12, 0.5);
  const auto p0 = testing::random_tensor(cfg.latent_shape(0), 10);
  const auto p1 = testing::random_tensor(cfg.latent_shape(1), 11);
  auto f = [&](const Tensor<double>& x) {
    nn::Graph<double> g(false);
    const auto l = encode(g, e, g.constant(x));
    return (l[0].value().data() * p0.data()).sum() + (l[1].value().data() * p1.data()).sum();
  };
  nn::Graph<double> g;
  const auto xv = g.variable(x0);
  const auto l = encode(g, e, xv);
  g.backward(nn::add(nn::sum(nn::mul(l[0], g.constant(p0))), nn::sum(nn::mul(l[1], g.constant(p1)))));
  CHECK(testing::relative_error(g.grad(xv), testing::numeric_gradient(f, x0)) < 1e-3);
}

TEST_CASE("feature extractor is seeded and frozen") {
  const auto a = FeatureExtractor<double>::random();
  const auto b = FeatureExtractor<double>::random();
  const auto c = FeatureExtractor<double>::random(99);
  CHECK(a.id() == b.id());
  CHECK(a.id() != c.id());
  CHECK(a.dim() == 112);
  const auto x = testing::random_tensor(Shape{3, 3, 16, 16}, 1, 0.5);
  const auto fa = a.pooled_features(x);
  CHECK(fa.rows() == 3);
  CHECK(fa.cols() == 112);
  CHECK((fa.array() == b.pooled_features(x).array()).all());
  CHECK((fa.array() != c.pooled_features(x).array()).any());

  nn::Graph<double> g;
  const auto xv = g.variable(x);
  g.backward(nn::sum(a.features(g, xv).back()));
  for (const auto& grad : g.param_grads(a.params())) CHECK(grad.data().abs().maxCoeff() == 0.0);
  CHECK(g.grad(xv).data().abs().maxCoeff() > 0.0);
}

TEST_CASE("perceptual distance is a premetric") {
  const auto fx = FeatureExtractor<double>::random();
  const auto x = testing::random_tensor(Shape{2, 3, 16, 16}, 1, 0.5);
  const auto y = testing::random_tensor(Shape{2, 3, 16, 16}, 2, 0.5);
  CHECK(perceptual_distance(fx, x, x) == doctest::Approx(0.0).epsilon(1e-12));
  const double dxy = perceptual_distance(fx, x, y);
  CHECK(dxy > 0.0);
  CHECK(dxy == doctest::Approx(perceptual_distance(fx, y, x)).epsilon(1e-12));
  // one-channel inputs are tiled
  const auto d1 = testing::random_tensor(Shape{1, 1, 16, 16}, 3, 0.5);
  Tensor<double> d3(Shape{1, 3, 16, 16});
  for (int ch = 0; ch < 3; ++ch) d3.sample(0).row(ch) = d1.sample(0).row(0);
  CHECK((fx.pooled_features(d1).array() == fx.pooled_features(d3).array()).all());

  auto f = [&](const Tensor<double>& v) { return perceptual_distance(fx, v, y); };
  nn::Graph<double> g;
  const auto xv = g.variable(x);
  g.backward(perceptual_loss(g, fx, xv, g.constant(y)));
  CHECK(testing::relative_error(g.grad(xv), testing::numeric_gradient(f, x)) < 1e-3);
}
