#include "styland/features.hpp"

#include "styland/core/error.hpp"
#include "styland/nn/ops.hpp"
#include "styland/nn/rng.hpp"

namespace styland {

using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

constexpr int kStageWidths[] = {16, 32, 64};

}  // namespace

template <typename Scalar>
FeatureExtractor<Scalar> FeatureExtractor<Scalar>::random(std::uint64_t seed) {
  FeatureExtractor fx;
  fx.seed_ = seed;
  fx.id_ = "random-conv-v1-seed" + std::to_string(seed);
  nn::Rng rng(seed);
  int in = 3;
  int stage = 0;
  for (int width : kStageWidths) {
    fx.stages_.push_back(nn::make_conv(fx.params_, "stage." + std::to_string(stage++), in, width, 3, rng));
    in = width;
  }
  return fx;
}

template <typename Scalar>
int FeatureExtractor<Scalar>::dim() const {
  int d = 0;
  for (const auto& s : stages_) d += s.out;
  return d;
}

template <typename Scalar>
std::vector<Var<Scalar>> FeatureExtractor<Scalar>::features(Graph<Scalar>& g, Var<Scalar> x) const {
  g.freeze(params_);
  if (x.shape().c == 1) {
    x = nn::concat_channels<Scalar>({x, x, x});
  } else if (x.shape().c != 3) {
    throw Error(ErrorKind::shape_mismatch, "feature extractor expects 1 or 3 channels, got " + nn::to_string(x.shape()));
  }
  if (x.shape().h % 8 != 0 || x.shape().w % 8 != 0) {
    throw Error(ErrorKind::shape_mismatch, "feature extractor needs sides divisible by 8, got " + nn::to_string(x.shape()));
  }
  std::vector<Var<Scalar>> out;
  Var<Scalar> h = x;
  for (const auto& stage : stages_) {
    h = nn::avg_pool(nn::leaky_relu(nn::apply(g, params_, stage, h)), 2);
    out.push_back(h);
  }
  return out;
}

template <typename Scalar>
nn::RowMatrix<double> FeatureExtractor<Scalar>::pooled_features(const Tensor<Scalar>& x) const {
  Graph<Scalar> g(false);
  const auto feats = features(g, g.constant(x));
  nn::RowMatrix<double> out(x.n(), dim());
  int col = 0;
  for (const auto& f : feats) {
    const auto& t = f.value();
    for (int i = 0; i < t.n(); ++i) {
      out.row(i).segment(col, t.c()) = t.sample(i).rowwise().mean().transpose().template cast<double>();
    }
    col += t.c();
  }
  return out;
}

template <typename Scalar>
Var<Scalar> perceptual_loss(Graph<Scalar>& g, const FeatureExtractor<Scalar>& extractor, Var<Scalar> x, Var<Scalar> y) {
  if (x.shape() != y.shape()) {
    throw Error(ErrorKind::shape_mismatch,
                "perceptual loss inputs " + nn::to_string(x.shape()) + " vs " + nn::to_string(y.shape()));
  }
  const auto fx = extractor.features(g, x);
  const auto fy = extractor.features(g, y);
  Var<Scalar> total;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const Var<Scalar> d = nn::sub(nn::channel_unit_norm(fx[i]), nn::channel_unit_norm(fy[i]));
    // mean over (N,C,H,W) times C = mean over (N,H,W) of the channel sum
    const Var<Scalar> term = nn::scale(nn::mean(nn::square(d)), static_cast<Scalar>(d.shape().c));
    total = i == 0 ? term : nn::add(total, term);
  }
  return nn::scale(total, Scalar(1) / static_cast<Scalar>(fx.size()));
}

template <typename Scalar>
Scalar perceptual_distance(const FeatureExtractor<Scalar>& extractor, const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
  Graph<Scalar> g(false);
  return perceptual_loss(g, extractor, g.constant(x), g.constant(y)).value().item();
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;
template Var<float> perceptual_loss(Graph<float>&, const FeatureExtractor<float>&, Var<float>, Var<float>);
template Var<double> perceptual_loss(Graph<double>&, const FeatureExtractor<double>&, Var<double>, Var<double>);
template float perceptual_distance(const FeatureExtractor<float>&, const Tensor<float>&, const Tensor<float>&);
template double perceptual_distance(const FeatureExtractor<double>&, const Tensor<double>&, const Tensor<double>&);

}  // namespace styland
