#pragma once

#include "styland/nn/graph.hpp"

#include <vector>

/// Differentiable tensor operations on Graph nodes. Every op computes its
/// value eagerly and, when an input is tracked, records the matching
/// vector-Jacobian product.
namespace styland::nn {

template <typename Scalar> Var<Scalar> add(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b);
template <typename Scalar> Var<Scalar> scale(Var<Scalar> a, Scalar s);
template <typename Scalar> Var<Scalar> add_scalar(Var<Scalar> a, Scalar s);

template <typename Scalar> Var<Scalar> leaky_relu(Var<Scalar> a, Scalar slope = Scalar(0.2));
template <typename Scalar> Var<Scalar> tanh(Var<Scalar> a);
/// log(1 + exp(a)), evaluated stably.
template <typename Scalar> Var<Scalar> softplus(Var<Scalar> a);
template <typename Scalar> Var<Scalar> square(Var<Scalar> a);

/// Reductions to a (1,1,1,1) tensor.
template <typename Scalar> Var<Scalar> sum(Var<Scalar> a);
template <typename Scalar> Var<Scalar> mean(Var<Scalar> a);
template <typename Scalar> Var<Scalar> mean_abs_diff(Var<Scalar> a, Var<Scalar> b);
/// Per-sample mean over (C,H,W); result shape (N,1,1,1).
template <typename Scalar> Var<Scalar> sample_mean(Var<Scalar> a);

/// x viewed as (N, F) times weight (O, F) transposed, plus bias (1, O).
/// Result shape (N, O, 1, 1).
template <typename Scalar> Var<Scalar> linear(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias);

/// Stride-1 convolution with zero padding k/2; weight (O, I, k, k), bias
/// (1, O, 1, 1). Odd k only.
template <typename Scalar> Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias);

template <typename Scalar> Var<Scalar> upsample2x(Var<Scalar> x);
/// Area average over non-overlapping factor x factor windows.
template <typename Scalar> Var<Scalar> avg_pool(Var<Scalar> x, int factor);
/// Picks the top-left pixel of each factor x factor window.
template <typename Scalar> Var<Scalar> nearest_downsample(Var<Scalar> x, int factor);

template <typename Scalar> Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts);
template <typename Scalar> Var<Scalar> slice_channels(Var<Scalar> x, int start, int count);
template <typename Scalar> Var<Scalar> reshape(Var<Scalar> x, Shape shape);
/// Tiles a batch-1 tensor `count` times along the batch axis.
template <typename Scalar> Var<Scalar> repeat_batch(Var<Scalar> x, int count);

/// Per-sample, per-channel normalization over H*W (no affine).
template <typename Scalar> Var<Scalar> instance_norm(Var<Scalar> x, Scalar eps = Scalar(1e-5));
/// x / sqrt(mean_c x^2 + eps) at every pixel.
template <typename Scalar> Var<Scalar> pixel_norm(Var<Scalar> x, Scalar eps = Scalar(1e-8));
/// x / sqrt(sum_c x^2 + eps) at every pixel.
template <typename Scalar> Var<Scalar> channel_unit_norm(Var<Scalar> x, Scalar eps = Scalar(1e-10));

/// x + strength * noise, noise shaped (N,1,H,W) and broadcast over channels;
/// strength is a single-element node.
template <typename Scalar> Var<Scalar> add_noise(Var<Scalar> x, const Tensor<Scalar>& noise, Var<Scalar> strength);

template <typename Scalar> Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return add(a, b); }
template <typename Scalar> Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) { return sub(a, b); }
template <typename Scalar> Var<Scalar> operator*(Var<Scalar> a, Var<Scalar> b) { return mul(a, b); }
template <typename Scalar> Var<Scalar> operator*(Scalar s, Var<Scalar> a) { return scale(a, s); }

}  // namespace styland::nn
