#pragma once

#include "styland/nn/graph.hpp"
#include "styland/nn/ops.hpp"
#include "styland/nn/rng.hpp"

#include <string>

namespace styland::nn {

/// Indices of a convolution's weight and bias inside a ParameterStore.
struct ConvLayer {
  int weight = -1;
  int bias = -1;
  int in = 0;
  int out = 0;
  int kernel = 1;
};

struct LinearLayer {
  int weight = -1;
  int bias = -1;
  int in = 0;
  int out = 0;
};

template <typename Scalar>
ConvLayer make_conv(ParameterStore<Scalar>& store, const std::string& name, int in, int out, int kernel, Rng& rng,
                    Scalar bias_init = Scalar(0)) {
  ConvLayer layer{-1, -1, in, out, kernel};
  layer.weight = store.add_equalized(name + ".weight", Shape{out, in, kernel, kernel}, in * kernel * kernel, rng);
  layer.bias = store.add_constant(name + ".bias", Shape{1, out, 1, 1}, bias_init);
  return layer;
}

template <typename Scalar>
LinearLayer make_linear(ParameterStore<Scalar>& store, const std::string& name, int in, int out, Rng& rng,
                        Scalar lr_mul = Scalar(1), Scalar bias_init = Scalar(0)) {
  LinearLayer layer{-1, -1, in, out};
  layer.weight = store.add_equalized(name + ".weight", Shape{out, in, 1, 1}, in, rng, lr_mul);
  layer.bias = store.add_constant(name + ".bias", Shape{1, out, 1, 1}, bias_init / lr_mul, lr_mul);
  return layer;
}

template <typename Scalar>
Var<Scalar> apply(Graph<Scalar>& g, const ParameterStore<Scalar>& store, const ConvLayer& layer, Var<Scalar> x) {
  return conv2d(x, g.param(store, layer.weight), g.param(store, layer.bias));
}

template <typename Scalar>
Var<Scalar> apply(Graph<Scalar>& g, const ParameterStore<Scalar>& store, const LinearLayer& layer, Var<Scalar> x) {
  return linear(x, g.param(store, layer.weight), g.param(store, layer.bias));
}

}  // namespace styland::nn
