#pragma once

// Finite-difference oracle shared by the gradient tests. Independent of the
// backward pass: it only ever evaluates forward values.

#include "styland/nn/graph.hpp"
#include "styland/nn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace styland::testing {

using ScalarFn = std::function<double(const nn::Tensor<double>&)>;

inline nn::Tensor<double> random_tensor(nn::Shape s, std::uint64_t seed, double scale = 1.0) {
  nn::Rng rng(seed);
  nn::Tensor<double> t(s);
  for (std::ptrdiff_t i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

/// Central differences of f at x, step h, for every element.
inline nn::Tensor<double> numeric_gradient(const ScalarFn& f, const nn::Tensor<double>& x, double h = 1e-4) {
  nn::Tensor<double> g(x.shape());
  nn::Tensor<double> probe = x;
  for (std::ptrdiff_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor): relative error of whole gradient
/// vectors.
inline double relative_error(const nn::Tensor<double>& a, const nn::Tensor<double>& b, double floor = 1e-12) {
  const double diff = (a.data() - b.data()).matrix().norm();
  const double scale = std::max({a.data().matrix().norm(), b.data().matrix().norm(), floor});
  return diff / scale;
}

}  // namespace styland::testing
