#pragma once

#include "styland/nn/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace styland::nn {

class Rng;

/// A learnable tensor. `value` holds the raw stored weights; networks see
/// `value * gain` (equalized learning rate).
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Scalar gain = Scalar(1);
};

/// Ordered, name-addressed collection of parameters owned by one network.
/// Layers refer to parameters by index so the store stays copyable.
template <typename Scalar>
class ParameterStore {
 public:
  int add(std::string name, Tensor<Scalar> value, Scalar gain = Scalar(1));

  /// Adds a weight drawn from N(0, 1/lr_mul^2) whose runtime gain is
  /// lr_mul / sqrt(fan_in).
  int add_equalized(std::string name, Shape shape, int fan_in, Rng& rng, Scalar lr_mul = Scalar(1));
  int add_constant(std::string name, Shape shape, Scalar fill, Scalar gain = Scalar(1));

  [[nodiscard]] int size() const { return static_cast<int>(params_.size()); }
  Parameter<Scalar>& operator[](int i) { return params_.at(static_cast<std::size_t>(i)); }
  const Parameter<Scalar>& operator[](int i) const { return params_.at(static_cast<std::size_t>(i)); }

  [[nodiscard]] std::optional<int> find(const std::string& name) const;
  [[nodiscard]] std::ptrdiff_t parameter_count() const;
  [[nodiscard]] bool all_finite() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  [[nodiscard]] auto begin() const { return params_.begin(); }
  [[nodiscard]] auto end() const { return params_.end(); }

  template <typename Other>
  [[nodiscard]] ParameterStore<Other> cast() const {
    ParameterStore<Other> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<Other>(), static_cast<Other>(p.gain));
    return out;
  }

 private:
  std::vector<Parameter<Scalar>> params_;
};

/// Per-parameter gradients of one store, index-aligned with it.
template <typename Scalar>
using Gradients = std::vector<Tensor<Scalar>>;

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace styland::nn
