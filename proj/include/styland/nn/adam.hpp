#pragma once

#include "styland/nn/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace styland::nn {

struct AdamSettings {
  double lr = 0.002;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Adam with bias correction over one ParameterStore.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterStore<Scalar>& store, AdamSettings settings) : settings_(settings) {
    for (const auto& p : store) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  }

  void step(ParameterStore<Scalar>& store, const Gradients<Scalar>& grads) {
    if (static_cast<int>(grads.size()) != store.size() || static_cast<int>(m_.size()) != store.size()) {
      throw std::invalid_argument("Adam::step: gradient count does not match store");
    }
    ++steps_;
    const auto b1 = static_cast<Scalar>(settings_.beta1);
    const auto b2 = static_cast<Scalar>(settings_.beta2);
    const auto correction1 = Scalar(1) - static_cast<Scalar>(std::pow(settings_.beta1, steps_));
    const auto correction2 = Scalar(1) - static_cast<Scalar>(std::pow(settings_.beta2, steps_));
    const auto step_size = static_cast<Scalar>(settings_.lr) / correction1;
    const auto eps = static_cast<Scalar>(settings_.eps);
    for (int i = 0; i < store.size(); ++i) {
      const auto& g = grads[static_cast<std::size_t>(i)].data();
      auto& m = m_[static_cast<std::size_t>(i)].data();
      auto& v = v_[static_cast<std::size_t>(i)].data();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      store[i].value.data() -= step_size * m / ((v / correction2).sqrt() + eps);
    }
  }

  [[nodiscard]] long steps() const { return steps_; }
  [[nodiscard]] const AdamSettings& settings() const { return settings_; }
  [[nodiscard]] const std::vector<Tensor<Scalar>>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<Tensor<Scalar>>& second_moments() const { return v_; }
  void restore(long steps, std::vector<Tensor<Scalar>> m, std::vector<Tensor<Scalar>> v) {
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamSettings settings_{};
  long steps_ = 0;
  std::vector<Tensor<Scalar>> m_;
  std::vector<Tensor<Scalar>> v_;
};

}  // namespace styland::nn
