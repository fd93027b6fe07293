#include "styland/nn/graph.hpp"

#include "styland/nn/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace styland::nn {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
int ParameterStore<Scalar>::add(std::string name, Tensor<Scalar> value, Scalar gain) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(Parameter<Scalar>{std::move(name), std::move(value), gain});
  return size() - 1;
}

template <typename Scalar>
int ParameterStore<Scalar>::add_equalized(std::string name, Shape shape, int fan_in, Rng& rng, Scalar lr_mul) {
  Tensor<Scalar> w(shape);
  for (std::ptrdiff_t i = 0; i < w.size(); ++i) {
    w.data()[i] = static_cast<Scalar>(rng.normal()) / lr_mul;
  }
  const Scalar gain = lr_mul / std::sqrt(static_cast<Scalar>(fan_in));
  return add(std::move(name), std::move(w), gain);
}

template <typename Scalar>
int ParameterStore<Scalar>::add_constant(std::string name, Shape shape, Scalar fill, Scalar gain) {
  return add(std::move(name), Tensor<Scalar>(shape, fill), gain);
}

template <typename Scalar>
std::optional<int> ParameterStore<Scalar>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

template <typename Scalar>
std::ptrdiff_t ParameterStore<Scalar>::parameter_count() const {
  std::ptrdiff_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

template <typename Scalar>
bool ParameterStore<Scalar>::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

// ---------------------------------------------------------------------------

template <typename Scalar>
std::size_t Graph<Scalar>::check(Var<Scalar> v) const {
  if (v.graph != this || v.id < 0 || v.id >= size()) {
    throw std::logic_error("Var does not belong to this graph");
  }
  return static_cast<std::size_t>(v.id);
}

template <typename Scalar>
int Graph<Scalar>::push(Node node) {
  nodes_.push_back(std::move(node));
  return size() - 1;
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(Tensor<Scalar> value) {
  return {this, push(Node{std::move(value), {}, false, {}})};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::variable(Tensor<Scalar> value) {
  return {this, push(Node{std::move(value), {}, grad_enabled_, {}})};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::param(const ParameterStore<Scalar>& store, int index) {
  const auto key = std::make_pair(&store, index);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return {this, it->second};
  const auto& p = store[index];
  Tensor<Scalar> scaled = p.value;
  if (p.gain != Scalar(1)) scaled.data() *= p.gain;
  const bool tracked = grad_enabled_ && !frozen_.contains(&store);
  const int id = push(Node{std::move(scaled), {}, tracked, {}});
  param_nodes_.emplace(key, id);
  return {this, id};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs, BackwardFn fn) {
  bool any = false;
  for (const auto& in : inputs) any = any || requires_grad(in);
  if (!grad_enabled_ || !any) return constant(std::move(value));
  return {this, push(Node{std::move(value), {}, true, std::move(fn)})};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs, BackwardFn fn) {
  bool any = false;
  for (const auto& in : inputs) any = any || requires_grad(in);
  if (!grad_enabled_ || !any) return constant(std::move(value));
  return {this, push(Node{std::move(value), {}, true, std::move(fn)})};
}

template <typename Scalar>
Tensor<Scalar>& Graph<Scalar>::grad_buffer(int id) {
  auto& node = nodes_[static_cast<std::size_t>(id)];
  if (node.grad.empty()) node.grad = Tensor<Scalar>(node.value.shape());
  return node.grad;
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> root) {
  if (value(root).size() != 1) throw std::invalid_argument("backward: root must be a single element");
  backward(root, Tensor<Scalar>(value(root).shape(), Scalar(1)));
}

template <typename Scalar>
void Graph<Scalar>::backward(Var<Scalar> root, const Tensor<Scalar>& seed) {
  const auto r = check(root);
  if (seed.shape() != nodes_[r].value.shape()) throw std::invalid_argument("backward: seed shape mismatch");
  if (!nodes_[r].requires_grad) return;
  grad_buffer(root.id).data() += seed.data();
  for (int id = root.id; id >= 0; --id) {
    auto& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, id);
  }
}

template <typename Scalar>
Tensor<Scalar> Graph<Scalar>::grad(Var<Scalar> v) const {
  const auto& node = nodes_[check(v)];
  if (node.grad.empty()) return Tensor<Scalar>(node.value.shape());
  return node.grad;
}

template <typename Scalar>
Gradients<Scalar> Graph<Scalar>::param_grads(const ParameterStore<Scalar>& store) const {
  Gradients<Scalar> out;
  out.reserve(static_cast<std::size_t>(store.size()));
  for (int i = 0; i < store.size(); ++i) {
    const auto it = param_nodes_.find(std::make_pair(&store, i));
    if (it == param_nodes_.end() || nodes_[static_cast<std::size_t>(it->second)].grad.empty()) {
      out.emplace_back(store[i].value.shape());
      continue;
    }
    Tensor<Scalar> g = nodes_[static_cast<std::size_t>(it->second)].grad;
    if (store[i].gain != Scalar(1)) g.data() *= store[i].gain;
    out.push_back(std::move(g));
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace styland::nn
