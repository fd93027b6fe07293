#pragma once

#include "styland/nn/parameters.hpp"
#include "styland/nn/tensor.hpp"

#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace styland::nn {

template <typename Scalar>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  [[nodiscard]] const Tensor<Scalar>& value() const { return graph->value(*this); }
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  [[nodiscard]] bool valid() const { return graph != nullptr && id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// creation order is a valid topological order for backward().
///
/// A graph built with grad disabled records values only; every op result is
/// then a constant and backward() is a no-op.
template <typename Scalar>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }

  Var<Scalar> constant(Tensor<Scalar> value);
  /// Leaf whose gradient is tracked (when grad is enabled).
  Var<Scalar> variable(Tensor<Scalar> value);

  /// Leaf holding `value * gain` of a stored parameter. Repeated requests for
  /// the same parameter return the same node.
  Var<Scalar> param(const ParameterStore<Scalar>& store, int index);

  /// Parameters of a frozen store enter the graph as constants.
  void freeze(const ParameterStore<Scalar>& store) { frozen_.insert(&store); }

  /// Seeds d(root)/d(root) = 1 for a single-element root (or `seed` otherwise)
  /// and accumulates gradients into every tracked ancestor.
  void backward(Var<Scalar> root);
  void backward(Var<Scalar> root, const Tensor<Scalar>& seed);

  [[nodiscard]] const Tensor<Scalar>& value(Var<Scalar> v) const { return nodes_[check(v)].value; }
  [[nodiscard]] bool requires_grad(Var<Scalar> v) const { return nodes_[check(v)].requires_grad; }
  [[nodiscard]] bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Gradient of a node after backward(); zeros when nothing reached it.
  [[nodiscard]] Tensor<Scalar> grad(Var<Scalar> v) const;

  /// Gradients of every parameter of `store` w.r.t. the raw stored values.
  [[nodiscard]] Gradients<Scalar> param_grads(const ParameterStore<Scalar>& store) const;

  // Op plumbing.
  Var<Scalar> record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs, BackwardFn fn);
  Var<Scalar> record(Tensor<Scalar> value, const std::vector<Var<Scalar>>& inputs, BackwardFn fn);
  [[nodiscard]] const Tensor<Scalar>& node_value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  [[nodiscard]] const Tensor<Scalar>& node_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  /// Gradient accumulator of node `id`, zero-initialized on first use.
  Tensor<Scalar>& grad_buffer(int id);

  [[nodiscard]] int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::size_t check(Var<Scalar> v) const;
  int push(Node node);

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::set<const ParameterStore<Scalar>*> frozen_;
  std::map<std::pair<const ParameterStore<Scalar>*, int>, int> param_nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace styland::nn
