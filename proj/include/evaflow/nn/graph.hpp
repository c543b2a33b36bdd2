#pragma once

#include <deque>
#include <functional>
#include <initializer_list>

#include "evaflow/nn/tensor.hpp"

namespace evaflow::nn {

struct Var {
  int id = -1;
  bool defined() const { return id >= 0; }
};

/// Append-only reverse-mode tape. Nodes are recorded in evaluation order, so
/// walking them backwards visits every consumer before its producers.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  /// Value that never receives a gradient.
  Var constant(Tensor<T> value) { return push(std::move(value), nullptr, false, {}); }
  /// Leaf that accumulates a gradient.
  Var variable(Tensor<T> value) { return push(std::move(value), nullptr, true, {}); }
  /// Leaf aliasing external storage (model parameters); the storage must outlive the graph.
  Var parameter(const Tensor<T>& storage, bool requires_grad = true) { return push({}, &storage, requires_grad, {}); }

  /// Records an op output; the backward function is kept only when a parent needs a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : BackwardFn{});
  }
  template <typename Range>
  Var record_range(Tensor<T> value, const Range& parents, BackwardFn backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), nullptr, needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor<T>& value(Var v) const { return value(v.id); }
  const Tensor<T>& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer, zero-initialized on first access.
  Tensor<T>& grad(Var v) { return grad(v.id); }
  Tensor<T>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
    return n.grad;
  }
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }

  /// Seeds d(root)/d(root) = 1 for a single-element root and propagates.
  void backward(Var root) {
    if (value(root).size() != 1) throw shape_error("backward() needs a scalar root");
    grad(root)[0] = T(1);
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.backward && !n.grad.empty()) n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor<T> value, const Tensor<T>* external, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), external, {}, requires_grad, std::move(backward)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::deque<Node> nodes_;
};

}  // namespace evaflow::nn
