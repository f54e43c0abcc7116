#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lane/common.hpp"

namespace lane::ad {

// Reverse-mode tape over dense arrays.  A Node is one recorded value; the
// backward closure pulls this node's cotangent and accumulates into the
// parents' grads.  Scalar type T is float (fast mode) or double
// (verification mode).
template <typename T>
struct Node {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  std::string name;  // set for parameters, useful in diagnostics
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// Value-semantic handle to a tape node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr<T> n) : node_(std::move(n)) {}

  static Tensor constant(std::vector<int> shape, std::vector<T> data) {
    LANE_CHECK(numel_of(shape) == static_cast<std::int64_t>(data.size()),
               "tensor data length must equal product of shape " + shape_str(shape));
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return constant({1}, {v}); }

  static Tensor zeros(std::vector<int> shape) {
    std::vector<T> d(static_cast<size_t>(numel_of(shape)), T(0));
    return constant(std::move(shape), std::move(d));
  }

  static Tensor param(std::vector<int> shape, std::vector<T> data, std::string name) {
    Tensor t = constant(std::move(shape), std::move(data));
    t.node_->requires_grad = true;
    t.node_->name = std::move(name);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  int rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
  int cols() const {
    return node_->shape.size() >= 2 ? node_->shape[1] : 1;
  }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    LANE_CHECK(numel() == 1, "item() requires a scalar tensor");
    return node_->value[0];
  }

  const NodePtr<T>& node() const { return node_; }

 private:
  NodePtr<T> node_;
};

// Builds an op node.  requires_grad propagates from parents; the backward
// closure is dropped for pure-constant subgraphs so inference pays nothing.
template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::vector<NodePtr<T>> parents,
                  std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

// Reverse sweep from a scalar loss.  Deterministic: traversal order is fixed
// by the graph structure, so two runs on the same graph produce bitwise-equal
// gradients.
template <typename T>
void backward(const Tensor<T>& loss) {
  LANE_CHECK(loss.numel() == 1, "backward: loss must be a scalar tensor");
  LANE_CHECK(loss.requires_grad(),
             "backward: loss does not depend on any parameter with requires_grad");

  // Iterative post-order DFS.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Node<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn) {
      n->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

}  // namespace lane::ad
