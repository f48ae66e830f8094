#ifndef SA_AUTODIFF_HPP
#define SA_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sa/tensor.hpp"

namespace sa {

// Define-by-run reverse-mode differentiation. Every operator builds a fresh
// Node holding its output value, the parent links, and a closure that pulls
// the node's gradient back into its parents. Values are immutable once an op
// has written them; only leaf parameters are updated in place (by the
// optimizer, between graphs).
template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;  // allocated on first accumulation; same dims as value
  bool requires_grad = false;
  bool needs_grad = false;  // true if this node or any ancestor requires grad
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<S>& ensure_grad() {
    if (grad.numel() == 0) grad = Tensor<S>(value.shape(), S(0));
    return grad;
  }
  void accumulate_grad(const Tensor<S>& g) {
    Tensor<S>& dst = ensure_grad();
    S* d = dst.data();
    const S* s = g.data();
    const std::int64_t m = dst.numel();
    for (std::int64_t i = 0; i < m; ++i) d[i] += s[i];
  }
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<S> value, bool requires_grad) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->needs_grad = requires_grad;
    return Var(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  Node<S>& node() const { return *node_; }
  const std::shared_ptr<Node<S>>& ptr() const { return node_; }

  const Tensor<S>& value() const { return node_->value; }
  Tensor<S>& mutable_value() { return node_->value; }
  const Shape4& shape() const { return node_->value.shape(); }
  std::int64_t numel() const { return node_->value.numel(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool needs_grad() const { return node_->needs_grad; }
  const Tensor<S>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.numel() != 0; }

  void zero_grad() { node_->grad = Tensor<S>(); }

 private:
  std::shared_ptr<Node<S>> node_;
};

template <typename S>
Var<S> make_param(Tensor<S> value) {
  return Var<S>::leaf(std::move(value), true);
}

template <typename S>
Var<S> make_const(Tensor<S> value) {
  return Var<S>::leaf(std::move(value), false);
}

namespace detail {

// Output node wiring shared by all operators.
template <typename S>
Var<S> make_op_node(Tensor<S> value, std::vector<std::shared_ptr<Node<S>>> parents,
                    std::function<void(Node<S>&)> backward_fn) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  for (const auto& p : parents) {
    if (p->needs_grad) {
      n->needs_grad = true;
      break;
    }
  }
  if (n->needs_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Var<S>(std::move(n));
}

template <typename S>
void topo_sort(Node<S>* root, std::vector<Node<S>*>& order) {
  // Iterative post-order DFS; order ends up children-before-parents.
  std::unordered_set<Node<S>*> visited;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Accumulates d(loss)/d(leaf) into every reachable requires_grad leaf.
// Output spatial dimensions chosen by shape planning are constants here;
// the only gradient path to a shape parameter is its mixture weight.
template <typename S>
void backward(const Var<S>& loss) {
  if (loss.numel() != 1) {
    throw DimensionError(strcat("backward expects a scalar loss, got ",
                                to_string(loss.shape())));
  }
  if (!loss.needs_grad()) return;
  std::vector<Node<S>*> order;
  detail::topo_sort(loss.ptr().get(), order);
  loss.ptr()->ensure_grad()[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* node = *it;
    if (node->backward_fn && node->grad.numel() != 0) node->backward_fn(*node);
  }
  // Interior gradients are scratch; parameters keep theirs until the
  // optimizer consumes them.
  for (Node<S>* node : order) {
    if (!node->requires_grad && node != loss.ptr().get()) node->grad = Tensor<S>();
  }
}

}  // namespace sa

#endif  // SA_AUTODIFF_HPP
