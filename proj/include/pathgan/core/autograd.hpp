#pragma once

// Minimal tape-free reverse-mode autodiff. Every op result keeps its parents
// and a backward closure; backward() walks the DAG in reverse topological
// order. Parameters are long-lived leaves whose gradients accumulate until the
// optimizer clears them.

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pathgan/core/tensor.hpp"

namespace pathgan::nn {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& grad_buffer() {
    if (grad.numel() != value.numel()) grad = Tensor::zeros_like(value);
    return grad;
  }
  bool has_grad() const { return grad.numel() == value.numel() && grad.numel() > 0; }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
public:
  NoGradGuard() : previous_(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool previous_;
};

inline Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

inline Var leaf(Tensor t, bool requires_grad) {
  auto n = constant(std::move(t));
  n->requires_grad = requires_grad;
  return n;
}

inline bool needs_grad(const Var& v) { return v && v->requires_grad; }

/// Wraps an op output. The backward closure is only retained when grad mode
/// is on and at least one parent requires a gradient.
inline Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!grad_mode()) return n;
  bool any = false;
  for (const auto& p : parents) any = any || needs_grad(p);
  if (!any) return n;
  n->requires_grad = true;
  n->parents = std::move(parents);
  n->backward_fn = std::move(backward_fn);
  return n;
}

/// Backpropagates from `root`. If `seed` is empty the root must be a scalar
/// and is seeded with 1.
inline void backward(const Var& root, Tensor seed = {}) {
  if (!root->requires_grad) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  if (seed.empty()) {
    if (root->value.numel() != 1) throw ArgumentError("backward: root must be scalar without seed");
    root->grad_buffer().fill(1.0f);
  } else {
    root->grad_buffer().add_(seed);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
  // Release intermediate graph state; leaves keep their gradients.
  for (Node* n : order) {
    if (n->backward_fn) {
      n->backward_fn = nullptr;
      n->parents.clear();
      n->grad = Tensor{};
    }
  }
}

} // namespace pathgan::nn
