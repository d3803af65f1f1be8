#include "wdtcn/autodiff.h"

#include <cassert>
#include <string>
#include <unordered_set>

namespace wdtcn {

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor& Node::grad_buffer() {
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  return grad;
}

Tensor Var::grad() const {
  if (!node_) throw ContractError("grad() on empty Var");
  if (node_->grad.empty()) return Tensor::zeros(node_->value.shape());
  return node_->grad;
}

Var parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var detach(const Var& v) { return constant(v.value()); }

Var make_node(Tensor value, std::vector<NodePtr> parents,
              std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (p->requires_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  } else {
    // Keep the graph of constants from pinning memory.
    node->parents.clear();
  }
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss) throw ContractError("backward() on empty Var");
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Tensor::full(loss.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    if (!node->grad.empty()) node->backward(*node);
    // Interior gradients are not needed once pushed to the parents.
    node->grad = Tensor();
  }
}

void check_finite([[maybe_unused]] const Tensor& t,
                  [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  if (!t.all_finite()) {
    throw std::runtime_error(std::string("non-finite value produced by ") + op);
  }
#endif
}

}  // namespace wdtcn
