#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "wdtcn/tensor.h"

namespace wdtcn {

// Raised when a graph-level contract is violated (non-scalar loss, reading
// a gradient that was never computed).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a define-by-run graph. Parents are strong references, so a
// graph lives exactly as long as its outputs are reachable.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  std::vector<NodePtr> parents;
  // Propagates `self.grad` into the parents' accumulators.
  std::function<void(Node& self)> backward;
  bool requires_grad = false;

  // Adds `g` into this node's gradient, allocating it on first use.
  void accumulate(const Tensor& g);
  // Mutable gradient buffer, zero-initialized on first access.
  Tensor& grad_buffer();
};

// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient of the last backward pass; zeros if the node received none.
  Tensor grad() const;

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

// Trainable leaf (gradient is accumulated).
Var parameter(Tensor value);
// Leaf that never receives a gradient.
Var constant(Tensor value);
// Same value, cut from the graph.
Var detach(const Var& v);

// Builds an interior node. `backward` is dropped when no parent requires a
// gradient.
Var make_node(Tensor value, std::vector<NodePtr> parents,
              std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar loss. Gradients accumulate additively into
// every reachable node that requires one; interior gradients are released
// once propagated, leaf gradients persist.
void backward(const Var& loss);

// Debug-build finiteness guard applied to every op result.
void check_finite(const Tensor& t, const char* op);

}  // namespace wdtcn
