#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trip/tensor.hpp"

namespace trip::grad {

using NodeId = int;

class Tape;

/// Receives the output gradient and accumulates into the inputs' gradients.
using BackwardFn = std::function<void(Tape&, const Tensor& gout)>;

/// Append-only record of a forward computation. Nodes are created in
/// topological order, so backward is a single reverse sweep.
class Tape {
 public:
  /// A value that gradients can flow into (parameter or differentiable input).
  NodeId variable(Tensor value);
  NodeId constant(Tensor value);
  /// Result of a primitive; `fn` runs only if some input requires a gradient.
  NodeId record(Tensor value, std::vector<NodeId> inputs, BackwardFn fn);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, allocated (zeroed) on first access.
  Tensor& grad(NodeId id);
  bool has_grad(NodeId id) const { return !nodes_[id].grad.empty(); }

  /// Reverse sweep from a scalar loss. Throws DisconnectedLoss when the loss is
  /// not scalar or does not depend on any variable.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }

  /// Piecewise-selection record (ReLU masks, pooling winners, kernel supports).
  /// Two evaluations with equal signatures lie on the same smooth piece.
  std::vector<std::int64_t> signature;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace trip::grad
