#include "trip/tape.hpp"

#include "trip/error.hpp"

namespace trip::grad {

NodeId Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, {}, true});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, {}, {}, false});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn fn) {
  bool req = false;
  for (NodeId i : inputs) req = req || nodes_[i].requires_grad;
  Node n{std::move(value), {}, std::move(inputs), {}, req};
  if (req) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].value.size() != 1) throw Error(ErrorKind::DisconnectedLoss, "loss must be a scalar");
  if (!nodes_[loss].requires_grad) throw Error(ErrorKind::DisconnectedLoss, "loss does not depend on any variable");
  grad(loss)[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

}  // namespace trip::grad
