#include "sgdnet/tape.hpp"

#include <algorithm>
#include <stdexcept>

#include "sgdnet/error.hpp"

namespace sgdnet {

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& Gradients::of(Var leaf) const {
  auto it = std::find(leaf_ids_.begin(), leaf_ids_.end(), leaf.id);
  if (it == leaf_ids_.end()) throw std::invalid_argument("Gradients::of: node is not a leaf of this tape");
  return grads_[static_cast<std::size_t>(it - leaf_ids_.begin())];
}

Var Tape::leaf(Tensor value, std::string name) {
  Node n;
  n.op = name.empty() ? "leaf" : "leaf:" + name;
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "const";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (swept_) throw std::logic_error("Tape::record after backward");
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw std::logic_error("Tape::record: input does not precede node");
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  Tensor& g = grads_[id];
  if (g.empty()) g = Tensor(nodes_[id].value.shape());
  return g;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("Tape::backward: loss belongs to another tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_to_string(nodes_[loss.id].value.shape()));
  }
  if (swept_) throw std::logic_error("Tape::backward called twice on the same tape");
  swept_ = true;

  grads_.assign(nodes_.size(), Tensor());
  if (nodes_[loss.id].requires_grad) {
    grad(loss.id).fill(1.0);
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (n.is_leaf || !n.requires_grad || grads_[k].empty() || !n.backward) continue;
      n.backward(*this, k);
    }
  }

  Gradients out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!nodes_[k].is_leaf) continue;
    out.leaf_ids_.push_back(k);
    out.grads_.push_back(grads_[k].empty() ? Tensor(nodes_[k].value.shape()) : std::move(grads_[k]));
  }
  return out;
}

}  // namespace sgdnet
