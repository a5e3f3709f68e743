#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sgdnet/tensor.hpp"

namespace sgdnet {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradients produced by one reverse sweep, keyed by leaf node.
class Gradients {
 public:
  // Gradient of the loss w.r.t. a leaf; zeros when the leaf did not
  // influence the loss.
  const Tensor& of(Var leaf) const;

 private:
  friend class Tape;
  std::vector<std::size_t> leaf_ids_;
  std::vector<Tensor> grads_;
};

/// Linear record of a forward evaluation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's inputs have
/// smaller ids. Forward activations are stored on the tape and read back by
/// the backward closures. A tape supports exactly one reverse sweep.
class Tape {
 public:
  // Accumulates into the gradients of the node's inputs, reading the
  // node's own upstream gradient through `tape.grad(self)`.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, std::string name = {});
  Var constant(Tensor value);

  // Appends an operation node. `backward` may be empty when no input
  // requires a gradient.
  Var record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::string& op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  std::size_t size() const { return nodes_.size(); }

  // Upstream gradient of node `id`, allocated as zeros on first access.
  Tensor& grad(std::size_t id);

  // Reverse sweep from a single-element loss node.
  Gradients backward(Var loss);

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool swept_ = false;
};

}  // namespace sgdnet
