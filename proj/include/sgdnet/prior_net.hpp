#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdnet/tape.hpp"
#include "sgdnet/tensor.hpp"

namespace sgdnet {

struct PriorNetSpec {
  std::size_t hidden = 16;
  std::size_t kernel = 3;

  friend bool operator==(const PriorNetSpec&, const PriorNetSpec&) = default;
};

/// Artifact-removal network R_theta: a residual-compatible 3-layer CNN
///
///   conv k x k (1 -> hidden), PReLU, conv (hidden -> hidden), PReLU, conv (hidden -> 1)
///
/// with one learnable slope per PReLU. All parameters live in one flat
/// vector theta, laid out block by block; tau is kept alongside because it
/// is trained with theta. The same weights serve every unrolled step.
class PriorNet {
 public:
  struct BlockInfo {
    std::string name;
    Shape shape;
    std::size_t offset;
  };

  explicit PriorNet(PriorNetSpec spec = {}, double tau = 0.0);

  // All-zero theta (including slopes): R = 0, so D = identity.
  static PriorNet zeros(PriorNetSpec spec = {}, double tau = 0.0);
  // He-normal kernels, zero biases, slopes 0.25.
  static PriorNet random(PriorNetSpec spec, std::uint64_t seed, double tau = 0.0, double gain = 1.0);
  // Weights chosen so that R(x) = x exactly, hence D = 0.
  static PriorNet identity(PriorNetSpec spec = {}, double tau = 0.0);

  static std::size_t parameter_count(const PriorNetSpec& spec);
  static std::vector<BlockInfo> layout(const PriorNetSpec& spec);

  const PriorNetSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return theta_.size(); }
  const Tensor& theta() const { return theta_; }
  void set_theta(Tensor theta);
  double tau() const { return tau_; }
  void set_tau(double tau) { tau_ = tau; }

  std::vector<BlockInfo> blocks() const { return layout(spec_); }
  Tensor block(std::size_t index) const;

  // Short stable identifier of the layer structure, stored in checkpoints.
  std::string spec_hash() const;

 private:
  PriorNetSpec spec_;
  Tensor theta_;
  double tau_;
};

/// Network parameters bound onto a tape, either as leaves (trainable) or
/// constants.
struct NetVars {
  PriorNetSpec spec;
  std::vector<Var> blocks;
  Var tau;
};

NetVars bind(Tape& tape, const PriorNet& net, bool train_theta, bool train_tau);

// Flat theta-gradient in layout order.
Tensor theta_gradient(const Gradients& grads, const NetVars& vars);

// R_theta and D_theta(x) = x - R_theta(x) on an H x W image node.
Var r_theta(const NetVars& vars, Var x);
Var d_theta(const NetVars& vars, Var x);

Tensor r_theta_apply(const PriorNet& net, const Tensor& x);
Tensor d_theta_apply(const PriorNet& net, const Tensor& x);

}  // namespace sgdnet
