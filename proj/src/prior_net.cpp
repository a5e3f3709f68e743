#include "sgdnet/prior_net.hpp"

#include <cmath>
#include <cstdio>

#include "sgdnet/error.hpp"
#include "sgdnet/ops.hpp"
#include "sgdnet/rng.hpp"

namespace sgdnet {

namespace {

enum BlockIndex : std::size_t { kConv1, kBias1, kSlope1, kConv2, kBias2, kSlope2, kConv3, kBias3, kNumBlocks };

}  // namespace

std::vector<PriorNet::BlockInfo> PriorNet::layout(const PriorNetSpec& spec) {
  const std::size_t h = spec.hidden, k = spec.kernel;
  std::vector<BlockInfo> out = {
      {"conv1", {h, 1, k, k}, 0}, {"bias1", {h}, 0},         {"slope1", {1}, 0},
      {"conv2", {h, h, k, k}, 0}, {"bias2", {h}, 0},         {"slope2", {1}, 0},
      {"conv3", {1, h, k, k}, 0}, {"bias3", {1}, 0},
  };
  std::size_t offset = 0;
  for (auto& b : out) {
    b.offset = offset;
    offset += shape_numel(b.shape);
  }
  return out;
}

std::size_t PriorNet::parameter_count(const PriorNetSpec& spec) {
  const auto l = layout(spec);
  return l.back().offset + shape_numel(l.back().shape);
}

PriorNet::PriorNet(PriorNetSpec spec, double tau) : spec_(spec), tau_(tau) {
  if (spec_.hidden == 0 || spec_.kernel % 2 == 0) {
    throw ConfigError("PriorNet: hidden channels must be positive and kernel size odd");
  }
  theta_ = Tensor({parameter_count(spec_)});
}

PriorNet PriorNet::zeros(PriorNetSpec spec, double tau) { return PriorNet(spec, tau); }

PriorNet PriorNet::random(PriorNetSpec spec, std::uint64_t seed, double tau, double gain) {
  PriorNet net(spec, tau);
  Rng rng(seed);
  const auto blocks = net.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& info = blocks[b];
    const std::size_t n = shape_numel(info.shape);
    double* p = net.theta_.raw() + info.offset;
    if (b == kConv1 || b == kConv2 || b == kConv3) {
      const double fan_in = static_cast<double>(info.shape[1] * info.shape[2] * info.shape[3]);
      const double sd = gain * std::sqrt(2.0 / fan_in);
      for (std::size_t i = 0; i < n; ++i) p[i] = sd * rng.normal();
    } else if (b == kSlope1 || b == kSlope2) {
      p[0] = 0.25;
    }
  }
  return net;
}

PriorNet PriorNet::identity(PriorNetSpec spec, double tau) {
  PriorNet net(spec, tau);
  const auto blocks = net.blocks();
  const std::size_t k = spec.kernel, centre = (k / 2) * k + k / 2;
  // Route the input through channel 0 of each layer with unit centre taps;
  // unit slopes make both PReLUs the identity for either sign.
  net.theta_[blocks[kConv1].offset + centre] = 1.0;
  net.theta_[blocks[kConv2].offset + centre] = 1.0;
  net.theta_[blocks[kConv3].offset + centre] = 1.0;
  net.theta_[blocks[kSlope1].offset] = 1.0;
  net.theta_[blocks[kSlope2].offset] = 1.0;
  return net;
}

void PriorNet::set_theta(Tensor theta) {
  if (theta.size() != parameter_count()) {
    throw ShapeError("PriorNet::set_theta: expected " + std::to_string(parameter_count()) + " parameters, got " +
                     std::to_string(theta.size()));
  }
  theta_ = theta.reshaped({theta.size()});
}

Tensor PriorNet::block(std::size_t index) const {
  const auto info = blocks().at(index);
  const std::size_t n = shape_numel(info.shape);
  std::vector<double> data(theta_.raw() + info.offset, theta_.raw() + info.offset + n);
  return Tensor(info.shape, std::move(data));
}

std::string PriorNet::spec_hash() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "cnn3-k%zu-h%zu-prelu-p%zu", spec_.kernel, spec_.hidden, parameter_count());
  return buf;
}

NetVars bind(Tape& tape, const PriorNet& net, bool train_theta, bool train_tau) {
  NetVars vars;
  vars.spec = net.spec();
  const auto infos = net.blocks();
  for (std::size_t b = 0; b < infos.size(); ++b) {
    Tensor t = net.block(b);
    vars.blocks.push_back(train_theta ? tape.leaf(std::move(t), infos[b].name) : tape.constant(std::move(t)));
  }
  Tensor tau = Tensor::scalar(net.tau());
  vars.tau = train_tau ? tape.leaf(std::move(tau), "tau") : tape.constant(std::move(tau));
  return vars;
}

Tensor theta_gradient(const Gradients& grads, const NetVars& vars) {
  const auto infos = PriorNet::layout(vars.spec);
  Tensor out({PriorNet::parameter_count(vars.spec)});
  for (std::size_t b = 0; b < infos.size(); ++b) {
    const Tensor& g = grads.of(vars.blocks[b]);
    std::copy(g.data().begin(), g.data().end(), out.raw() + infos[b].offset);
  }
  return out;
}

Var r_theta(const NetVars& vars, Var x) {
  const Shape image = x.shape();
  if (image.size() != 2) throw ShapeError("r_theta expects an H x W image, got " + shape_to_string(image));
  const auto& p = vars.blocks;
  Var h = conv2d(x, p[kConv1], p[kBias1]);
  h = prelu(h, p[kSlope1]);
  h = conv2d(h, p[kConv2], p[kBias2]);
  h = prelu(h, p[kSlope2]);
  h = conv2d(h, p[kConv3], p[kBias3]);
  return reshape(h, image);
}

Var d_theta(const NetVars& vars, Var x) { return sub(x, r_theta(vars, x)); }

Tensor r_theta_apply(const PriorNet& net, const Tensor& x) {
  Tape tape;
  NetVars vars = bind(tape, net, false, false);
  return r_theta(vars, tape.constant(x)).value();
}

Tensor d_theta_apply(const PriorNet& net, const Tensor& x) {
  Tape tape;
  NetVars vars = bind(tape, net, false, false);
  return d_theta(vars, tape.constant(x)).value();
}

}  // namespace sgdnet
