#include "sgdnet/unfold.hpp"

#include "sgdnet/error.hpp"
#include "sgdnet/ops.hpp"

namespace sgdnet {

void validate(const UnfoldConfig& cfg, std::size_t components) {
  if (cfg.steps == 0) throw ConfigError("unfold: steps (Q) must be at least 1");
  if (!(cfg.gamma > 0.0)) throw ConfigError("unfold: gamma must be positive");
  if (cfg.mode == DataMode::kStochastic && (cfg.minibatch == 0 || cfg.minibatch > components)) {
    throw ConfigError("unfold: minibatch size B must lie in [1, " + std::to_string(components) + "]");
  }
}

IndexDraws draw_indices(const UnfoldConfig& cfg, std::size_t components, Rng& rng) {
  IndexDraws draws(cfg.steps);
  if (cfg.mode == DataMode::kFullBatch) return draws;
  for (auto& d : draws) d = sample_indices(cfg.minibatch, components, rng);
  return draws;
}

Var data_consistency(Var x, const MeasurementSet& y, const ForwardModel& model, std::span<const std::size_t> indices) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor g = idx.empty() ? full_gradient(x.value(), y, model) : minibatch_gradient(x.value(), y, model, idx);
  if (idx.empty()) idx = all_indices(model.size());
  return x.tape->record("data_consistency", std::move(g), {x.id},
                        [ix = x.id, &model, idx = std::move(idx)](Tape& tp, std::size_t self) {
                          tp.grad(ix) += minibatch_normal(tp.grad(self), model, idx);
                        });
}

Var sgdnet_step(const NetVars& net, Var x, const MeasurementSet& y, const ForwardModel& model, double gamma,
                std::span<const std::size_t> indices) {
  Var grad = data_consistency(x, y, model, indices);
  Var prior = scalar_mul(net.tau, d_theta(net, x));
  return sub(x, scale(add(grad, prior), gamma));
}

Unrolled unroll(const NetVars& net, Var x0, const MeasurementSet& y, const ForwardModel& model, double gamma,
                const IndexDraws& draws) {
  Unrolled out{x0, {x0}};
  for (const auto& idx : draws) {
    out.output = sgdnet_step(net, out.output, y, model, gamma, idx);
    out.iterates.push_back(out.output);
  }
  return out;
}

UnfoldOutput sgdnet_forward_with_draws(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model,
                                       const PriorNet& net, const UnfoldConfig& cfg, const IndexDraws& draws,
                                       Trainable trainable) {
  if (draws.size() != cfg.steps) throw ConfigError("index draws must cover every unrolled step");
  if (x0.shape() != model.image_shape()) {
    throw ShapeError("initial image shape " + shape_to_string(x0.shape()) + " does not match model");
  }
  check_measurements(model, y);
  UnfoldOutput out;
  out.tape = std::make_shared<Tape>();
  out.vars = bind(*out.tape, net, trainable.theta, trainable.tau);
  Unrolled u = unroll(out.vars, out.tape->constant(x0), y, model, cfg.gamma, draws);
  out.output = u.output;
  out.final_image = u.output.value();
  if (cfg.record_iterates) {
    for (Var v : u.iterates) out.iterates.push_back(v.value());
  }
  out.draws = draws;
  return out;
}

UnfoldOutput sgdnet_forward(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model,
                            const PriorNet& net, const UnfoldConfig& cfg, Rng& rng, Trainable trainable) {
  return sgdnet_forward_with_draws(x0, y, model, net, cfg, draw_indices(cfg, model.size(), rng), trainable);
}

UnfoldOutput ured_forward(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model, const PriorNet& net,
                          const UnfoldConfig& cfg, Trainable trainable) {
  return sgdnet_forward_with_draws(x0, y, model, net, cfg, IndexDraws(cfg.steps), trainable);
}

}  // namespace sgdnet
