#include "sgdnet/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "sgdnet/error.hpp"
#include "sgdnet/rng.hpp"

namespace sgdnet {

Tensor tv_prox(const Tensor& z, double mu, std::size_t inner_iters, Tensor* dual) {
  if (z.rank() != 2) throw ShapeError("tv_prox expects an H x W image");
  if (inner_iters == 0) throw ConfigError("tv_prox: inner iterations must be at least 1");
  if (mu < 0.0) throw ConfigError("tv_prox: weight must be non-negative");
  if (mu == 0.0) return z;
  const Shape dshape{2, z.dim(0), z.dim(1)};
  Tensor p = (dual && dual->shape() == dshape) ? *dual : Tensor(dshape);
  // x(p) = z - mu D^T p; ascend the dual with step 1/(8 mu) and clip to [-1, 1].
  const double step = 1.0 / (8.0 * mu);
  for (std::size_t it = 0; it < inner_iters; ++it) {
    Tensor x = z;
    axpy(-mu, discrete_gradient_adjoint(p), x);
    Tensor g = discrete_gradient(x);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i] + step * g[i], -1.0, 1.0);
  }
  Tensor x = z;
  axpy(-mu, discrete_gradient_adjoint(p), x);
  if (dual) *dual = std::move(p);
  return x;
}

double tv_norm(const Tensor& x) {
  double s = 0.0;
  for (double v : discrete_gradient(x).data()) s += std::abs(v);
  return s;
}

double data_fidelity(const Tensor& x, const MeasurementSet& y, const ForwardModel& model) {
  check_measurements(model, y);
  MeasurementSet ax = apply(model, x);
  double s = 0.0;
  for (std::size_t i = 0; i < ax.blocks.size(); ++i) s += sum_squares(ax.blocks[i] - y.blocks[i]);
  return 0.5 * s / static_cast<double>(model.size());
}

double estimate_lipschitz(const ForwardModel& model, std::size_t iterations, std::uint64_t seed) {
  Rng rng(seed);
  Tensor v(model.image_shape());
  for (double& e : v.data()) e = rng.normal();
  v *= 1.0 / norm(v);
  const auto idx = all_indices(model.size());
  double lambda = 0.0;
  for (std::size_t it = 0; it < std::max<std::size_t>(iterations, 1); ++it) {
    Tensor w = minibatch_normal(v, model, idx);
    lambda = dot(v, w);
    const double n = norm(w);
    if (n == 0.0) return 0.0;
    v = (1.0 / n) * std::move(w);
  }
  return lambda;
}

TVResult tv_apgm(const MeasurementSet& y, const ForwardModel& model, const TVConfig& cfg) {
  check_measurements(model, y);
  if (cfg.tau < 0.0 || cfg.iterations == 0 || cfg.inner_iterations == 0 || cfg.step < 0.0) {
    throw ConfigError("tv_apgm: parameters must be positive");
  }
  TVResult out;
  out.lipschitz = estimate_lipschitz(model);
  out.step = cfg.step > 0.0 ? cfg.step : 1.0 / out.lipschitz;
  auto objective = [&](const Tensor& x) { return data_fidelity(x, y, model) + cfg.tau * tv_norm(x); };

  Tensor x = cfg.init ? *cfg.init : Tensor(model.image_shape());
  if (x.shape() != model.image_shape()) throw ShapeError("tv_apgm: initial image shape mismatch");
  Tensor v = x, prev = x;
  Tensor dual;
  double t = 1.0;
  double fx = objective(x);
  out.objective.push_back(fx);
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    Tensor grad_point = v;
    axpy(-out.step, full_gradient(v, y, model), grad_point);
    Tensor z = tv_prox(grad_point, out.step * cfg.tau, cfg.inner_iterations, &dual);
    const double fz = objective(z);
    prev = x;
    if (fz <= fx) {
      x = z;
      fx = fz;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // v = x + (t/t') (z - x) + ((t - 1)/t') (x - prev)
    v = x;
    axpy(t / t_next, z - x, v);
    axpy((t - 1.0) / t_next, x - prev, v);
    t = t_next;
    out.objective.push_back(fx);
  }
  out.image = std::move(x);
  return out;
}

REDResult red_fixed_point(const MeasurementSet& y, const ForwardModel& model, const PriorNet& denoiser,
                          const REDConfig& cfg) {
  check_measurements(model, y);
  if (cfg.tau < 0.0) throw ConfigError("red: tau must be non-negative");
  REDResult out;
  out.gamma = cfg.gamma ? *cfg.gamma : 1.0 / (estimate_lipschitz(model) + cfg.tau);
  if (out.gamma < 0.0) throw ConfigError("red: gamma must be non-negative");
  Tensor x = cfg.init ? *cfg.init : Tensor(model.image_shape());
  if (x.shape() != model.image_shape()) throw ShapeError("red: initial image shape mismatch");
  auto residual = [&](const Tensor& at) {
    Tensor g = full_gradient(at, y, model);
    axpy(cfg.tau, r_theta_apply(denoiser, at), g);
    return g;
  };
  Tensor g = residual(x);
  out.residual.push_back(norm(g));
  for (std::size_t k = 0; k < cfg.iterations; ++k) {
    axpy(-out.gamma, g, x);
    g = residual(x);
    out.residual.push_back(norm(g));
  }
  out.image = std::move(x);
  return out;
}

TrainResult train_denoiser(const std::vector<Tensor>& clean, double sigma, const PriorNet& net,
                           const TrainConfig& cfg) {
  if (!(sigma > 0.0)) throw ConfigError("train_denoiser: sigma must be positive");
  if (clean.empty()) throw ConfigError("train_denoiser: no training images");
  auto pairs = [&](std::size_t j, std::size_t k, std::size_t slot) {
    Rng rng(derive_seed(cfg.seed, {0x4e4f495345ULL, k, slot}));
    ImagePair p{clean[j], clean[j]};
    for (double& v : p.input.data()) v += sigma * rng.normal();
    return p;
  };
  return fit_prior(clean.size(), pairs, initial_checkpoint(net, cfg, {}, "denoiser"), cfg, FitTarget::kResidual);
}

}  // namespace sgdnet
