#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgdnet/forward_model.hpp"
#include "sgdnet/prior_net.hpp"
#include "sgdnet/training.hpp"

namespace sgdnet {

/// Approximate prox of mu * ||D x||_1 (anisotropic TV):
/// argmin_x 1/2 ||x - z||^2 + mu ||D x||_1, by `inner_iters` projected
/// gradient steps (step 1/8) on the dual. `dual` (2 x H x W), when given,
/// warm-starts the dual variable and receives its final value.
Tensor tv_prox(const Tensor& z, double mu, std::size_t inner_iters = 20, Tensor* dual = nullptr);

// Anisotropic TV seminorm ||D x||_1.
double tv_norm(const Tensor& x);

// g(x) = 1/(2I) sum_i ||A_i x - y_i||^2, whose gradient is full_gradient.
double data_fidelity(const Tensor& x, const MeasurementSet& y, const ForwardModel& model);

/// Largest eigenvalue of (1/I) sum_i A_i^H A_i by power iteration from a
/// seeded random start.
double estimate_lipschitz(const ForwardModel& model, std::size_t iterations = 50, std::uint64_t seed = 0);

struct TVConfig {
  double tau = 1e-3;
  std::size_t iterations = 240;
  std::size_t inner_iterations = 20;
  double step = 0.0;  // 0: 1 / L from power iteration
  std::optional<Tensor> init;  // default: zeros
};

struct TVResult {
  Tensor image;
  std::vector<double> objective;  // F(x^k), k = 0..iterations
  double lipschitz = 0.0;
  double step = 0.0;
};

/// Monotone FISTA on g(x) + tau ||D x||_1.
TVResult tv_apgm(const MeasurementSet& y, const ForwardModel& model, const TVConfig& cfg);

struct REDConfig {
  double tau = 1.0;
  std::optional<double> gamma;  // default 1 / (L + tau)
  std::size_t iterations = 240;
  std::optional<Tensor> init;  // default: zeros
};

struct REDResult {
  Tensor image;
  std::vector<double> residual;  // ||G(x^k)||, k = 0..iterations
  double gamma = 0.0;
};

/// Gradient-RED x+ = x - gamma (grad g(x) + tau (x - H(x))) with the
/// denoiser H(x) = x - R_theta(x), so the prior term is tau * R_theta(x).
/// G(x) = grad g(x) + tau (x - H(x)).
REDResult red_fixed_point(const MeasurementSet& y, const ForwardModel& model, const PriorNet& denoiser,
                          const REDConfig& cfg);

/// Trains R_theta to predict AWGN of standard deviation sigma, so that
/// x + e - R_theta(x + e) ~ x. Noise is redrawn at every iteration from a
/// stream derived from (cfg.seed, k, slot).
TrainResult train_denoiser(const std::vector<Tensor>& clean, double sigma, const PriorNet& net,
                           const TrainConfig& cfg);

}  // namespace sgdnet
