#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sgdnet/dataset.hpp"
#include "sgdnet/error.hpp"
#include "sgdnet/prior_net.hpp"
#include "sgdnet/unfold.hpp"

namespace sgdnet {

// ||prediction - target||^2, unnormalised.
Var mse_loss(Var prediction, Var target);
double mse_loss(const Tensor& prediction, const Tensor& target);

struct Schedule {
  enum class Kind { kConstant, kInverseSqrt, kStepDecay };
  Kind kind = Kind::kConstant;
  double rate = 1e-3;
  double factor = 0.5;      // step decay multiplier
  std::size_t period = 1;   // step decay period in iterations

  // Rate for iteration k of a run with `total` iterations. Inverse-sqrt
  // gives rate / sqrt(total), constant over the run.
  double eta(std::size_t k, std::size_t total) const;
};

std::string to_string(Schedule::Kind kind);
Schedule::Kind parse_schedule_kind(const std::string& name);

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

enum class SampleOrder { kUniform, kShuffle };

struct TrainConfig {
  std::size_t epochs = 1;
  // Total iterations; 0 derives epochs * ceil(M / image_batch).
  std::size_t iterations = 0;
  Schedule schedule;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 0.0;  // 0: no clipping
  double tau_rate_scale = 1.0;
  std::size_t image_batch = 1;
  SampleOrder order = SampleOrder::kUniform;
  Trainable trainable{true, true};
  std::uint64_t seed = 0;
  std::size_t snapshot_period = 0;  // iterations; 0: none
  std::size_t trace_period = 0;     // full-objective gradient norm; 0: off
};

void validate(const TrainConfig& cfg);

struct OptimizerState {
  Tensor m;  // first moments over [theta, tau]
  Tensor v;
  std::size_t steps = 0;
};

struct Checkpoint {
  PriorNet net;
  std::string method = "sgdnet";  // sgdnet | ured | pretrain | denoiser
  UnfoldConfig unfold;
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::string rng_state;
  OptimizerState optimizer;
  double last_loss = std::numeric_limits<double>::quiet_NaN();
  double best_loss = std::numeric_limits<double>::infinity();
};

// Fresh checkpoint at iteration 0 with the sampling stream seeded by cfg.seed.
Checkpoint initial_checkpoint(const PriorNet& net, const TrainConfig& cfg, const UnfoldConfig& unfold = {},
                              std::string method = "sgdnet");

/// Directory with theta.f64, optional adam_m.f64 / adam_v.f64 and
/// checkpoint.json (spec hash, tau, Q, gamma, B, mode, seed, epoch, ...).
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

struct ParamUpdate {
  Tensor theta;
  double tau = 0.0;
};

/// theta - eta * g_theta, tau - eta * g_tau. Throws NumericError on
/// non-finite gradients and ConfigError unless eta > 0.
ParamUpdate sgd_update(const Tensor& theta, double tau, const Tensor& grad_theta, double grad_tau, double eta);

struct SampleGradient {
  double loss = 0.0;
  Tensor theta;
  double tau = 0.0;
};

/// Loss ||T(x~_j) - x_j||^2 of one sample and its (theta, tau)-gradient with
/// the given per-step index draws frozen.
SampleGradient sample_gradient(const Sample& sample, const ForwardModel& model, const PriorNet& net,
                               const UnfoldConfig& unfold, const IndexDraws& draws, Trainable trainable);

struct ObjectiveGradient {
  double value = 0.0;  // F = (1/M) sum_j loss_j
  Tensor theta;
  double tau = 0.0;

  double norm_sq() const { return sum_squares(theta) + tau * tau; }
};

/// Batch objective with the full gradient in every layer, averaged over all
/// M samples. Samples are evaluated on up to `workers` threads and summed in
/// sample order.
ObjectiveGradient full_objective_gradient(const Dataset& data, const ForwardModel& model, const PriorNet& net,
                                          const UnfoldConfig& unfold, Trainable trainable = {true, true},
                                          std::size_t workers = 1);

struct TraceRow {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();
  double grad_norm_sq_full = std::numeric_limits<double>::quiet_NaN();
  double wallclock_ms = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;

  // (iteration, value) of every recorded full-objective gradient norm.
  std::vector<std::pair<std::size_t, double>> grad_norms() const;
  std::string to_csv() const;
  static TrainTrace from_csv(const std::string& text);
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainTrace trace;
};

/// Raised when the loss or gradient becomes non-finite. Carries the last
/// checkpoint whose loss was finite.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_good, double last_finite_loss, TrainTrace trace);

  const Checkpoint& last_good() const { return *last_good_; }
  double last_finite_loss() const { return last_finite_loss_; }
  const TrainTrace& trace() const { return *trace_; }

 private:
  std::shared_ptr<Checkpoint> last_good_;
  double last_finite_loss_;
  std::shared_ptr<TrainTrace> trace_;
};

struct TrainHooks {
  // Receives the snapshot and the rows produced by this call so far.
  std::function<void(const Checkpoint&, const TrainTrace&)> on_snapshot;
  // Stop (as if interrupted) once this many iterations are done; 0: never.
  std::size_t stop_at_iteration = 0;
  std::size_t workers = 1;
};

/// Training loop: at iteration k draw sample(s) j_k, draw fresh step
/// minibatches phi^k, and update (theta, tau) with the stochastic gradient.
/// Resumes from `start`; calling it with a saved snapshot continues the
/// uninterrupted run bit for bit.
TrainResult train_unfolded(const Dataset& data, const ForwardModel& model, const Checkpoint& start,
                           const UnfoldConfig& unfold, const TrainConfig& cfg, const TrainHooks& hooks = {});

enum class FitTarget {
  kClean,     // R(input) ~ target
  kResidual,  // input - R(input) ~ target
};

struct ImagePair {
  Tensor input;
  Tensor target;
};

// Pair for sample j at iteration k, batch slot `slot`.
using PairSource = std::function<ImagePair(std::size_t j, std::size_t k, std::size_t slot)>;

/// Supervised fitting of the prior network alone; tau is left untouched.
TrainResult fit_prior(std::size_t count, const PairSource& pairs, const Checkpoint& start, const TrainConfig& cfg,
                      FitTarget target, const TrainHooks& hooks = {});
TrainResult fit_prior(const std::vector<ImagePair>& pairs, const Checkpoint& start, const TrainConfig& cfg,
                      FitTarget target, const TrainHooks& hooks = {});

/// Warm start: fits R_theta(x~_j) ~ x_j on the dataset initialisations.
TrainResult pretrain_artifact_removal(const Dataset& data, const PriorNet& net, const TrainConfig& cfg,
                                      FitTarget target = FitTarget::kClean);

}  // namespace sgdnet
