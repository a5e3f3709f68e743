#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdnet/dataset.hpp"
#include "sgdnet/training.hpp"

namespace sgdnet {

struct UnbiasednessReport {
  std::vector<double> deviation;  // per probe: ||mean_i g_i - grad g||_2
  double max_deviation = 0.0;
  double tolerance = 1e-12;
  bool passed() const { return max_deviation <= tolerance; }
};

/// Enumerates every single-index draw at each probe image and compares the
/// average stochastic gradient with full_gradient.
UnbiasednessReport check_phi_unbiasedness(const ForwardModel& model, const MeasurementSet& y,
                                          const std::vector<Tensor>& probes, double tolerance = 1e-12);

// Enumerated sigma^2 = (1/I) sum_i ||g_i(x) - grad g(x)||^2.
double enumerated_variance(const ForwardModel& model, const MeasurementSet& y, const Tensor& x);

struct VarianceRow {
  std::size_t probe = 0;
  std::size_t batch = 0;
  double sigma_sq = 0.0;         // enumerated
  double expected = 0.0;         // sigma^2 / B
  double monte_carlo = 0.0;      // mean ||g_hat - grad g||^2
  double standard_error = 0.0;
  double z_score() const { return standard_error > 0 ? (monte_carlo - expected) / standard_error : 0.0; }
  bool within(double k) const { return std::abs(monte_carlo - expected) <= k * standard_error; }
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  double tolerance_se = 3.0;
  bool passed() const;
};

VarianceReport check_variance_scaling(const ForwardModel& model, const MeasurementSet& y,
                                      const std::vector<Tensor>& probes, const std::vector<std::size_t>& batches,
                                      std::size_t draws, std::uint64_t seed, double tolerance_se = 3.0);

struct TrainingGradientReport {
  double deviation = 0.0;    // ||mean_j grad F_j - grad F||_2 over (theta, tau)
  double epsilon_sq = 0.0;   // (1/M) sum_j ||grad F_j - grad F||^2
  double tolerance = 1e-12;
  bool passed() const { return deviation <= tolerance; }
};

TrainingGradientReport check_training_gradient_unbiasedness(const Dataset& data, const ForwardModel& model,
                                                            const PriorNet& net, const UnfoldConfig& unfold,
                                                            double tolerance = 1e-12);

/// Desk-scale problem for the convergence sweep.
struct TheoryProblem {
  ModelSpec model;         // default: 16 x 16 radon, I = 20
  std::size_t samples = 4;  // M
  double snr_db = 30.0;
  std::uint64_t data_seed = 1;
  PriorNetSpec net{8, 3};
  double init_gain = 0.5;
  double tau = 1.0;
  std::size_t steps = 4;   // Q
  double gamma = 0.02;
  double rate = 0.1;       // c in eta = c / sqrt(K)
  std::size_t trace_points = 100;

  TheoryProblem();
};

struct Theorem1Run {
  std::size_t batch = 0;
  std::size_t iterations = 0;  // K
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  double eta = 0.0;
  std::vector<std::pair<std::size_t, double>> samples;  // (k, ||grad F(theta^k)||^2)
  std::vector<double> min_so_far;
  double min_grad_norm_sq = 0.0;
  double tail_floor = 0.0;  // mean of the last 10% of samples
  bool diverged = false;
  std::string note;
  double wallclock_s = 0.0;

  std::string to_csv() const;
};

struct Theorem1Summary {
  // Seed-averaged statistics over non-diverged runs, keyed by (B, K).
  struct Cell {
    std::size_t batch = 0, iterations = 0, runs = 0, diverged = 0;
    double mean_min = 0.0, mean_floor = 0.0;
  };
  std::vector<Cell> cells;
  std::vector<std::string> checks;  // human-readable verdict lines
  bool k_trend_ok = true;
  bool b_trend_ok = true;
  double b_tolerance = 0.2;

  const Cell* find(std::size_t batch, std::size_t iterations) const;
};

struct Theorem1Result {
  std::vector<Theorem1Run> runs;
  Theorem1Summary summary;

  std::string summary_csv() const;
};

/// One training run per (B, K, seed): inverse-sqrt SGD, full-batch gradient
/// norm of the batch objective recorded at about `trace_points` iterations
/// in [0, K). Run seeds are derive_seed(root, {B, K, s}); the initial network
/// depends only on s, so runs with the same s share theta^0.
Theorem1Result theorem1_sweep(const TheoryProblem& problem, std::vector<std::size_t> batches,
                              std::vector<std::size_t> iterations, std::size_t seeds, std::uint64_t root_seed,
                              std::size_t workers = 1);

Theorem1Summary summarize_theorem1(const std::vector<Theorem1Run>& runs, double b_tolerance = 0.2);

}  // namespace sgdnet
