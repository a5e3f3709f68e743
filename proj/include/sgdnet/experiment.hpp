#pragma once

#include <string>
#include <vector>

#include "sgdnet/baselines.hpp"
#include "sgdnet/config.hpp"
#include "sgdnet/metrics.hpp"

namespace sgdnet {

struct ProblemData {
  ForwardModel model;
  Dataset train;
  Dataset test;
};

// Loads the dataset directories named in cfg.paths, or synthesizes both
// splits from the problem section when they are empty.
ProblemData load_problem(const ExperimentConfig& cfg);

// He-initialised network with tau set to the configured initial value.
PriorNet initial_net(const ExperimentConfig& cfg);

// Supervised warm start of R_theta on the training initialisations.
TrainResult run_pretrain(const ExperimentConfig& cfg, const Dataset& train, const TrainHooks& hooks = {});

/// End-to-end training of the unfolded network from `warm` (tau reset to the
/// configured initial value). The method recorded in the checkpoint follows
/// unfold.mode.
TrainResult run_unfolded(const ExperimentConfig& cfg, const ProblemData& problem, const PriorNet& warm,
                         const UnfoldConfig& unfold, const TrainHooks& hooks = {});

/// Applies the unfolded network to every sample. Stochastic steps draw image
/// j's minibatches from derive_seed(seed, {j}).
std::vector<Tensor> reconstruct_unfolded(const Dataset& data, const ForwardModel& model, const PriorNet& net,
                                         const UnfoldConfig& unfold, std::uint64_t seed, std::size_t workers = 1);

struct TVTuning {
  std::vector<double> taus;
  std::vector<double> mean_snr;
  double best_tau = 0.0;
};

// Grid search of the TV weight on the first tv_tune_images samples.
TVTuning tune_tv(const Dataset& train, const ForwardModel& model, const BaselineSection& cfg,
                 std::size_t workers = 1);

// TV-APGM from each sample's initialisation.
std::vector<Tensor> reconstruct_tv(const Dataset& data, const ForwardModel& model, double tau,
                                   const BaselineSection& cfg, std::size_t workers = 1);

std::vector<Tensor> reconstruct_red(const Dataset& data, const ForwardModel& model, const PriorNet& denoiser,
                                    const BaselineSection& cfg, std::size_t workers = 1);

std::vector<Tensor> initial_images(const Dataset& data);

MetricReport score(const std::vector<Tensor>& images, const Dataset& data);

struct BenchRow {
  std::size_t batch = 0;
  Summary data_consistency_ms;  // Q data-consistency layers on one image
  Summary forward_ms;           // full unfolded forward pass on one image
  Summary epoch_s;              // one training epoch; empty when not timed
};

struct BenchOptions {
  std::vector<std::size_t> batches{8, 16, 32};
  std::size_t repeats = 3;
  std::size_t forward_images = 10;  // images per forward timing repeat
  bool time_epochs = true;
};

/// Wall-clock per minibatch size, sorted by B. Each repeat times the forward
/// quantities averaged over `forward_images` test images and, optionally, one
/// training epoch from `net`.
std::vector<BenchRow> bench_minibatch(const ExperimentConfig& cfg, const ProblemData& problem, const PriorNet& net,
                                      const BenchOptions& options);

std::string bench_csv(const std::vector<BenchRow>& rows);

// Rows "image_id,method,snr_db,ssim"; header included when requested.
std::string metrics_csv(const std::string& method, const MetricReport& report, bool header = true);

}  // namespace sgdnet
