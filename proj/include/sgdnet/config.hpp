#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgdnet/dataset.hpp"
#include "sgdnet/theory.hpp"
#include "sgdnet/training.hpp"

namespace sgdnet {

struct ProblemConfig {
  ModelSpec model;
  double snr_db = 30.0;
  std::size_t train_count = 200;
  std::size_t test_count = 30;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  InitKind init = InitKind::kFbp;
};

struct UnfoldSection {
  UnfoldConfig unfold;
  double tau = 4.0;  // initial tau
  PriorNetSpec net;
  double init_gain = 0.5;
  std::uint64_t net_seed = 3;
};

struct PretrainSection {
  bool enabled = true;
  TrainConfig train;
  FitTarget target = FitTarget::kClean;
};

struct BaselineSection {
  std::vector<double> tv_taus{3e-3, 1e-2, 2e-2, 4e-2};  // grid, tuned on training images
  std::size_t tv_iterations = 240;
  std::size_t tv_inner = 20;
  std::size_t tv_tune_images = 10;
  double red_tau = 1.0;
  std::size_t red_iterations = 240;
  double denoiser_sigma = 0.05;
  TrainConfig denoiser;
};

struct TheorySection {
  TheoryProblem problem;
  std::vector<std::size_t> batches{1, 5, 20};
  std::vector<std::size_t> iterations{250, 4000};
  std::size_t seeds = 5;
  std::uint64_t root_seed = 7;
  std::size_t probes = 5;
  std::vector<std::size_t> variance_batches{1, 2, 5, 10};
  std::size_t variance_draws = 10000;
  double variance_tolerance_se = 3.0;
  double unbiasedness_tolerance = 1e-12;
  double b_tolerance = 0.2;
};

struct PathsConfig {
  std::string train_data;  // dataset dirs written by gen-data; empty: synthesize
  std::string test_data;
  std::string warm_start;  // checkpoint dir
  std::string out;
};

struct ExperimentConfig {
  ProblemConfig problem;
  UnfoldSection unfold;
  TrainConfig train;
  PretrainSection pretrain;
  BaselineSection baselines;
  TheorySection theory;
  PathsConfig paths;

  // Desk-scale CT protocol: Adam, shuffled epochs, pretrained warm start.
  ExperimentConfig();
};

/// Parses a JSON config. Every key is optional and falls back to the default
/// above; unknown keys, wrong types and out-of-range values throw ConfigError
/// before anything is allocated.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Range checks shared by the parser and programmatic callers.
void validate(const ExperimentConfig& cfg);

// Dataset spec for the training or test split.
DatasetSpec dataset_spec(const ProblemConfig& problem, bool test);

}  // namespace sgdnet
