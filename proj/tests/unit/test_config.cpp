#include <gtest/gtest.h>

#include <cmath>

#include "sgdnet/config.hpp"
#include "sgdnet/error.hpp"

namespace sgdnet {
namespace {

TEST(Config, EmptyObjectGivesDefaults) {
  const ExperimentConfig cfg = parse_config("{}");
  const ExperimentConfig ref;
  EXPECT_EQ(cfg.unfold.unfold.steps, 8u);
  EXPECT_DOUBLE_EQ(cfg.unfold.unfold.gamma, ref.unfold.unfold.gamma);
  EXPECT_EQ(cfg.problem.model.components, ref.problem.model.components);
  EXPECT_EQ(cfg.baselines.tv_taus, ref.baselines.tv_taus);
  EXPECT_EQ(config_to_json(cfg), config_to_json(ref));
}

TEST(Config, RoundTrip) {
  const ExperimentConfig cfg = parse_config(R"({
    "problem": {"model": {"kind": "conv", "size": 16, "components": 4, "kernel_size": 5}, "snr_db": "inf", "init": "bp"},
    "unfold": {"steps": 3, "mode": "full-batch", "minibatch": 2, "hidden": 6},
    "train": {"optimizer": "sgd", "order": "uniform", "epochs": 3},
    "pretrain": {"target": "residual"},
    "theory": {"batches": [1, 2], "seeds": 2}
  })");
  EXPECT_EQ(cfg.problem.model.kind, "conv");
  EXPECT_TRUE(std::isinf(cfg.problem.snr_db));
  EXPECT_EQ(cfg.unfold.unfold.mode, DataMode::kFullBatch);
  EXPECT_EQ(cfg.unfold.net.hidden, 6u);
  EXPECT_EQ(cfg.pretrain.target, FitTarget::kResidual);
  const std::string text = config_to_json(cfg);
  EXPECT_EQ(config_to_json(parse_config(text)), text);
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(parse_config(R"({"unfold": {"stepz": 3}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"extra": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"problem": {"model": {"colour": 1}}})"), ConfigError);
}

TEST(Config, RejectsWrongTypes) {
  EXPECT_THROW(parse_config(R"({"unfold": {"steps": "8"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"unfold": {"steps": -1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"unfold": {"steps": 2.5}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"baselines": {"tv_taus": 0.1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"unfold": {"mode": "sometimes"}})"), ConfigError);
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(Config, RejectsOutOfRange) {
  EXPECT_THROW(parse_config(R"({"unfold": {"steps": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"unfold": {"gamma": 0}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"unfold": {"minibatch": 61}})"), ConfigError);
}

TEST(Config, DatasetSpecSplitsSeeds) {
  const ExperimentConfig cfg;
  const DatasetSpec train = dataset_spec(cfg.problem, false);
  const DatasetSpec test = dataset_spec(cfg.problem, true);
  EXPECT_EQ(train.count, cfg.problem.train_count);
  EXPECT_EQ(test.count, cfg.problem.test_count);
  EXPECT_NE(train.seed, test.seed);
}

TEST(Config, LoadMissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
}

}  // namespace
}  // namespace sgdnet
