#include <gtest/gtest.h>

#include <cmath>

#include "sgdnet/error.hpp"
#include "sgdnet/theory.hpp"

namespace sgdnet {
namespace {

ForwardModel two_component_model() {
  Tensor a1({2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor a2({2, 2}, std::vector<double>{2, 0, 0, 2});
  return ForwardModel({1, 2}, {std::make_shared<ExplicitMatrix>(a1, Shape{1, 2}),
                               std::make_shared<ExplicitMatrix>(a2, Shape{1, 2})});
}

MeasurementSet two_component_y() {
  MeasurementSet y;
  y.blocks = {Tensor({2}), Tensor({2}, 2.0)};
  return y;
}

std::vector<Tensor> random_probes(Shape shape, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> out;
  for (std::size_t p = 0; p < n; ++p) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.uniform();
    out.push_back(std::move(t));
  }
  return out;
}

ForwardModel small_radon(std::size_t components) {
  ModelSpec spec;
  spec.size = 8;
  spec.components = components;
  return build_model(spec);
}

TEST(Unbiasedness, SingleComponentHasZeroDeviation) {
  ForwardModel model = small_radon(1);
  MeasurementSet y = apply(model, random_probes({8, 8}, 1, 3)[0]);
  auto report = check_phi_unbiasedness(model, y, random_probes({8, 8}, 3, 4));
  ASSERT_EQ(report.deviation.size(), 3u);
  for (double d : report.deviation) EXPECT_EQ(d, 0.0);
  EXPECT_TRUE(report.passed());
}

TEST(Unbiasedness, EnumerationMatchesFullGradient) {
  ForwardModel model = small_radon(7);
  MeasurementSet y = apply(model, random_probes({8, 8}, 1, 5)[0]);
  auto report = check_phi_unbiasedness(model, y, random_probes({8, 8}, 4, 6));
  EXPECT_TRUE(report.passed()) << report.max_deviation;
}

TEST(Variance, TwoComponentExample) {
  Tensor x({1, 2}, std::vector<double>{1, 2});
  EXPECT_DOUBLE_EQ(enumerated_variance(two_component_model(), two_component_y(), x), 1.25);
}

TEST(Variance, MonteCarloFollowsInverseBatchLaw) {
  ForwardModel model = small_radon(10);
  MeasurementSet y = apply(model, random_probes({8, 8}, 1, 7)[0]);
  auto report = check_variance_scaling(model, y, random_probes({8, 8}, 2, 8), {1, 2, 5}, 4000, 9);
  ASSERT_EQ(report.rows.size(), 6u);
  for (const auto& row : report.rows) {
    EXPECT_NEAR(row.expected, row.sigma_sq / static_cast<double>(row.batch), 1e-15);
    EXPECT_GT(row.standard_error, 0.0);
  }
  EXPECT_TRUE(report.passed());
}

TEST(Variance, FullSizeBatchStillRandom) {
  // Draws are with replacement, so B = I does not reproduce the full gradient.
  ForwardModel model = two_component_model();
  auto report = check_variance_scaling(model, two_component_y(), {Tensor({1, 2}, std::vector<double>{1, 2})}, {2},
                                       2000, 11);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(report.rows[0].expected, 0.625);
  EXPECT_GT(report.rows[0].monte_carlo, 0.0);
  EXPECT_TRUE(report.passed());
}

TEST(Variance, RejectsTooFewDraws) {
  EXPECT_THROW(check_variance_scaling(two_component_model(), two_component_y(),
                                      {Tensor({1, 2}, std::vector<double>{1, 2})}, {1}, 1, 0),
               ConfigError);
}

Dataset tiny_data(const ForwardModel& model, std::size_t count, std::uint64_t seed) {
  DatasetSpec ds;
  ds.model.size = 8;
  ds.model.components = model.size();
  ds.count = count;
  ds.snr_db = 30.0;
  ds.seed = seed;
  return synthesize_dataset(ds, model, InitKind::kFbp);
}

UnfoldConfig tiny_unfold() {
  UnfoldConfig u;
  u.steps = 2;
  u.gamma = 0.05;
  u.minibatch = 2;
  return u;
}

TEST(TrainingGradient, AverageOfSampleGradientsIsFullGradient) {
  ForwardModel model = small_radon(5);
  Dataset data = tiny_data(model, 3, 12);
  PriorNet net = PriorNet::random({4, 3}, 13, 0.5, 0.5);
  auto report = check_training_gradient_unbiasedness(data, model, net, tiny_unfold());
  EXPECT_TRUE(report.passed()) << report.deviation;
  EXPECT_GT(report.epsilon_sq, 0.0);
}

TEST(TrainingGradient, SingleSampleHasNoSpread) {
  ForwardModel model = small_radon(5);
  Dataset data = tiny_data(model, 1, 14);
  auto report = check_training_gradient_unbiasedness(data, model, PriorNet::random({4, 3}, 15, 0.5, 0.5),
                                                     tiny_unfold());
  EXPECT_EQ(report.epsilon_sq, 0.0);
  EXPECT_TRUE(report.passed());
}

TEST(TrainingGradient, IdenticalSamplesHaveNoSpread) {
  ForwardModel model = small_radon(5);
  Dataset data = tiny_data(model, 1, 16);
  data.samples.push_back(data.samples[0]);
  data.samples.push_back(data.samples[0]);
  auto report = check_training_gradient_unbiasedness(data, model, PriorNet::random({4, 3}, 17, 0.5, 0.5),
                                                     tiny_unfold());
  EXPECT_NEAR(report.epsilon_sq, 0.0, 1e-24);
  EXPECT_TRUE(report.passed());
}

TheoryProblem tiny_theory() {
  TheoryProblem p;
  p.model.size = 8;
  p.model.components = 6;
  p.samples = 2;
  p.net = {4, 3};
  p.steps = 2;
  p.trace_points = 10;
  return p;
}

TEST(Theorem1, MinSoFarIsMonotone) {
  auto result = theorem1_sweep(tiny_theory(), {1, 3}, {40}, 2, 21);
  ASSERT_EQ(result.runs.size(), 4u);
  for (const auto& run : result.runs) {
    ASSERT_FALSE(run.diverged) << run.note;
    ASSERT_EQ(run.samples.size(), 10u);
    ASSERT_EQ(run.min_so_far.size(), run.samples.size());
    EXPECT_EQ(run.samples.front().first, 0u);
    EXPECT_LT(run.samples.back().first, 40u);
    for (std::size_t i = 1; i < run.min_so_far.size(); ++i) {
      EXPECT_LE(run.min_so_far[i], run.min_so_far[i - 1]);
      EXPECT_LE(run.min_so_far[i], run.samples[i].second);
    }
    EXPECT_EQ(run.min_grad_norm_sq, run.min_so_far.back());
    EXPECT_DOUBLE_EQ(run.eta, 0.1 / std::sqrt(40.0));
  }
  EXPECT_EQ(result.summary.cells.size(), 2u);
}

TEST(Theorem1, SingleIterationReportsInitialNorm) {
  TheoryProblem p = tiny_theory();
  const std::uint64_t root = 22;
  auto result = theorem1_sweep(p, {2}, {1}, 1, root);
  ASSERT_EQ(result.runs.size(), 1u);
  ASSERT_EQ(result.runs[0].samples.size(), 1u);

  ForwardModel model = build_model(p.model);
  DatasetSpec ds;
  ds.model = p.model;
  ds.count = p.samples;
  ds.snr_db = p.snr_db;
  ds.seed = p.data_seed;
  Dataset data = synthesize_dataset(ds, model, InitKind::kFbp);
  PriorNet net = PriorNet::random(p.net, derive_seed(root, {0x4e4554ULL, 0}), p.tau, p.init_gain);
  UnfoldConfig u;
  u.steps = p.steps;
  u.gamma = p.gamma;
  auto g = full_objective_gradient(data, model, net, u, {true, true});
  EXPECT_NEAR(result.runs[0].min_grad_norm_sq, g.norm_sq(), 1e-12 * g.norm_sq());
}

TEST(Theorem1, SameSeedsReproduce) {
  auto a = theorem1_sweep(tiny_theory(), {2}, {20}, 1, 23);
  auto b = theorem1_sweep(tiny_theory(), {2}, {20}, 1, 23, 2);
  ASSERT_EQ(a.runs[0].samples.size(), b.runs[0].samples.size());
  for (std::size_t i = 0; i < a.runs[0].samples.size(); ++i) {
    EXPECT_EQ(a.runs[0].samples[i].second, b.runs[0].samples[i].second);
  }
}

TEST(Theorem1, SummaryTrends) {
  auto run = [](std::size_t b, std::size_t k, double min, double floor) {
    Theorem1Run r;
    r.batch = b;
    r.iterations = k;
    r.min_grad_norm_sq = min;
    r.tail_floor = floor;
    return r;
  };
  auto good = summarize_theorem1({run(1, 10, 2.0, 3.0), run(1, 100, 1.0, 2.0), run(4, 10, 2.0, 3.0),
                                  run(4, 100, 1.5, 2.3)});
  EXPECT_TRUE(good.k_trend_ok);
  EXPECT_TRUE(good.b_trend_ok);  // 2.3 <= 1.2 * 2.0
  ASSERT_NE(good.find(4, 100), nullptr);
  EXPECT_DOUBLE_EQ(good.find(4, 100)->mean_floor, 2.3);

  auto bad = summarize_theorem1({run(1, 10, 1.0, 3.0), run(1, 100, 1.1, 2.0), run(4, 10, 2.0, 3.0),
                                 run(4, 100, 1.5, 2.5)});
  EXPECT_FALSE(bad.k_trend_ok);
  EXPECT_FALSE(bad.b_trend_ok);
  EXPECT_EQ(bad.checks.size(), 3u);
}

TEST(Theorem1, DivergedRunsAreExcludedFromMeans) {
  Theorem1Run ok;
  ok.batch = 1;
  ok.iterations = 10;
  ok.min_grad_norm_sq = 2.0;
  Theorem1Run bad = ok;
  bad.diverged = true;
  bad.min_grad_norm_sq = 1e9;
  auto s = summarize_theorem1({ok, bad});
  ASSERT_EQ(s.cells.size(), 1u);
  EXPECT_EQ(s.cells[0].runs, 1u);
  EXPECT_EQ(s.cells[0].diverged, 1u);
  EXPECT_DOUBLE_EQ(s.cells[0].mean_min, 2.0);
}

}  // namespace
}  // namespace sgdnet
