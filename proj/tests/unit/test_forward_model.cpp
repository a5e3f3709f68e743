#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "sgdnet/error.hpp"
#include "sgdnet/forward_model.hpp"
#include "sgdnet/tensor_io.hpp"

namespace sgdnet {
namespace {

Tensor random_image(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// Two scalar-identity components: A_1 = I, A_2 = 2I on a 1 x 2 image.
ForwardModel two_component_model() {
  Tensor a1({2, 2}, std::vector<double>{1, 0, 0, 1});
  Tensor a2({2, 2}, std::vector<double>{2, 0, 0, 2});
  return ForwardModel({1, 2}, {std::make_shared<ExplicitMatrix>(a1, Shape{1, 2}),
                               std::make_shared<ExplicitMatrix>(a2, Shape{1, 2})});
}

void expect_adjoint(const ComponentOperator& op, Rng& rng, int trials) {
  for (int t = 0; t < trials; ++t) {
    Tensor x = random_image(op.image_shape(), rng);
    Tensor u = random_image(op.output_shape(), rng);
    Tensor ax = op.apply(x);
    const double lhs = dot(ax, u), rhs = dot(x, op.adjoint(u));
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * norm(ax) * norm(u));
  }
}

TEST(RadonView, AdjointIdentity) {
  Rng rng(1);
  for (double deg : {0.0, 13.0, 45.0, 90.0, 137.5}) {
    expect_adjoint(RadonView(9, 11, deg * std::numbers::pi / 180.0, 17), rng, 5);
    expect_adjoint(RadonView(8, 8, deg * std::numbers::pi / 180.0, 14, 3), rng, 5);
  }
}

TEST(RadonView, ZeroAngleSumsColumns) {
  const std::size_t n = 6;
  RadonView view(n, n, 0.0, n);
  Rng rng(2);
  Tensor x = random_image({n, n}, rng);
  Tensor p = view.apply(x);
  for (std::size_t c = 0; c < n; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < n; ++r) col += x[r * n + c];
    EXPECT_NEAR(p[c], col, 1e-12);
  }
}

TEST(RadonView, PreservesMass) {
  // Every pixel lands inside the default detector, so total mass is kept.
  const std::size_t n = 10;
  RadonView view(n, n, 0.7, default_detector_count(n), 2);
  Tensor x({n, n}, 1.0);
  Tensor proj = view.apply(x);
  double s = 0.0;
  for (double v : proj.data()) s += v;
  EXPECT_NEAR(s, 100.0, 1e-10);
}

TEST(ConvFilter, AdjointIdentityAndImpulse) {
  Rng rng(3);
  Tensor k({3, 3});
  for (std::size_t i = 0; i < 9; ++i) k[i] = static_cast<double>(i);
  ConvFilter f(7, 5, k);
  expect_adjoint(f, rng, 10);
  Tensor x({7, 5});
  x[3 * 5 + 2] = 1.0;
  // True convolution of an impulse reproduces the kernel unflipped.
  Tensor y = f.apply(x);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(y[(2 + r) * 5 + 1 + c], k[r * 3 + c]);
}

TEST(ExplicitMatrix, AdjointIsTranspose) {
  Rng rng(4);
  ExplicitMatrix m(random_image({5, 6}, rng), {2, 3});
  expect_adjoint(m, rng, 10);
  EXPECT_THROW(ExplicitMatrix(random_image({5, 6}, rng), {2, 2}), ShapeError);
}

TEST(Gradient, TwoComponentExample) {
  ForwardModel model = two_component_model();
  MeasurementSet y;
  y.blocks = {Tensor({2}), Tensor({2}, 2.0)};
  Tensor x({1, 2}, std::vector<double>{1, 2});
  EXPECT_EQ(minibatch_gradient(x, y, model, std::vector<std::size_t>{0}), Tensor({1, 2}, std::vector<double>{1, 2}));
  EXPECT_EQ(minibatch_gradient(x, y, model, std::vector<std::size_t>{1}), Tensor({1, 2}, std::vector<double>{0, 4}));
  EXPECT_EQ(full_gradient(x, y, model), Tensor({1, 2}, std::vector<double>{0.5, 3}));
  EXPECT_EQ(full_gradient(x, y, model), minibatch_gradient(x, y, model, std::vector<std::size_t>{0, 1}));
}

TEST(Gradient, ConsistentPointIsStationary) {
  ForwardModel model = make_radon_model(8, 5);
  Rng rng(21);
  Tensor x = random_image({8, 8}, rng);
  EXPECT_LE(max_abs(full_gradient(x, apply(model, x), model)), 1e-12);
}

// Dense matrix of one component, built by probing basis vectors.
Tensor dense_matrix(const ComponentOperator& op) {
  const std::size_t n = op.image_size(), m = op.output_size();
  Tensor mat({m, n});
  Tensor e(op.image_shape());
  for (std::size_t j = 0; j < n; ++j) {
    e.fill(0.0);
    e[j] = 1.0;
    Tensor col = op.apply(e);
    for (std::size_t i = 0; i < m; ++i) mat[i * n + j] = col[i];
  }
  return mat;
}

TEST(Gradient, MatchesDenseMatrixOracle) {
  ForwardModel model = make_radon_model(8, 6);
  Rng rng(22);
  Tensor x = random_image({8, 8}, rng);
  MeasurementSet y = apply(model, random_image({8, 8}, rng));
  Tensor expect({8, 8});
  for (std::size_t i = 0; i < model.size(); ++i) {
    Tensor a = dense_matrix(model.component(i));
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> r(m);
    for (std::size_t p = 0; p < m; ++p) {
      double s = -y.blocks[i][p];
      for (std::size_t q = 0; q < n; ++q) s += a[p * n + q] * x[q];
      r[p] = s;
    }
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t p = 0; p < m; ++p) expect[q] += a[p * n + q] * r[p] / 6.0;
  }
  EXPECT_LE(max_abs_diff(expect, full_gradient(x, y, model)), 1e-10);
}

TEST(ConvFilter, DeltaKernelIsIdentity) {
  Tensor k({5, 5});
  k[12] = 1.0;
  ConvFilter f(6, 6, k);
  Rng rng(23);
  Tensor x = random_image({6, 6}, rng);
  EXPECT_EQ(f.apply(x), x);
}

TEST(Apply, IdentityComponent) {
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  ForwardModel model({2, 2}, {std::make_shared<ExplicitMatrix>(eye, Shape{2, 2})});
  Tensor x({2, 2}, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(apply(model, x).blocks[0].data()[3], 4.0);
  EXPECT_EQ(bp_init(apply(model, x), model), x);
}

TEST(Gradient, FullEqualsEnumeratedMean) {
  ForwardModel model = make_radon_model(8, 7);
  Rng rng(5);
  Tensor x = random_image({8, 8}, rng);
  MeasurementSet y = apply(model, random_image({8, 8}, rng));
  Tensor mean({8, 8});
  for (std::size_t i = 0; i < model.size(); ++i) {
    mean += minibatch_gradient(x, y, model, std::vector<std::size_t>{i});
  }
  mean *= 1.0 / 7.0;
  EXPECT_LE(max_abs_diff(mean, full_gradient(x, y, model)), 1e-12);
}

TEST(Gradient, DuplicateIndicesCountTwice) {
  ForwardModel model = two_component_model();
  MeasurementSet y;
  y.blocks = {Tensor({2}), Tensor({2})};
  Tensor x({1, 2}, std::vector<double>{1, 1});
  Tensor g = minibatch_gradient(x, y, model, std::vector<std::size_t>{1, 1, 0});
  // (4x + 4x + x) / 3 = 3x
  EXPECT_EQ(g, Tensor({1, 2}, std::vector<double>{3, 3}));
}

TEST(Gradient, IndexErrors) {
  ForwardModel model = two_component_model();
  MeasurementSet y;
  y.blocks = {Tensor({2}), Tensor({2})};
  Tensor x({1, 2});
  EXPECT_THROW(minibatch_gradient(x, y, model, std::vector<std::size_t>{}), std::invalid_argument);
  EXPECT_THROW(minibatch_gradient(x, y, model, std::vector<std::size_t>{2}), std::out_of_range);
  y.blocks.pop_back();
  EXPECT_THROW(full_gradient(x, y, model), ShapeError);
}

TEST(Gradient, NormalOperatorIsJacobian) {
  ForwardModel model = make_conv_model(8, 5, 11, 5);
  Rng rng(6);
  MeasurementSet y = apply(model, random_image({8, 8}, rng));
  Tensor x = random_image({8, 8}, rng), v = random_image({8, 8}, rng);
  std::vector<std::size_t> idx = {3, 0, 3};
  Tensor lin = minibatch_gradient(x + v, y, model, idx) - minibatch_gradient(x, y, model, idx);
  EXPECT_LE(max_abs_diff(lin, minibatch_normal(v, model, idx)), 1e-12);
}

TEST(SampleIndices, UniformChiSquare) {
  Rng rng(9);
  const std::size_t components = 10, n = 100000;
  std::vector<double> counts(components, 0.0);
  auto draws = sample_indices(n, components, rng);
  for (auto i : draws) counts[i] += 1.0;
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / components;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 9 degrees of freedom; 99.9% quantile is 27.88.
  EXPECT_LT(chi2, 27.88);
}

TEST(SampleIndices, Deterministic) {
  Rng a(12), b(12);
  EXPECT_EQ(sample_indices(20, 60, a), sample_indices(20, 60, b));
}

TEST(Fbp, LocalisesDisk) {
  const std::size_t n = 32;
  ForwardModel model = make_radon_model(n, 90);
  Tensor disk({n, n});
  const double cr = 10.0, cc = 20.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= 16.0) disk[r * n + c] = 1.0;
  Tensor rec = fbp_init(apply(model, disk), model);
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
      if (d2 <= 9.0) {
        inside += rec[r * n + c];
        ++n_in;
      } else if (d2 >= 49.0) {
        outside += std::abs(rec[r * n + c]);
        ++n_out;
      }
    }
  inside /= static_cast<double>(n_in);
  outside /= static_cast<double>(n_out);
  EXPECT_NEAR(inside, 1.0, 0.25);
  EXPECT_LT(outside, 0.1);
}

TEST(Fbp, RejectsConvModel) {
  ForwardModel model = make_conv_model(8, 3, 1);
  MeasurementSet y = apply(model, Tensor({8, 8}, 1.0));
  EXPECT_THROW(fbp_init(y, model), ConfigError);
}

TEST(Awgn, RealisesRequestedSnr) {
  ForwardModel model = make_radon_model(16, 10);
  Rng rng(13);
  MeasurementSet y = apply(model, random_image({16, 16}, rng));
  for (double snr : {10.0, 30.0, 45.5}) {
    MeasurementSet noisy = add_awgn_to_input_snr(y, snr, rng);
    double e2 = 0.0;
    for (std::size_t i = 0; i < y.blocks.size(); ++i) e2 += sum_squares(noisy.blocks[i] - y.blocks[i]);
    EXPECT_NEAR(10.0 * std::log10(y.sum_squares() / e2), snr, 1e-9);
    EXPECT_EQ(noisy.noise.input_snr_db, snr);
  }
  MeasurementSet clean = add_awgn_to_input_snr(y, std::numeric_limits<double>::infinity(), rng);
  EXPECT_EQ(clean.blocks, y.blocks);
}

TEST(Awgn, ZeroMeasurementsRejected) {
  MeasurementSet y;
  y.blocks = {Tensor({3})};
  Rng rng(1);
  EXPECT_THROW(add_awgn_to_input_snr(y, 20.0, rng), NumericError);
}

TEST(DiscreteGradient, RampAndAdjoint) {
  Tensor x({3, 4});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 4; ++c) x[r * 4 + c] = static_cast<double>(c) + 10.0 * r;
  Tensor g = discrete_gradient(x);
  ASSERT_EQ(g.shape(), (Shape{2, 3, 4}));
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[3], 0.0);
  EXPECT_DOUBLE_EQ(g[12], 10.0);
  EXPECT_DOUBLE_EQ(g[12 + 8], 0.0);
  Rng rng(14);
  Tensor p = random_image({2, 3, 4}, rng);
  EXPECT_NEAR(dot(discrete_gradient(x), p), dot(x, discrete_gradient_adjoint(p)), 1e-10);
}

TEST(ConvModel, SeededAndNormalised) {
  ForwardModel a = make_conv_model(8, 4, 99), b = make_conv_model(8, 4, 99), c = make_conv_model(8, 4, 100);
  const auto& ka = dynamic_cast<const ConvFilter&>(a.component(2)).kernel();
  EXPECT_EQ(ka, dynamic_cast<const ConvFilter&>(b.component(2)).kernel());
  EXPECT_NE(ka, dynamic_cast<const ConvFilter&>(c.component(2)).kernel());
  double l1 = 0.0;
  for (double v : ka.data()) l1 += std::abs(v);
  EXPECT_NEAR(l1, 1.0, 1e-12);
}

TEST(Measurements, RoundTripThroughDisk) {
  const auto dir = std::filesystem::temp_directory_path() / "sgdnet_meas_rt";
  std::filesystem::remove_all(dir);
  ForwardModel model = make_radon_model(8, 3);
  Rng rng(15);
  MeasurementSet y = add_awgn_to_input_snr(apply(model, random_image({8, 8}, rng)), 20.0, rng);
  y.noise.seed = 77;
  write_measurements(dir, y);
  MeasurementSet back = read_measurements(dir);
  EXPECT_EQ(back.blocks, y.blocks);
  EXPECT_EQ(back.noise.input_snr_db, 20.0);
  EXPECT_EQ(back.noise.seed, 77u);
  std::filesystem::remove_all(dir);
}

TEST(TensorIo, MissingFileIsIoError) {
  EXPECT_THROW(read_tensor("/nonexistent/dir/t.f64"), IoError);
}

}  // namespace
}  // namespace sgdnet
