#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sgdnet/error.hpp"
#include "sgdnet/metrics.hpp"
#include "sgdnet/rng.hpp"

namespace sgdnet {
namespace {

Tensor random_image(std::size_t h, std::size_t w, Rng& rng) {
  Tensor t({h, w});
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

TEST(Snr, WorkedExample) {
  Tensor x = Tensor::from({1, 2, 3}), xhat = Tensor::from({1, 2, 2});
  AffineFit fit = affine_fit(xhat, x);
  EXPECT_NEAR(fit.scale, 1.5, 1e-15);
  EXPECT_NEAR(fit.offset, -0.5, 1e-15);
  EXPECT_NEAR(snr_db(xhat, x), 10.0 * std::log10(28.0), 1e-12);
}

TEST(Snr, GridSearchNeverBeatsClosedForm) {
  Tensor x = Tensor::from({1, 2, 3}), xhat = Tensor::from({1, 2, 2});
  const double best = snr_db(xhat, x);
  const double xn = norm(x);
  for (int i = -50; i <= 50; ++i) {
    for (int j = -50; j <= 50; ++j) {
      const double a = 1.5 + 0.02 * i, b = -0.5 + 0.02 * j;
      double r2 = 0.0;
      for (std::size_t k = 0; k < 3; ++k) r2 += std::pow(x[k] - a * xhat[k] - b, 2);
      EXPECT_LE(20.0 * std::log10(xn / std::sqrt(r2)), best + 1e-12);
    }
  }
}

TEST(Snr, AffineInvariance) {
  Rng rng(1);
  Tensor x = random_image(8, 8, rng), xhat = random_image(8, 8, rng);
  const double ref = snr_db(xhat, x);
  for (double a : {5.0, -0.3, 1e3}) {
    for (double b : {3.0, -7.0, 0.0}) {
      Tensor t = xhat;
      for (double& v : t.data()) v = a * v + b;
      EXPECT_NEAR(snr_db(t, x), ref, 1e-9);
    }
  }
}

TEST(Snr, PerfectMatchIsInfinite) {
  Tensor x = Tensor::from({0.1, 0.5, 0.9});
  EXPECT_EQ(snr_db(x, x), std::numeric_limits<double>::infinity());
  Tensor t = x;
  for (double& v : t.data()) v = 5 * v + 3;
  // Round-off leaves a tiny residual; the reported value still hits the cap.
  EXPECT_GE(snr_db(t, x), kSnrCapDb);
  EXPECT_EQ(format_snr(snr_db(t, x)), format_snr(snr_db(x, x)));
  EXPECT_EQ(format_snr(snr_db(x, x)), "300.000000");
}

TEST(Snr, ZeroTruthRejected) {
  EXPECT_THROW(snr_db(Tensor::from({1, 2}), Tensor({2})), NumericError);
  EXPECT_THROW(snr_db(Tensor::from({1, 2}), Tensor::from({1, 2, 3})), ShapeError);
}

TEST(Ssim, IdentityAndSymmetry) {
  Rng rng(2);
  Tensor p = random_image(16, 16, rng), q = random_image(16, 16, rng);
  EXPECT_NEAR(ssim(p, p, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(ssim(p, q, 1.0), ssim(q, p, 1.0), 1e-12);
  const double v = ssim(p, q, 1.0);
  EXPECT_GE(v, -1.0);
  EXPECT_LE(v, 1.0);
}

TEST(Ssim, NegatedImageIsNegative) {
  // Zero-mean oscillating image: local means vanish, so the contrast term
  // carries the sign of the correlation.
  Tensor p({16, 16});
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) p[r * 16 + c] = ((r + c) % 2 ? 1.0 : -1.0) * (1.0 + 0.1 * (c % 3));
  Tensor q = -1.0 * p;
  EXPECT_LT(ssim(q, p, 2.0), 0.0);
}

TEST(Ssim, ConstantImagesMatchScalarFormula) {
  const double a = 0.4, b = 0.41, l = 1.0;
  Tensor p({12, 12}, a), q({12, 12}, b);
  const double c1 = 1e-4, c2 = 9e-4;
  const double expected = ((2 * a * b + c1) * c2) / ((a * a + b * b + c1) * c2);
  EXPECT_NEAR(ssim(p, q, l), expected, 1e-12);
}

TEST(Ssim, SmallImageUsesShrunkWindow) {
  Rng rng(4);
  Tensor p = random_image(6, 9, rng);
  EXPECT_NEAR(ssim(p, p, 1.0), 1.0, 1e-12);
}

TEST(Summary, MeanMedianStd) {
  Summary s = summarize({1, 2, 3, 10});
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_NEAR(s.stddev, std::sqrt(50.0 / 3.0), 1e-12);
}

}  // namespace
}  // namespace sgdnet
