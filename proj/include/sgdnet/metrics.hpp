#pragma once

#include <string>
#include <vector>

#include "sgdnet/tensor.hpp"

namespace sgdnet {

// SNR values at or above this are written as the cap in CSV output.
inline constexpr double kSnrCapDb = 300.0;

struct AffineFit {
  double scale = 0.0;   // a
  double offset = 0.0;  // b, so that the residual is x - a * xhat - b
  double residual_norm = 0.0;
};

// Least-squares fit of x against (xhat, 1).
AffineFit affine_fit(const Tensor& xhat, const Tensor& x);

/// max over a, b of 20 log10(|x| / |x - a xhat - b|), using the closed-form
/// fit. Returns +infinity when the residual falls below 1e-300; throws
/// NumericError for an all-zero ground truth.
double snr_db(const Tensor& xhat, const Tensor& x);

/// Mean local SSIM with an 11 x 11 Gaussian window (sigma 1.5) over the
/// valid region, C1 = (0.01 L)^2, C2 = (0.03 L)^2. Images smaller than the
/// window use the largest odd window that fits.
double ssim(const Tensor& xhat, const Tensor& x, double dynamic_range);

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
};

Summary summarize(std::vector<double> values);

struct MetricReport {
  std::vector<double> snr_db;
  std::vector<double> ssim;

  Summary snr_summary() const { return summarize(snr_db); }
  Summary ssim_summary() const { return summarize(ssim); }
};

// Formats an SNR for CSV, replacing infinities by the cap.
std::string format_snr(double snr);

}  // namespace sgdnet
