#include "sgdnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sgdnet/error.hpp"

namespace sgdnet {

AffineFit affine_fit(const Tensor& xhat, const Tensor& x) {
  require_same_shape(xhat, x, "affine_fit");
  const auto n = static_cast<double>(x.size());
  double mh = 0.0, mx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mh += xhat[i];
    mx += x[i];
  }
  mh /= n;
  mx /= n;
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    var += (xhat[i] - mh) * (xhat[i] - mh);
    cov += (xhat[i] - mh) * (x[i] - mx);
  }
  AffineFit fit;
  fit.scale = var > 0.0 ? cov / var : 0.0;
  fit.offset = mx - fit.scale * mh;
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - fit.scale * xhat[i] - fit.offset;
    r2 += r * r;
  }
  fit.residual_norm = std::sqrt(r2);
  return fit;
}

double snr_db(const Tensor& xhat, const Tensor& x) {
  const double xn = norm(x);
  if (xn <= 0.0) throw NumericError("snr_db: ground truth is all zero");
  const AffineFit fit = affine_fit(xhat, x);
  if (fit.residual_norm < 1e-300) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(xn / fit.residual_norm);
}

namespace {

// Valid-mode separable filtering with a normalised 1-D window.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& win) {
  const std::size_t k = win.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += win[t] * img[i * w + j + t];
      tmp[i * ow + j] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += win[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& xhat, const Tensor& x, double dynamic_range) {
  require_same_shape(xhat, x, "ssim");
  if (x.rank() != 2) throw ShapeError("ssim expects 2-D images");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic range must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1);
  std::size_t k = std::min<std::size_t>({11, h, w});
  if (k % 2 == 0) --k;
  std::vector<double> win(k);
  double total = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    const double d = static_cast<double>(t) - static_cast<double>(k / 2);
    win[t] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    total += win[t];
  }
  for (double& v : win) v /= total;

  const std::size_t n = h * w;
  std::vector<double> p(xhat.data().begin(), xhat.data().end());
  std::vector<double> q(x.data().begin(), x.data().end());
  std::vector<double> pp(n), qq(n), pq(n);
  for (std::size_t i = 0; i < n; ++i) {
    pp[i] = p[i] * p[i];
    qq[i] = q[i] * q[i];
    pq[i] = p[i] * q[i];
  }
  const auto mu_p = filter_valid(p, h, w, win);
  const auto mu_q = filter_valid(q, h, w, win);
  const auto e_pp = filter_valid(pp, h, w, win);
  const auto e_qq = filter_valid(qq, h, w, win);
  const auto e_pq = filter_valid(pq, h, w, win);

  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_p.size(); ++i) {
    const double mp = mu_p[i], mq = mu_q[i];
    const double vp = e_pp[i] - mp * mp, vq = e_qq[i] - mq * mq, cpq = e_pq[i] - mp * mq;
    acc += ((2.0 * mp * mq + c1) * (2.0 * cpq + c2)) / ((mp * mp + mq * mq + c1) * (vp + vq + c2));
  }
  return acc / static_cast<double>(mu_p.size());
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  const auto n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  s.median = values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
  return s;
}

std::string format_snr(double snr) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", std::min(snr, kSnrCapDb));
  return buf;
}

}  // namespace sgdnet
