#include "sgdnet/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "json.hpp"
#include "sgdnet/error.hpp"
#include "sgdnet/ops.hpp"
#include "sgdnet/tensor_io.hpp"

namespace sgdnet {

std::string to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::kRadonView: return "radon-view";
    case ComponentKind::kConvFilter: return "conv-filter";
    case ComponentKind::kExplicitMatrix: return "explicit-matrix";
  }
  return "unknown";
}

Tensor ComponentOperator::apply(const Tensor& x) const {
  if (x.size() != image_size()) {
    throw ShapeError("component apply: image has shape " + shape_to_string(x.shape()) + ", expected " +
                     shape_to_string(image_shape_));
  }
  Tensor out(output_shape_);
  apply(x.raw(), out.raw());
  return out;
}

Tensor ComponentOperator::adjoint(const Tensor& u) const {
  if (u.size() != output_size()) {
    throw ShapeError("component adjoint: measurement has shape " + shape_to_string(u.shape()) + ", expected " +
                     shape_to_string(output_shape_));
  }
  Tensor out(image_shape_);
  adjoint_add(u.raw(), out.raw());
  return out;
}

// ---------------------------------------------------------------- RadonView

RadonView::RadonView(std::size_t rows, std::size_t cols, double angle_rad, std::size_t detectors,
                     std::size_t supersample)
    : ComponentOperator({rows, cols}, {detectors}),
      rows_(rows),
      cols_(cols),
      angle_(angle_rad),
      detectors_(detectors),
      supersample_(supersample) {
  if (supersample_ == 0) throw ConfigError("RadonView: supersample must be positive");
  const double c = std::cos(angle_), s = std::sin(angle_);
  const auto ss = static_cast<double>(supersample_);
  for (std::size_t a = 0; a < supersample_; ++a) {
    for (std::size_t b = 0; b < supersample_; ++b) {
      const double ox = (static_cast<double>(b) + 0.5) / ss - 0.5;
      const double oy = 0.5 - (static_cast<double>(a) + 0.5) / ss;
      subpixel_shift_.push_back(ox * c + oy * s);
    }
  }
}

template <typename Visit>
void RadonView::for_each_splat(Visit&& visit) const {
  const double c = std::cos(angle_), s = std::sin(angle_);
  const double xc = 0.5 * static_cast<double>(cols_ - 1);
  const double yc = 0.5 * static_cast<double>(rows_ - 1);
  const double dc = 0.5 * static_cast<double>(detectors_ - 1);
  const double w = 1.0 / static_cast<double>(subpixel_shift_.size());
  const auto last = static_cast<std::ptrdiff_t>(detectors_) - 1;
  for (std::size_t r = 0; r < rows_; ++r) {
    const double y = yc - static_cast<double>(r);
    for (std::size_t col = 0; col < cols_; ++col) {
      const double x = static_cast<double>(col) - xc;
      const double base = x * c + y * s + dc;
      const std::size_t pix = r * cols_ + col;
      for (double shift : subpixel_shift_) {
        const double p = base + shift;
        const double fl = std::floor(p);
        const auto k = static_cast<std::ptrdiff_t>(fl);
        const double f = p - fl;
        if (k >= 0 && k <= last) visit(pix, static_cast<std::size_t>(k), w * (1.0 - f));
        if (k + 1 >= 0 && k + 1 <= last) visit(pix, static_cast<std::size_t>(k + 1), w * f);
      }
    }
  }
}

void RadonView::apply(const double* x, double* out) const {
  std::fill_n(out, detectors_, 0.0);
  for_each_splat([&](std::size_t pix, std::size_t bin, double wt) { out[bin] += wt * x[pix]; });
}

void RadonView::adjoint_add(const double* u, double* out) const {
  for_each_splat([&](std::size_t pix, std::size_t bin, double wt) { out[pix] += wt * u[bin]; });
}

// --------------------------------------------------------------- ConvFilter

namespace {

Tensor flip2d(const Tensor& k) {
  Tensor f(k.shape());
  const std::size_t kh = k.dim(0), kw = k.dim(1);
  for (std::size_t i = 0; i < kh; ++i) {
    for (std::size_t j = 0; j < kw; ++j) f[i * kw + j] = k[(kh - 1 - i) * kw + (kw - 1 - j)];
  }
  return f;
}

}  // namespace

ConvFilter::ConvFilter(std::size_t rows, std::size_t cols, Tensor kernel)
    : ComponentOperator({rows, cols}, {rows, cols}), kernel_(std::move(kernel)) {
  if (kernel_.rank() != 2 || kernel_.dim(0) % 2 == 0 || kernel_.dim(1) % 2 == 0) {
    throw ShapeError("ConvFilter: kernel must be 2-D with odd extents");
  }
  flipped_ = flip2d(kernel_);
}

void ConvFilter::apply(const double* x, double* out) const {
  const Shape& s = image_shape();
  std::fill_n(out, s[0] * s[1], 0.0);
  // Correlation with the flipped kernel is convolution with the kernel.
  kernels::conv2d_forward(x, 1, s[0], s[1], flipped_.raw(), 1, kernel_.dim(0), kernel_.dim(1), out);
}

void ConvFilter::adjoint_add(const double* u, double* out) const {
  const Shape& s = image_shape();
  kernels::conv2d_backward_input(u, 1, s[0], s[1], flipped_.raw(), 1, kernel_.dim(0), kernel_.dim(1), out);
}

// ----------------------------------------------------------- ExplicitMatrix

ExplicitMatrix::ExplicitMatrix(Tensor matrix, Shape image_shape)
    : ComponentOperator(std::move(image_shape), {matrix.rank() == 2 ? matrix.dim(0) : 1}),
      matrix_(std::move(matrix)) {
  if (matrix_.rank() != 2 || matrix_.dim(1) != image_size()) {
    throw ShapeError("ExplicitMatrix: matrix must be m x numel(image), got " + shape_to_string(matrix_.shape()));
  }
}

void ExplicitMatrix::apply(const double* x, double* out) const {
  const std::size_t m = matrix_.dim(0), n = matrix_.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = matrix_.raw() + i * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

void ExplicitMatrix::adjoint_add(const double* u, double* out) const {
  const std::size_t m = matrix_.dim(0), n = matrix_.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = matrix_.raw() + i * n;
    const double ui = u[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += row[j] * ui;
  }
}

// ------------------------------------------------------------ ForwardModel

ForwardModel::ForwardModel(Shape image_shape, std::vector<ComponentPtr> components)
    : image_shape_(std::move(image_shape)), components_(std::move(components)) {
  if (components_.empty()) throw ConfigError("ForwardModel needs at least one component");
  for (const auto& c : components_) {
    if (!c) throw ConfigError("ForwardModel: null component");
    if (c->image_shape() != image_shape_) {
      throw ShapeError("ForwardModel: component image shape " + shape_to_string(c->image_shape()) +
                       " differs from model image shape " + shape_to_string(image_shape_));
    }
  }
}

bool ForwardModel::all_of_kind(ComponentKind kind) const {
  return std::all_of(components_.begin(), components_.end(), [kind](const auto& c) { return c->kind() == kind; });
}

double MeasurementSet::sum_squares() const {
  double s = 0.0;
  for (const auto& b : blocks) s += sgdnet::sum_squares(b);
  return s;
}

void check_measurements(const ForwardModel& model, const MeasurementSet& y) {
  if (y.blocks.size() != model.size()) {
    throw ShapeError("measurement set has " + std::to_string(y.blocks.size()) + " blocks, model has " +
                     std::to_string(model.size()) + " components");
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (y.blocks[i].size() != model.component(i).output_size()) {
      throw ShapeError("block " + std::to_string(i) + " has shape " + shape_to_string(y.blocks[i].shape()) +
                       ", component expects " + shape_to_string(model.component(i).output_shape()));
    }
  }
}

namespace {

void check_image(const ForwardModel& model, const Tensor& x) {
  if (x.shape() != model.image_shape()) {
    throw ShapeError("image shape " + shape_to_string(x.shape()) + " does not match model image shape " +
                     shape_to_string(model.image_shape()));
  }
}

}  // namespace

MeasurementSet apply(const ForwardModel& model, const Tensor& x) {
  check_image(model, x);
  MeasurementSet y;
  y.blocks.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) y.blocks.push_back(model.component(i).apply(x));
  return y;
}

Tensor adjoint(const ForwardModel& model, const MeasurementSet& y) {
  check_measurements(model, y);
  Tensor out(model.image_shape());
  for (std::size_t i = 0; i < model.size(); ++i) model.component(i).adjoint_add(y.blocks[i].raw(), out.raw());
  return out;
}

std::vector<std::size_t> all_indices(std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return idx;
}

namespace {

void check_indices(const ForwardModel& model, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("minibatch must contain at least one index");
  for (std::size_t i : indices) {
    if (i >= model.size()) {
      throw std::out_of_range("component index " + std::to_string(i) + " out of range for " +
                              std::to_string(model.size()) + " components");
    }
  }
}

}  // namespace

Tensor minibatch_gradient(const Tensor& x, const MeasurementSet& y, const ForwardModel& model,
                          std::span<const std::size_t> indices) {
  check_image(model, x);
  check_measurements(model, y);
  check_indices(model, indices);
  Tensor out(model.image_shape());
  std::vector<double> residual;
  for (std::size_t i : indices) {
    const ComponentOperator& a = model.component(i);
    residual.resize(a.output_size());
    a.apply(x.raw(), residual.data());
    const double* yi = y.blocks[i].raw();
    for (std::size_t k = 0; k < residual.size(); ++k) residual[k] -= yi[k];
    a.adjoint_add(residual.data(), out.raw());
  }
  out *= 1.0 / static_cast<double>(indices.size());
  return out;
}

Tensor full_gradient(const Tensor& x, const MeasurementSet& y, const ForwardModel& model) {
  const auto idx = all_indices(model.size());
  return minibatch_gradient(x, y, model, idx);
}

Tensor minibatch_normal(const Tensor& v, const ForwardModel& model, std::span<const std::size_t> indices) {
  check_image(model, v);
  check_indices(model, indices);
  Tensor out(model.image_shape());
  std::vector<double> tmp;
  for (std::size_t i : indices) {
    const ComponentOperator& a = model.component(i);
    tmp.resize(a.output_size());
    a.apply(v.raw(), tmp.data());
    a.adjoint_add(tmp.data(), out.raw());
  }
  out *= 1.0 / static_cast<double>(indices.size());
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t batch, std::size_t components, Rng& rng) {
  if (batch == 0 || components == 0) throw std::invalid_argument("sample_indices: B and I must be positive");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = rng.index(components);
  return idx;
}

// ------------------------------------------------------------ constructors

std::size_t default_detector_count(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::numbers::sqrt2 * static_cast<double>(n))) + 2;
}

ForwardModel make_radon_model(std::size_t n, std::size_t views, const RadonOptions& options) {
  if (n == 0 || views == 0) throw ConfigError("make_radon_model: size and views must be positive");
  const std::size_t det = options.detectors ? options.detectors : default_detector_count(n);
  Rng jitter(options.jitter_seed);
  std::vector<ForwardModel::ComponentPtr> comps;
  comps.reserve(views);
  for (std::size_t v = 0; v < views; ++v) {
    double angle = std::numbers::pi * static_cast<double>(v) / static_cast<double>(views);
    if (options.angle_jitter_deg > 0.0) angle += options.angle_jitter_deg * std::numbers::pi / 180.0 * jitter.normal();
    comps.push_back(std::make_shared<RadonView>(n, n, angle, det, options.supersample));
  }
  return ForwardModel({n, n}, std::move(comps));
}

ForwardModel make_conv_model(std::size_t n, std::size_t components, std::uint64_t seed, std::size_t kernel_size) {
  if (n == 0 || components == 0) throw ConfigError("make_conv_model: size and components must be positive");
  if (kernel_size % 2 == 0) throw ConfigError("make_conv_model: kernel size must be odd");
  std::vector<ForwardModel::ComponentPtr> comps;
  const auto half = static_cast<double>(kernel_size / 2);
  for (std::size_t i = 0; i < components; ++i) {
    Rng rng(derive_seed(seed, {i}));
    // Gaussian-windowed plane wave: smooth, band-limited, with a random
    // symmetric/antisymmetric mix like absorption and phase transfer functions.
    const double width = rng.uniform(1.0, 2.0);
    const double freq = rng.uniform(0.0, 0.2);
    const double dir = rng.uniform(0.0, std::numbers::pi);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Tensor k({kernel_size, kernel_size});
    double l1 = 0.0;
    for (std::size_t a = 0; a < kernel_size; ++a) {
      for (std::size_t b = 0; b < kernel_size; ++b) {
        const double u = static_cast<double>(a) - half, v = static_cast<double>(b) - half;
        const double env = std::exp(-(u * u + v * v) / (2.0 * width * width));
        const double val =
            env * std::cos(2.0 * std::numbers::pi * freq * (u * std::cos(dir) + v * std::sin(dir)) + phase);
        k[a * kernel_size + b] = val;
        l1 += std::abs(val);
      }
    }
    k *= 1.0 / l1;
    comps.push_back(std::make_shared<ConvFilter>(n, n, std::move(k)));
  }
  return ForwardModel({n, n}, std::move(comps));
}

ForwardModel build_model(const ModelSpec& spec) {
  if (spec.kind == "radon") {
    RadonOptions opt;
    opt.detectors = spec.detectors;
    opt.supersample = spec.supersample;
    opt.angle_jitter_deg = spec.angle_jitter_deg;
    opt.jitter_seed = spec.seed;
    return make_radon_model(spec.size, spec.components, opt);
  }
  if (spec.kind == "conv") return make_conv_model(spec.size, spec.components, spec.seed, spec.kernel_size);
  throw ConfigError("unknown model kind '" + spec.kind + "' (expected radon or conv)");
}

// ---------------------------------------------------------- initialisation

Tensor bp_init(const MeasurementSet& y, const ForwardModel& model) { return adjoint(model, y); }

namespace {

// Spatial taps of the Hann-windowed ramp filter on a zero-padded length
// `period`, obtained from its frequency response by an inverse DFT.
std::vector<double> ramp_hann_taps(std::size_t period) {
  std::vector<double> response(period);
  for (std::size_t k = 0; k < period; ++k) {
    const double f = (k <= period / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(period)) /
                     static_cast<double>(period);
    response[k] = std::abs(f) * 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f));
  }
  std::vector<double> taps(period);
  for (std::size_t n = 0; n < period; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < period; ++k) {
      s += response[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(k * n % period) /
                                  static_cast<double>(period));
    }
    taps[n] = s / static_cast<double>(period);
  }
  return taps;
}

}  // namespace

Tensor fbp_init(const MeasurementSet& y, const ForwardModel& model) {
  if (!model.all_of_kind(ComponentKind::kRadonView)) throw ConfigError("fbp_init requires a radon model");
  check_measurements(model, y);
  Tensor out(model.image_shape());
  std::vector<double> taps;
  std::size_t period = 0;
  std::vector<double> filtered;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const std::size_t d = model.component(i).output_size();
    std::size_t p = 1;
    while (p < 2 * d) p <<= 1;
    if (p != period) {
      period = p;
      taps = ramp_hann_taps(period);
    }
    const double* yi = y.blocks[i].raw();
    filtered.assign(d, 0.0);
    for (std::size_t m = 0; m < d; ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += yi[j] * taps[(m + period - j) % period];
      filtered[m] = s;
    }
    model.component(i).adjoint_add(filtered.data(), out.raw());
  }
  out *= std::numbers::pi / static_cast<double>(model.size());
  return out;
}

// ------------------------------------------------------------------ noise

MeasurementSet add_awgn_to_input_snr(const MeasurementSet& y, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0) return y;
  const double ynorm = std::sqrt(y.sum_squares());
  if (ynorm <= 0.0) throw NumericError("add_awgn_to_input_snr: measurements are all zero");
  MeasurementSet noisy = y;
  std::vector<Tensor> noise;
  double enorm2 = 0.0;
  for (const auto& b : y.blocks) {
    Tensor e(b.shape());
    for (double& v : e.data()) v = rng.normal();
    enorm2 += sgdnet::sum_squares(e);
    noise.push_back(std::move(e));
  }
  const double target = ynorm / std::pow(10.0, snr_db / 20.0);
  const double factor = target / std::sqrt(enorm2);
  for (std::size_t i = 0; i < noise.size(); ++i) axpy(factor, noise[i], noisy.blocks[i]);
  noisy.noise.input_snr_db = snr_db;
  return noisy;
}

// ---------------------------------------------------------------- TV pieces

Tensor discrete_gradient(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("discrete_gradient expects a 2-D image");
  const std::size_t h = x.dim(0), w = x.dim(1);
  Tensor p({2, h, w});
  double* px = p.raw();
  double* py = p.raw() + h * w;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double v = x[i * w + j];
      px[i * w + j] = j + 1 < w ? x[i * w + j + 1] - v : 0.0;
      py[i * w + j] = i + 1 < h ? x[(i + 1) * w + j] - v : 0.0;
    }
  }
  return p;
}

Tensor discrete_gradient_adjoint(const Tensor& p) {
  if (p.rank() != 3 || p.dim(0) != 2) throw ShapeError("discrete_gradient_adjoint expects 2 x H x W");
  const std::size_t h = p.dim(1), w = p.dim(2);
  Tensor x({h, w});
  const double* px = p.raw();
  const double* py = p.raw() + h * w;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double v = 0.0;
      if (j + 1 < w) v -= px[i * w + j];
      if (j > 0) v += px[i * w + j - 1];
      if (i + 1 < h) v -= py[i * w + j];
      if (i > 0) v += py[(i - 1) * w + j];
      x[i * w + j] = v;
    }
  }
  return x;
}

// --------------------------------------------------------------------- I/O

void write_measurements(const std::filesystem::path& dir, const MeasurementSet& y) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["noise"] = {{"input_snr_db", std::isinf(y.noise.input_snr_db) ? nlohmann::json("inf")
                                                                          : nlohmann::json(y.noise.input_snr_db)},
                       {"seed", y.noise.seed}};
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t i = 0; i < y.blocks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "block_%04zu.f64", i);
    write_tensor(dir / name, y.blocks[i]);
    blocks.push_back({{"file", name}, {"shape", y.blocks[i].shape()}});
  }
  manifest["blocks"] = blocks;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

MeasurementSet read_measurements(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad measurement manifest in " + dir.string() + ": " + e.what());
  }
  MeasurementSet y;
  const auto& snr = manifest.at("noise").at("input_snr_db");
  y.noise.input_snr_db = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
  y.noise.seed = manifest.at("noise").at("seed").get<std::uint64_t>();
  for (const auto& b : manifest.at("blocks")) y.blocks.push_back(read_tensor(dir / b.at("file").get<std::string>()));
  return y;
}

}  // namespace sgdnet
