#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgdnet/rng.hpp"
#include "sgdnet/tensor.hpp"

namespace sgdnet {

enum class ComponentKind { kRadonView, kConvFilter, kExplicitMatrix };

std::string to_string(ComponentKind kind);

/// One linear measurement operator A_i together with its exact adjoint.
/// Immutable after construction; safe to share between threads.
class ComponentOperator {
 public:
  ComponentOperator(Shape image_shape, Shape output_shape)
      : image_shape_(std::move(image_shape)), output_shape_(std::move(output_shape)) {}
  virtual ~ComponentOperator() = default;

  virtual ComponentKind kind() const = 0;

  const Shape& image_shape() const { return image_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::size_t image_size() const { return shape_numel(image_shape_); }
  std::size_t output_size() const { return shape_numel(output_shape_); }

  // out = A x, overwriting `out`.
  virtual void apply(const double* x, double* out) const = 0;
  // out += A^H u.
  virtual void adjoint_add(const double* u, double* out) const = 0;

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& u) const;

 private:
  Shape image_shape_;
  Shape output_shape_;
};

/// A single parallel-beam projection view.
///
/// Pixel-driven: each pixel (optionally split into s x s sub-pixels of
/// weight 1/s^2) is projected onto the detector axis t = x cos(a) + y sin(a)
/// and splatted onto the two nearest detector bins with linear weights. Pixel
/// and detector pitch are 1, both grids are centred on the rotation axis.
/// The adjoint is the transpose of exactly this discretisation.
class RadonView final : public ComponentOperator {
 public:
  RadonView(std::size_t rows, std::size_t cols, double angle_rad, std::size_t detectors,
            std::size_t supersample = 1);

  ComponentKind kind() const override { return ComponentKind::kRadonView; }
  using ComponentOperator::apply;
  void apply(const double* x, double* out) const override;
  void adjoint_add(const double* u, double* out) const override;

  double angle() const { return angle_; }
  std::size_t detectors() const { return detectors_; }
  std::size_t supersample() const { return supersample_; }

 private:
  template <typename Visit>
  void for_each_splat(Visit&& visit) const;

  std::size_t rows_, cols_;
  double angle_;
  std::size_t detectors_;
  std::size_t supersample_;
  std::vector<double> subpixel_shift_;  // detector-axis offset of each sub-pixel
};

/// Same-size 2-D convolution with a real odd-sized kernel and zero borders.
/// The adjoint is correlation with the same kernel.
class ConvFilter final : public ComponentOperator {
 public:
  ConvFilter(std::size_t rows, std::size_t cols, Tensor kernel);

  ComponentKind kind() const override { return ComponentKind::kConvFilter; }
  using ComponentOperator::apply;
  void apply(const double* x, double* out) const override;
  void adjoint_add(const double* u, double* out) const override;

  const Tensor& kernel() const { return kernel_; }

 private:
  Tensor kernel_;
  Tensor flipped_;
};

/// Dense m x n matrix acting on the flattened image.
class ExplicitMatrix final : public ComponentOperator {
 public:
  ExplicitMatrix(Tensor matrix, Shape image_shape);

  ComponentKind kind() const override { return ComponentKind::kExplicitMatrix; }
  using ComponentOperator::apply;
  void apply(const double* x, double* out) const override;
  void adjoint_add(const double* u, double* out) const override;

  const Tensor& matrix() const { return matrix_; }

 private:
  Tensor matrix_;
};

/// Ordered collection A = [A_1, ..., A_I] over a shared image shape.
class ForwardModel {
 public:
  using ComponentPtr = std::shared_ptr<const ComponentOperator>;

  ForwardModel(Shape image_shape, std::vector<ComponentPtr> components);

  std::size_t size() const { return components_.size(); }
  const ComponentOperator& component(std::size_t i) const { return *components_.at(i); }
  const Shape& image_shape() const { return image_shape_; }
  bool all_of_kind(ComponentKind kind) const;

 private:
  Shape image_shape_;
  std::vector<ComponentPtr> components_;
};

struct NoiseInfo {
  double input_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

/// Measurement blocks y_i aligned with the model components.
struct MeasurementSet {
  std::vector<Tensor> blocks;
  NoiseInfo noise;

  double sum_squares() const;
};

// Throws ShapeError unless block i has component i's output shape.
void check_measurements(const ForwardModel& model, const MeasurementSet& y);

MeasurementSet apply(const ForwardModel& model, const Tensor& x);
// sum_i A_i^H y_i
Tensor adjoint(const ForwardModel& model, const MeasurementSet& y);

// (1/I) sum_i A_i^H (A_i x - y_i)
Tensor full_gradient(const Tensor& x, const MeasurementSet& y, const ForwardModel& model);

// (1/B) sum_b A_{i_b}^H (A_{i_b} x - y_{i_b}); 0-based indices, duplicates allowed.
Tensor minibatch_gradient(const Tensor& x, const MeasurementSet& y, const ForwardModel& model,
                          std::span<const std::size_t> indices);

// (1/B) sum_b A_{i_b}^H A_{i_b} v, the Jacobian of minibatch_gradient.
Tensor minibatch_normal(const Tensor& v, const ForwardModel& model, std::span<const std::size_t> indices);

std::vector<std::size_t> all_indices(std::size_t count);

// B i.i.d. uniform draws from {0, ..., I-1}, with replacement.
std::vector<std::size_t> sample_indices(std::size_t batch, std::size_t components, Rng& rng);

struct RadonOptions {
  std::size_t detectors = 0;  // 0: ceil(sqrt(2) n) + 2
  std::size_t supersample = 1;
  double angle_jitter_deg = 0.0;  // std-dev of Gaussian view-angle perturbation
  std::uint64_t jitter_seed = 0;
};

std::size_t default_detector_count(std::size_t n);

// `views` equispaced angles over [0, 180) degrees on an n x n image.
ForwardModel make_radon_model(std::size_t n, std::size_t views, const RadonOptions& options = {});

// `components` seeded band-limited real kernels (IDT-like stand-in).
ForwardModel make_conv_model(std::size_t n, std::size_t components, std::uint64_t seed,
                             std::size_t kernel_size = 7);

Tensor bp_init(const MeasurementSet& y, const ForwardModel& model);

// Hann-windowed ramp filter per view, then (pi / I) * adjoint.
Tensor fbp_init(const MeasurementSet& y, const ForwardModel& model);

// Adds Gaussian noise scaled so 20 log10(|y| / |e|) equals snr_db exactly.
// An infinite snr_db returns y unchanged.
MeasurementSet add_awgn_to_input_snr(const MeasurementSet& y, double snr_db, Rng& rng);

// Forward differences along columns (plane 0) and rows (plane 1) with a
// replicate boundary: the last column/row of each plane is zero. Output 2 x H x W.
Tensor discrete_gradient(const Tensor& x);
Tensor discrete_gradient_adjoint(const Tensor& p);

/// Serializable recipe for a model, as found in JSON configs.
struct ModelSpec {
  std::string kind = "radon";  // radon | conv
  std::size_t size = 32;
  std::size_t components = 60;
  std::size_t detectors = 0;
  std::size_t supersample = 1;
  double angle_jitter_deg = 0.0;
  std::size_t kernel_size = 7;
  std::uint64_t seed = 0;
};

ForwardModel build_model(const ModelSpec& spec);

void write_measurements(const std::filesystem::path& dir, const MeasurementSet& y);
MeasurementSet read_measurements(const std::filesystem::path& dir);

}  // namespace sgdnet
