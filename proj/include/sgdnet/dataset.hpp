#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgdnet/forward_model.hpp"
#include "sgdnet/rng.hpp"

namespace sgdnet {

struct PhantomOptions {
  std::size_t min_shapes = 3;
  std::size_t max_shapes = 8;
  double min_intensity = 0.2;
  double max_intensity = 1.0;
  double blob_fraction = 0.5;  // share of Gaussian blobs among the shapes
};

/// Random composition of ellipses (area-antialiased) and Gaussian blobs on a
/// zero background, clipped to [0, 1].
Tensor make_phantom(std::size_t n, Rng& rng, const PhantomOptions& options = {});

enum class InitKind { kBackprojection, kFbp };

std::string to_string(InitKind kind);
InitKind parse_init_kind(const std::string& name);

Tensor make_init(InitKind kind, const MeasurementSet& y, const ForwardModel& model);

struct Sample {
  Tensor truth;
  MeasurementSet y;
  Tensor init;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  // Throws ShapeError/ConfigError when empty or inconsistent with the model.
  void check(const ForwardModel& model) const;
};

struct DatasetSpec {
  ModelSpec model;
  std::size_t count = 1;
  double snr_db = 30.0;
  std::uint64_t seed = 0;
};

/// Phantoms, noisy measurements and initialisations. Sample j draws its
/// phantom and noise from streams derived from (seed, j), so samples do not
/// depend on the count.
Dataset synthesize_dataset(const DatasetSpec& spec, const ForwardModel& model, InitKind init);

/// Layout: manifest.json plus sample_NNNN/{truth.f64, clean/, noisy/,
/// init_bp.f64[, init_fbp.f64]}; the manifest lists FNV checksums.
void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec, const ForwardModel& model);

struct LoadedDataset {
  DatasetSpec spec;
  Dataset data;
};

LoadedDataset read_dataset(const std::filesystem::path& dir, InitKind init);

}  // namespace sgdnet
