#include "sgdnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"
#include "sgdnet/error.hpp"
#include "sgdnet/tensor_io.hpp"

namespace sgdnet {

Tensor make_phantom(std::size_t n, Rng& rng, const PhantomOptions& options) {
  if (n == 0 || options.min_shapes > options.max_shapes) throw ConfigError("make_phantom: bad options");
  Tensor img({n, n});
  const std::size_t shapes =
      options.min_shapes + rng.index(options.max_shapes - options.min_shapes + 1);
  const std::size_t sub = 4;
  const double pitch = 2.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < shapes; ++s) {
    const bool blob = rng.uniform() < options.blob_fraction;
    const double cx = rng.uniform(-0.6, 0.6), cy = rng.uniform(-0.6, 0.6);
    const double amp = rng.uniform(options.min_intensity, options.max_intensity);
    if (blob) {
      const double sigma = rng.uniform(0.08, 0.3);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          const double x = -1.0 + (static_cast<double>(c) + 0.5) * pitch - cx;
          const double y = 1.0 - (static_cast<double>(r) + 0.5) * pitch - cy;
          img[r * n + c] += amp * std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
        }
      }
    } else {
      const double a = rng.uniform(0.1, 0.45), b = rng.uniform(0.1, 0.45);
      const double phi = rng.uniform(0.0, std::numbers::pi);
      const double cp = std::cos(phi), sp = std::sin(phi);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          std::size_t inside = 0;
          for (std::size_t u = 0; u < sub; ++u) {
            for (std::size_t v = 0; v < sub; ++v) {
              const double x = -1.0 + (static_cast<double>(c) + (v + 0.5) / sub) * pitch - cx;
              const double y = 1.0 - (static_cast<double>(r) + (u + 0.5) / sub) * pitch - cy;
              const double xr = cp * x + sp * y, yr = -sp * x + cp * y;
              if ((xr * xr) / (a * a) + (yr * yr) / (b * b) <= 1.0) ++inside;
            }
          }
          img[r * n + c] += amp * static_cast<double>(inside) / static_cast<double>(sub * sub);
        }
      }
    }
  }
  for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::string to_string(InitKind kind) { return kind == InitKind::kFbp ? "fbp" : "bp"; }

InitKind parse_init_kind(const std::string& name) {
  if (name == "bp") return InitKind::kBackprojection;
  if (name == "fbp") return InitKind::kFbp;
  throw ConfigError("unknown initialisation '" + name + "' (expected bp or fbp)");
}

Tensor make_init(InitKind kind, const MeasurementSet& y, const ForwardModel& model) {
  return kind == InitKind::kFbp ? fbp_init(y, model) : bp_init(y, model);
}

void Dataset::check(const ForwardModel& model) const {
  if (samples.empty()) throw ConfigError("dataset is empty");
  for (const auto& s : samples) {
    if (s.truth.shape() != model.image_shape() || s.init.shape() != model.image_shape()) {
      throw ShapeError("dataset image shape does not match model " + shape_to_string(model.image_shape()));
    }
    check_measurements(model, s.y);
  }
}

namespace {

Sample make_sample(const DatasetSpec& spec, const ForwardModel& model, std::size_t j, MeasurementSet* clean_out) {
  Rng phantom_rng(derive_seed(spec.seed, {j, 1}));
  Sample s;
  s.truth = make_phantom(spec.model.size, phantom_rng);
  MeasurementSet clean = apply(model, s.truth);
  const std::uint64_t noise_seed = derive_seed(spec.seed, {j, 2});
  Rng noise_rng(noise_seed);
  s.y = add_awgn_to_input_snr(clean, spec.snr_db, noise_rng);
  s.y.noise.seed = noise_seed;
  if (clean_out) *clean_out = std::move(clean);
  return s;
}

std::string sample_dir(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04zu", j);
  return buf;
}

nlohmann::json model_json(const ModelSpec& m) {
  return {{"kind", m.kind},
          {"size", m.size},
          {"components", m.components},
          {"detectors", m.detectors},
          {"supersample", m.supersample},
          {"angle_jitter_deg", m.angle_jitter_deg},
          {"kernel_size", m.kernel_size},
          {"seed", m.seed}};
}

ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  m.kind = j.at("kind").get<std::string>();
  m.size = j.at("size").get<std::size_t>();
  m.components = j.at("components").get<std::size_t>();
  m.detectors = j.at("detectors").get<std::size_t>();
  m.supersample = j.at("supersample").get<std::size_t>();
  m.angle_jitter_deg = j.at("angle_jitter_deg").get<double>();
  m.kernel_size = j.at("kernel_size").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

}  // namespace

Dataset synthesize_dataset(const DatasetSpec& spec, const ForwardModel& model, InitKind init) {
  if (spec.count == 0) throw ConfigError("dataset count must be at least 1");
  Dataset d;
  for (std::size_t j = 0; j < spec.count; ++j) {
    Sample s = make_sample(spec, model, j, nullptr);
    s.init = make_init(init, s.y, model);
    d.samples.push_back(std::move(s));
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSpec& spec, const ForwardModel& model) {
  if (spec.count == 0) throw ConfigError("dataset count must be at least 1");
  const bool radon = model.all_of_kind(ComponentKind::kRadonView);
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["problem"] = model_json(spec.model);
  manifest["count"] = spec.count;
  manifest["snr_db"] = std::isinf(spec.snr_db) ? nlohmann::json("inf") : nlohmann::json(spec.snr_db);
  manifest["seed"] = spec.seed;
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t j = 0; j < spec.count; ++j) {
    MeasurementSet clean;
    Sample s = make_sample(spec, model, j, &clean);
    const std::filesystem::path sd = dir / sample_dir(j);
    write_tensor(sd / "truth.f64", s.truth);
    write_measurements(sd / "clean", clean);
    write_measurements(sd / "noisy", s.y);
    write_tensor(sd / "init_bp.f64", bp_init(s.y, model));
    if (radon) write_tensor(sd / "init_fbp.f64", fbp_init(s.y, model));

    nlohmann::json checks;
    checks["truth.f64"] = file_checksum(sd / "truth.f64");
    checks["init_bp.f64"] = file_checksum(sd / "init_bp.f64");
    if (radon) checks["init_fbp.f64"] = file_checksum(sd / "init_fbp.f64");
    std::string noisy_sum;
    for (std::size_t i = 0; i < s.y.blocks.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "block_%04zu.f64", i);
      noisy_sum += file_checksum(sd / "noisy" / name);
    }
    checks["noisy"] = noisy_sum.substr(0, 16);
    double e2 = 0.0;
    for (std::size_t i = 0; i < clean.blocks.size(); ++i) e2 += sum_squares(s.y.blocks[i] - clean.blocks[i]);
    const double realised = e2 > 0.0 ? 10.0 * std::log10(clean.sum_squares() / e2) : 0.0;
    samples.push_back({{"id", j},
                       {"dir", sample_dir(j)},
                       {"noise_seed", s.y.noise.seed},
                       {"realized_snr_db", e2 > 0.0 ? nlohmann::json(realised) : nlohmann::json("inf")},
                       {"checksums", checks}});
  }
  manifest["samples"] = samples;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

LoadedDataset read_dataset(const std::filesystem::path& dir, InitKind init) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad dataset manifest in " + dir.string() + ": " + e.what());
  }
  LoadedDataset out;
  try {
    if (manifest.at("schema_version").get<int>() != 1) throw IoError("unsupported dataset schema_version");
    out.spec.model = model_from_json(manifest.at("problem"));
    out.spec.count = manifest.at("count").get<std::size_t>();
    const auto& snr = manifest.at("snr_db");
    out.spec.snr_db = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
    out.spec.seed = manifest.at("seed").get<std::uint64_t>();
    const std::string init_name = init == InitKind::kFbp ? "init_fbp.f64" : "init_bp.f64";
    for (const auto& s : manifest.at("samples")) {
      const std::filesystem::path sd = dir / s.at("dir").get<std::string>();
      if (!std::filesystem::exists(sd / init_name)) {
        throw ConfigError("dataset has no " + to_string(init) + " initialisation (" + (sd / init_name).string() + ")");
      }
      Sample sample;
      sample.truth = read_tensor(sd / "truth.f64");
      sample.y = read_measurements(sd / "noisy");
      sample.init = read_tensor(sd / init_name);
      out.data.samples.push_back(std::move(sample));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset manifest in " + dir.string() + ": " + e.what());
  }
  return out;
}

}  // namespace sgdnet
