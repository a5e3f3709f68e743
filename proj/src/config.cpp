#include "sgdnet/config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

#include "sgdnet/error.hpp"
#include "sgdnet/tensor_io.hpp"

namespace sgdnet {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects whatever was not consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        out = number(v, key);
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + ": expected a non-negative integer");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
        out.clear();
        for (const auto& e : v) out.push_back(number(e, key));
      } else {
        if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of integers");
        out.clear();
        for (const auto& e : v) {
          if (!e.is_number_unsigned()) throw ConfigError(where(key) + ": expected non-negative integers");
          out.push_back(e.get<typename T::value_type>());
        }
      }
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <class F>
  void get_as(const std::string& key, F&& parse) {
    std::string name;
    if (!j_.contains(key)) return;
    get(key, name);
    parse(name);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

 private:
  std::string where(const std::string& key) const { return path_ + "." + key; }

  double number(const json& v, const std::string& key) const {
    // "inf" is accepted for unbounded values such as a noiseless SNR.
    if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DataMode parse_mode(const std::string& name) {
  if (name == "stochastic") return DataMode::kStochastic;
  if (name == "full-batch") return DataMode::kFullBatch;
  throw ConfigError("unknown unfold mode '" + name + "' (expected stochastic or full-batch)");
}

SampleOrder parse_order(const std::string& name) {
  if (name == "uniform") return SampleOrder::kUniform;
  if (name == "shuffle") return SampleOrder::kShuffle;
  throw ConfigError("unknown sample order '" + name + "' (expected uniform or shuffle)");
}

FitTarget parse_target(const std::string& name) {
  if (name == "clean") return FitTarget::kClean;
  if (name == "residual") return FitTarget::kResidual;
  throw ConfigError("unknown pretrain target '" + name + "' (expected clean or residual)");
}

void read_model(Section s, ModelSpec& m) {
  s.get("kind", m.kind);
  s.get("size", m.size);
  s.get("components", m.components);
  s.get("detectors", m.detectors);
  s.get("supersample", m.supersample);
  s.get("angle_jitter_deg", m.angle_jitter_deg);
  s.get("kernel_size", m.kernel_size);
  s.get("seed", m.seed);
  s.finish();
}

void read_train(Section s, TrainConfig& t) {
  s.get("epochs", t.epochs);
  s.get("iterations", t.iterations);
  s.get_as("schedule", [&](const std::string& n) { t.schedule.kind = parse_schedule_kind(n); });
  s.get("rate", t.schedule.rate);
  s.get("decay_factor", t.schedule.factor);
  s.get("decay_period", t.schedule.period);
  s.get_as("optimizer", [&](const std::string& n) { t.optimizer = parse_optimizer_kind(n); });
  s.get("adam_beta1", t.adam_beta1);
  s.get("adam_beta2", t.adam_beta2);
  s.get("adam_eps", t.adam_eps);
  s.get("clip_norm", t.clip_norm);
  s.get("tau_rate_scale", t.tau_rate_scale);
  s.get("image_batch", t.image_batch);
  s.get_as("order", [&](const std::string& n) { t.order = parse_order(n); });
  s.get("train_theta", t.trainable.theta);
  s.get("train_tau", t.trainable.tau);
  s.get("seed", t.seed);
  s.get("snapshot_period", t.snapshot_period);
  s.get("trace_period", t.trace_period);
  s.finish();
}

json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"iterations", t.iterations},
          {"schedule", to_string(t.schedule.kind)},
          {"rate", t.schedule.rate},
          {"decay_factor", t.schedule.factor},
          {"decay_period", t.schedule.period},
          {"optimizer", to_string(t.optimizer)},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"clip_norm", t.clip_norm},
          {"tau_rate_scale", t.tau_rate_scale},
          {"image_batch", t.image_batch},
          {"order", t.order == SampleOrder::kShuffle ? "shuffle" : "uniform"},
          {"train_theta", t.trainable.theta},
          {"train_tau", t.trainable.tau},
          {"seed", t.seed},
          {"snapshot_period", t.snapshot_period},
          {"trace_period", t.trace_period}};
}

json model_json(const ModelSpec& m) {
  return {{"kind", m.kind},
          {"size", m.size},
          {"components", m.components},
          {"detectors", m.detectors},
          {"supersample", m.supersample},
          {"angle_jitter_deg", m.angle_jitter_deg},
          {"kernel_size", m.kernel_size},
          {"seed", m.seed}};
}

json number_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

void check_model(const ModelSpec& m) {
  if (m.kind != "radon" && m.kind != "conv") throw ConfigError("problem.model.kind must be radon or conv");
  if (m.size < 2) throw ConfigError("problem.model.size must be at least 2");
  if (m.components == 0) throw ConfigError("problem.model.components must be at least 1");
  if (m.supersample == 0) throw ConfigError("problem.model.supersample must be at least 1");
  if (m.kind == "conv" && m.kernel_size % 2 == 0) throw ConfigError("problem.model.kernel_size must be odd");
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  problem.model.supersample = 3;
  unfold.unfold.steps = 8;
  unfold.unfold.gamma = 5e-3;
  unfold.unfold.minibatch = 10;

  train.epochs = 6;
  train.optimizer = OptimizerKind::kAdam;
  train.schedule.rate = 5e-4;
  train.order = SampleOrder::kShuffle;
  train.seed = 6;

  pretrain.train.epochs = 60;
  pretrain.train.optimizer = OptimizerKind::kAdam;
  pretrain.train.schedule.rate = 1e-3;
  pretrain.train.order = SampleOrder::kShuffle;
  pretrain.train.seed = 4;

  baselines.denoiser = pretrain.train;
  baselines.denoiser.seed = 5;
}

void validate(const ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  check_model(p.model);
  if (!(p.snr_db > 0.0)) throw ConfigError("problem.snr_db must be positive (or \"inf\")");
  if (p.train_count == 0) throw ConfigError("problem.train_count must be at least 1");
  if (p.init == InitKind::kFbp && p.model.kind != "radon") throw ConfigError("problem.init fbp requires a radon model");
  validate(cfg.unfold.unfold, p.model.components);
  if (!std::isfinite(cfg.unfold.tau)) throw ConfigError("unfold.tau must be finite");
  if (cfg.unfold.net.hidden == 0 || cfg.unfold.net.kernel % 2 == 0) {
    throw ConfigError("unfold.hidden must be positive and unfold.kernel odd");
  }
  validate(cfg.train);
  validate(cfg.pretrain.train);
  validate(cfg.baselines.denoiser);
  for (double t : cfg.baselines.tv_taus) {
    if (!(t >= 0.0)) throw ConfigError("baselines.tv_taus must be non-negative");
  }
  if (cfg.baselines.tv_taus.empty()) throw ConfigError("baselines.tv_taus must not be empty");
  if (!(cfg.baselines.denoiser_sigma > 0.0)) throw ConfigError("baselines.denoiser_sigma must be positive");

  const auto& th = cfg.theory;
  check_model(th.problem.model);
  if (th.problem.samples == 0 || th.problem.steps == 0) {
    throw ConfigError("theory.samples and theory.steps must be at least 1");
  }
  if (!(th.problem.gamma > 0.0) || !(th.problem.rate > 0.0)) {
    throw ConfigError("theory.gamma and theory.rate must be positive");
  }
  if (th.batches.empty() || th.iterations.empty() || th.seeds == 0) {
    throw ConfigError("theory.batches, theory.iterations and theory.seeds must be non-empty");
  }
  for (std::size_t b : th.batches) {
    if (b == 0 || b > th.problem.model.components) throw ConfigError("theory.batches must lie in [1, I]");
  }
  for (std::size_t b : th.variance_batches) {
    if (b == 0) throw ConfigError("theory.variance_batches must be positive");
  }
  for (std::size_t k : th.iterations) {
    if (k == 0) throw ConfigError("theory.iterations must be positive");
  }
  if (th.variance_draws < 2) throw ConfigError("theory.variance_draws must be at least 2");
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section s(root, "config");
  if (s.has("problem")) {
    Section p = s.sub("problem");
    auto& pc = cfg.problem;
    if (p.has("model")) read_model(p.sub("model"), pc.model);
    p.get("snr_db", pc.snr_db);
    p.get("train_count", pc.train_count);
    p.get("test_count", pc.test_count);
    p.get("train_seed", pc.train_seed);
    p.get("test_seed", pc.test_seed);
    p.get_as("init", [&](const std::string& n) { pc.init = parse_init_kind(n); });
    p.finish();
  }
  if (s.has("unfold")) {
    Section u = s.sub("unfold");
    auto& uc = cfg.unfold;
    u.get("steps", uc.unfold.steps);
    u.get("gamma", uc.unfold.gamma);
    u.get("minibatch", uc.unfold.minibatch);
    u.get_as("mode", [&](const std::string& n) { uc.unfold.mode = parse_mode(n); });
    u.get("seed", uc.unfold.seed);
    u.get("tau", uc.tau);
    u.get("hidden", uc.net.hidden);
    u.get("kernel", uc.net.kernel);
    u.get("init_gain", uc.init_gain);
    u.get("net_seed", uc.net_seed);
    u.finish();
  }
  if (s.has("train")) read_train(s.sub("train"), cfg.train);
  if (s.has("pretrain")) {
    Section p = s.sub("pretrain");
    p.get("enabled", cfg.pretrain.enabled);
    p.get_as("target", [&](const std::string& n) { cfg.pretrain.target = parse_target(n); });
    if (p.has("train")) read_train(p.sub("train"), cfg.pretrain.train);
    p.finish();
  }
  if (s.has("baselines")) {
    Section b = s.sub("baselines");
    auto& bc = cfg.baselines;
    b.get("tv_taus", bc.tv_taus);
    b.get("tv_iterations", bc.tv_iterations);
    b.get("tv_inner", bc.tv_inner);
    b.get("tv_tune_images", bc.tv_tune_images);
    b.get("red_tau", bc.red_tau);
    b.get("red_iterations", bc.red_iterations);
    b.get("denoiser_sigma", bc.denoiser_sigma);
    if (b.has("denoiser")) read_train(b.sub("denoiser"), bc.denoiser);
    b.finish();
  }
  if (s.has("theory")) {
    Section t = s.sub("theory");
    auto& tc = cfg.theory;
    auto& tp = tc.problem;
    if (t.has("model")) read_model(t.sub("model"), tp.model);
    t.get("samples", tp.samples);
    t.get("snr_db", tp.snr_db);
    t.get("data_seed", tp.data_seed);
    t.get("hidden", tp.net.hidden);
    t.get("kernel", tp.net.kernel);
    t.get("init_gain", tp.init_gain);
    t.get("tau", tp.tau);
    t.get("steps", tp.steps);
    t.get("gamma", tp.gamma);
    t.get("rate", tp.rate);
    t.get("trace_points", tp.trace_points);
    t.get("batches", tc.batches);
    t.get("iterations", tc.iterations);
    t.get("seeds", tc.seeds);
    t.get("root_seed", tc.root_seed);
    t.get("probes", tc.probes);
    t.get("variance_batches", tc.variance_batches);
    t.get("variance_draws", tc.variance_draws);
    t.get("variance_tolerance_se", tc.variance_tolerance_se);
    t.get("unbiasedness_tolerance", tc.unbiasedness_tolerance);
    t.get("b_tolerance", tc.b_tolerance);
    t.finish();
  }
  if (s.has("paths")) {
    Section p = s.sub("paths");
    p.get("train_data", cfg.paths.train_data);
    p.get("test_data", cfg.paths.test_data);
    p.get("warm_start", cfg.paths.warm_start);
    p.get("out", cfg.paths.out);
    p.finish();
  }
  s.finish();
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string config_to_json(const ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  const auto& u = cfg.unfold;
  const auto& b = cfg.baselines;
  const auto& t = cfg.theory;
  json j;
  j["problem"] = {{"model", model_json(p.model)},
                  {"snr_db", number_json(p.snr_db)},
                  {"train_count", p.train_count},
                  {"test_count", p.test_count},
                  {"train_seed", p.train_seed},
                  {"test_seed", p.test_seed},
                  {"init", to_string(p.init)}};
  j["unfold"] = {{"steps", u.unfold.steps},
                 {"gamma", u.unfold.gamma},
                 {"minibatch", u.unfold.minibatch},
                 {"mode", u.unfold.mode == DataMode::kFullBatch ? "full-batch" : "stochastic"},
                 {"seed", u.unfold.seed},
                 {"tau", u.tau},
                 {"hidden", u.net.hidden},
                 {"kernel", u.net.kernel},
                 {"init_gain", u.init_gain},
                 {"net_seed", u.net_seed}};
  j["train"] = train_json(cfg.train);
  j["pretrain"] = {{"enabled", cfg.pretrain.enabled},
                   {"target", cfg.pretrain.target == FitTarget::kClean ? "clean" : "residual"},
                   {"train", train_json(cfg.pretrain.train)}};
  j["baselines"] = {{"tv_taus", b.tv_taus},
                    {"tv_iterations", b.tv_iterations},
                    {"tv_inner", b.tv_inner},
                    {"tv_tune_images", b.tv_tune_images},
                    {"red_tau", b.red_tau},
                    {"red_iterations", b.red_iterations},
                    {"denoiser_sigma", b.denoiser_sigma},
                    {"denoiser", train_json(b.denoiser)}};
  j["theory"] = {{"model", model_json(t.problem.model)},
                 {"samples", t.problem.samples},
                 {"snr_db", number_json(t.problem.snr_db)},
                 {"data_seed", t.problem.data_seed},
                 {"hidden", t.problem.net.hidden},
                 {"kernel", t.problem.net.kernel},
                 {"init_gain", t.problem.init_gain},
                 {"tau", t.problem.tau},
                 {"steps", t.problem.steps},
                 {"gamma", t.problem.gamma},
                 {"rate", t.problem.rate},
                 {"trace_points", t.problem.trace_points},
                 {"batches", t.batches},
                 {"iterations", t.iterations},
                 {"seeds", t.seeds},
                 {"root_seed", t.root_seed},
                 {"probes", t.probes},
                 {"variance_batches", t.variance_batches},
                 {"variance_draws", t.variance_draws},
                 {"variance_tolerance_se", t.variance_tolerance_se},
                 {"unbiasedness_tolerance", t.unbiasedness_tolerance},
                 {"b_tolerance", t.b_tolerance}};
  j["paths"] = {{"train_data", cfg.paths.train_data},
                {"test_data", cfg.paths.test_data},
                {"warm_start", cfg.paths.warm_start},
                {"out", cfg.paths.out}};
  return j.dump(2) + "\n";
}

DatasetSpec dataset_spec(const ProblemConfig& problem, bool test) {
  DatasetSpec d;
  d.model = problem.model;
  d.count = test ? problem.test_count : problem.train_count;
  d.snr_db = problem.snr_db;
  d.seed = test ? problem.test_seed : problem.train_seed;
  return d;
}

}  // namespace sgdnet
