#include "sgdnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "sgdnet/ops.hpp"
#include "sgdnet/parallel.hpp"
#include "sgdnet/tensor_io.hpp"

namespace sgdnet {

Var mse_loss(Var prediction, Var target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("mse_loss: shape mismatch " + shape_to_string(prediction.shape()) + " vs " +
                     shape_to_string(target.shape()));
  }
  return sum_squares(sub(prediction, target));
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = prediction[i] - target[i];
    s += d * d;
  }
  return s;
}

// ----------------------------------------------------------------- schedules

double Schedule::eta(std::size_t k, std::size_t total) const {
  switch (kind) {
    case Kind::kConstant:
      return rate;
    case Kind::kInverseSqrt:
      return rate / std::sqrt(static_cast<double>(std::max<std::size_t>(total, 1)));
    case Kind::kStepDecay:
      return rate * std::pow(factor, static_cast<double>(k / std::max<std::size_t>(period, 1)));
  }
  return rate;
}

std::string to_string(Schedule::Kind kind) {
  switch (kind) {
    case Schedule::Kind::kConstant:
      return "constant";
    case Schedule::Kind::kInverseSqrt:
      return "inverse-sqrt";
    case Schedule::Kind::kStepDecay:
      return "step-decay";
  }
  return "constant";
}

Schedule::Kind parse_schedule_kind(const std::string& name) {
  if (name == "constant") return Schedule::Kind::kConstant;
  if (name == "inverse-sqrt") return Schedule::Kind::kInverseSqrt;
  if (name == "step-decay") return Schedule::Kind::kStepDecay;
  throw ConfigError("unknown schedule '" + name + "' (expected constant, inverse-sqrt or step-decay)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.schedule.rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (cfg.schedule.kind == Schedule::Kind::kStepDecay &&
      (!(cfg.schedule.factor > 0.0) || cfg.schedule.period == 0)) {
    throw ConfigError("train: step decay needs a positive factor and period");
  }
  if (cfg.image_batch == 0) throw ConfigError("train: image batch must be at least 1");
  if (cfg.clip_norm < 0.0) throw ConfigError("train: clip norm must be non-negative");
  if (!(cfg.tau_rate_scale >= 0.0)) throw ConfigError("train: tau rate scale must be non-negative");
}

// ---------------------------------------------------------------- checkpoint

Checkpoint initial_checkpoint(const PriorNet& net, const TrainConfig& cfg, const UnfoldConfig& unfold,
                              std::string method) {
  Checkpoint c;
  c.net = net;
  c.method = std::move(method);
  c.unfold = unfold;
  c.seed = cfg.seed;
  c.rng_state = Rng(cfg.seed).state();
  return c;
}

namespace {

nlohmann::json number_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw IoError("bad number '" + s + "' in checkpoint");
  }
  return j.get<double>();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / "theta.f64", c.net.theta());
  if (!c.optimizer.m.empty()) {
    write_tensor(dir / "adam_m.f64", c.optimizer.m);
    write_tensor(dir / "adam_v.f64", c.optimizer.v);
  }
  nlohmann::json j;
  j["schema_version"] = 1;
  j["method"] = c.method;
  j["spec_hash"] = c.net.spec_hash();
  j["hidden"] = c.net.spec().hidden;
  j["kernel"] = c.net.spec().kernel;
  j["tau"] = c.net.tau();
  j["steps"] = c.unfold.steps;
  j["gamma"] = c.unfold.gamma;
  j["minibatch"] = c.unfold.minibatch;
  j["mode"] = c.unfold.mode == DataMode::kFullBatch ? "full-batch" : "stochastic";
  j["unfold_seed"] = c.unfold.seed;
  j["seed"] = c.seed;
  j["iteration"] = c.iteration;
  j["epoch"] = c.epoch;
  j["rng_state"] = c.rng_state;
  j["optimizer_steps"] = c.optimizer.steps;
  j["last_loss"] = number_json(c.last_loss);
  j["best_loss"] = number_json(c.best_loss);
  write_text(dir / "checkpoint.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(dir / "checkpoint.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint in " + dir.string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    PriorNetSpec spec{j.at("hidden").get<std::size_t>(), j.at("kernel").get<std::size_t>()};
    c.net = PriorNet(spec, j.at("tau").get<double>());
    if (c.net.spec_hash() != j.at("spec_hash").get<std::string>()) {
      throw CheckpointMismatch("checkpoint layer spec hash does not match its layer sizes");
    }
    c.net.set_theta(read_tensor(dir / "theta.f64"));
    c.method = j.at("method").get<std::string>();
    c.unfold.steps = j.at("steps").get<std::size_t>();
    c.unfold.gamma = j.at("gamma").get<double>();
    c.unfold.minibatch = j.at("minibatch").get<std::size_t>();
    c.unfold.mode = j.at("mode").get<std::string>() == "full-batch" ? DataMode::kFullBatch : DataMode::kStochastic;
    c.unfold.seed = j.at("unfold_seed").get<std::uint64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<std::size_t>();
    c.epoch = j.at("epoch").get<std::size_t>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.optimizer.steps = j.at("optimizer_steps").get<std::size_t>();
    c.last_loss = number_from_json(j.at("last_loss"));
    c.best_loss = number_from_json(j.at("best_loss"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint in " + dir.string() + ": " + e.what());
  }
  if (std::filesystem::exists(dir / "adam_m.f64")) {
    c.optimizer.m = read_tensor(dir / "adam_m.f64");
    c.optimizer.v = read_tensor(dir / "adam_v.f64");
  }
  return c;
}

// ------------------------------------------------------------------- updates

ParamUpdate sgd_update(const Tensor& theta, double tau, const Tensor& grad_theta, double grad_tau, double eta) {
  if (!(eta > 0.0)) throw ConfigError("sgd_update: learning rate must be positive");
  require_same_shape(theta, grad_theta, "sgd_update");
  if (!grad_theta.all_finite() || !std::isfinite(grad_tau)) {
    throw NumericError("sgd_update: non-finite gradient");
  }
  ParamUpdate out{theta, tau - eta * grad_tau};
  axpy(-eta, grad_theta, out.theta);
  return out;
}

SampleGradient sample_gradient(const Sample& sample, const ForwardModel& model, const PriorNet& net,
                               const UnfoldConfig& unfold, const IndexDraws& draws, Trainable trainable) {
  UnfoldOutput out = sgdnet_forward_with_draws(sample.init, sample.y, model, net, unfold, draws, trainable);
  Var loss = mse_loss(out.output, out.tape->constant(sample.truth));
  SampleGradient g;
  g.loss = loss.value().item();
  g.theta = Tensor({net.parameter_count()});
  if (!trainable.theta && !trainable.tau) return g;
  Gradients grads = out.tape->backward(loss);
  if (trainable.theta) g.theta = theta_gradient(grads, out.vars);
  if (trainable.tau) g.tau = grads.of(out.vars.tau).item();
  return g;
}

ObjectiveGradient full_objective_gradient(const Dataset& data, const ForwardModel& model, const PriorNet& net,
                                          const UnfoldConfig& unfold, Trainable trainable, std::size_t workers) {
  data.check(model);
  UnfoldConfig full = unfold;
  full.mode = DataMode::kFullBatch;
  const IndexDraws draws(full.steps);
  std::vector<SampleGradient> per(data.size());
  parallel_for(data.size(), workers, [&](std::size_t j) {
    per[j] = sample_gradient(data.samples[j], model, net, full, draws, trainable);
  });
  ObjectiveGradient out;
  out.theta = Tensor({net.parameter_count()});
  for (const auto& g : per) {
    out.value += g.loss;
    out.theta += g.theta;
    out.tau += g.tau;
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  out.value *= inv;
  out.theta *= inv;
  out.tau *= inv;
  return out;
}

// --------------------------------------------------------------------- trace

std::vector<std::pair<std::size_t, double>> TrainTrace::grad_norms() const {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& r : rows) {
    if (!std::isnan(r.grad_norm_sq_full)) out.emplace_back(r.iteration, r.grad_norm_sq_full);
  }
  return out;
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainTrace::to_csv() const {
  std::ostringstream os;
  os << "iteration,epoch,loss,eta,grad_norm_sq_full,wallclock_ms\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.epoch << ',' << csv_number(r.loss) << ',' << csv_number(r.eta) << ','
       << csv_number(r.grad_norm_sq_full) << ',' << csv_number(r.wallclock_ms) << '\n';
  }
  return os.str();
}

TrainTrace TrainTrace::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "iteration,epoch,loss,eta,grad_norm_sq_full,wallclock_ms") {
    throw IoError("trace CSV: unexpected header");
  }
  auto field = [](const std::string& f) { return f.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(f); };
  TrainTrace t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 6) throw IoError("trace CSV: expected 6 fields in '" + line + "'");
    try {
      TraceRow r;
      r.iteration = std::stoull(f[0]);
      r.epoch = std::stoull(f[1]);
      r.loss = field(f[2]);
      r.eta = field(f[3]);
      r.grad_norm_sq_full = field(f[4]);
      r.wallclock_ms = field(f[5]);
      t.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("trace CSV: malformed row '" + line + "'");
    }
  }
  return t;
}

TrainingDiverged::TrainingDiverged(const std::string& what, Checkpoint last_good, double last_finite_loss,
                                   TrainTrace trace)
    : NumericError(what),
      last_good_(std::make_shared<Checkpoint>(std::move(last_good))),
      last_finite_loss_(last_finite_loss),
      trace_(std::make_shared<TrainTrace>(std::move(trace))) {}

// ---------------------------------------------------------------- main loop

namespace {

using GradientFn = std::function<SampleGradient(std::size_t j, std::size_t k, std::size_t slot, const PriorNet& net)>;
using TraceFn = std::function<double(const PriorNet& net)>;

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kPhiStream = 0x504849ULL;

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t m) {
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {kShuffleStream, epoch}));
  for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  return perm;
}

void apply_update(Checkpoint& c, const TrainConfig& cfg, Tensor g_theta, double g_tau, double eta) {
  const std::size_t p = c.net.parameter_count();
  if (cfg.clip_norm > 0.0) {
    const double n = std::sqrt(sum_squares(g_theta) + g_tau * g_tau);
    if (n > cfg.clip_norm) {
      g_theta *= cfg.clip_norm / n;
      g_tau *= cfg.clip_norm / n;
    }
  }
  const double tau_eta_scale = cfg.tau_rate_scale;
  if (cfg.optimizer == OptimizerKind::kSgd) {
    ParamUpdate u = sgd_update(c.net.theta(), c.net.tau(), g_theta, tau_eta_scale * g_tau, eta);
    c.net.set_theta(std::move(u.theta));
    c.net.set_tau(u.tau);
    return;
  }
  if (!g_theta.all_finite() || !std::isfinite(g_tau)) throw NumericError("non-finite gradient");
  auto& st = c.optimizer;
  if (st.m.empty()) {
    st.m = Tensor({p + 1});
    st.v = Tensor({p + 1});
  }
  ++st.steps;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.steps));
  Tensor theta = c.net.theta();
  for (std::size_t i = 0; i <= p; ++i) {
    const double g = i < p ? g_theta[i] : g_tau;
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
    const double step = eta * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.adam_eps);
    if (i < p) {
      theta[i] -= step;
    } else {
      c.net.set_tau(c.net.tau() - tau_eta_scale * step);
    }
  }
  c.net.set_theta(std::move(theta));
}

TrainResult run_training(std::size_t m, const GradientFn& grad_fn, const TraceFn& trace_fn, const Checkpoint& start,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (m == 0) throw ConfigError("train: dataset is empty");
  const std::size_t per_epoch = (m + cfg.image_batch - 1) / cfg.image_batch;
  const std::size_t total = cfg.iterations ? cfg.iterations : cfg.epochs * per_epoch;

  TrainResult result;
  Checkpoint& c = result.checkpoint;
  c = start;
  c.seed = cfg.seed;
  Rng rng(cfg.seed);
  if (!start.rng_state.empty()) rng.restore(start.rng_state);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> perm;
  std::size_t perm_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> js(cfg.image_batch);

  for (std::size_t k = c.iteration; k < total; ++k) {
    if (hooks.stop_at_iteration && k >= hooks.stop_at_iteration) break;
    TraceRow row;
    row.iteration = k;
    row.epoch = k / per_epoch;
    if (trace_fn && cfg.trace_period && k % cfg.trace_period == 0) row.grad_norm_sq_full = trace_fn(c.net);
    row.eta = cfg.schedule.eta(k, total);

    for (std::size_t b = 0; b < cfg.image_batch; ++b) {
      if (cfg.order == SampleOrder::kUniform) {
        js[b] = rng.index(m);
      } else {
        if (perm_epoch != row.epoch) {
          perm = epoch_permutation(cfg.seed, row.epoch, m);
          perm_epoch = row.epoch;
        }
        js[b] = perm[((k % per_epoch) * cfg.image_batch + b) % m];
      }
    }

    double loss = 0.0, g_tau = 0.0;
    Tensor g_theta({c.net.parameter_count()});
    for (std::size_t b = 0; b < cfg.image_batch; ++b) {
      SampleGradient g = grad_fn(js[b], k, b, c.net);
      loss += g.loss;
      g_theta += g.theta;
      g_tau += g.tau;
    }
    const double inv = 1.0 / static_cast<double>(cfg.image_batch);
    loss *= inv;
    g_theta *= inv;
    g_tau *= inv;

    if (!std::isfinite(loss) || !g_theta.all_finite() || !std::isfinite(g_tau)) {
      char msg[160];
      std::snprintf(msg, sizeof msg, "training diverged at iteration %zu (last finite loss %.6g)", k, c.last_loss);
      throw TrainingDiverged(msg, c, c.last_loss, result.trace);
    }
    apply_update(c, cfg, std::move(g_theta), g_tau, row.eta);

    c.iteration = k + 1;
    c.epoch = c.iteration / per_epoch;
    c.rng_state = rng.state();
    c.last_loss = loss;
    c.best_loss = std::min(c.best_loss, loss);

    row.loss = loss;
    row.wallclock_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.trace.rows.push_back(row);
    if (hooks.on_snapshot && cfg.snapshot_period && c.iteration % cfg.snapshot_period == 0) hooks.on_snapshot(c, result.trace);
  }
  return result;
}

}  // namespace

TrainResult train_unfolded(const Dataset& data, const ForwardModel& model, const Checkpoint& start,
                           const UnfoldConfig& unfold, const TrainConfig& cfg, const TrainHooks& hooks) {
  data.check(model);
  validate(unfold, model.size());
  auto grad_fn = [&](std::size_t j, std::size_t k, std::size_t slot, const PriorNet& net) {
    IndexDraws draws(unfold.steps);
    if (unfold.mode == DataMode::kStochastic) {
      Rng phi(derive_seed(cfg.seed, {kPhiStream, k, slot}));
      draws = draw_indices(unfold, model.size(), phi);
    }
    return sample_gradient(data.samples[j], model, net, unfold, draws, cfg.trainable);
  };
  auto trace_fn = [&](const PriorNet& net) {
    return full_objective_gradient(data, model, net, unfold, cfg.trainable, hooks.workers).norm_sq();
  };
  Checkpoint begin = start;
  begin.unfold = unfold;
  begin.method = unfold.mode == DataMode::kFullBatch ? "ured" : "sgdnet";
  return run_training(data.size(), grad_fn, trace_fn, begin, cfg, hooks);
}

TrainResult fit_prior(std::size_t count, const PairSource& pairs, const Checkpoint& start, const TrainConfig& cfg,
                      FitTarget target, const TrainHooks& hooks) {
  auto grad_fn = [&](std::size_t j, std::size_t k, std::size_t slot, const PriorNet& net) {
    ImagePair pair = pairs(j, k, slot);
    require_same_shape(pair.input, pair.target, "fit_prior");
    Tape tape;
    NetVars vars = bind(tape, net, true, false);
    Var x = tape.constant(pair.input);
    Var out = target == FitTarget::kClean ? r_theta(vars, x) : d_theta(vars, x);
    Var loss = mse_loss(out, tape.constant(pair.target));
    SampleGradient g;
    g.loss = loss.value().item();
    g.theta = theta_gradient(tape.backward(loss), vars);
    return g;
  };
  return run_training(count, grad_fn, {}, start, cfg, hooks);
}

TrainResult fit_prior(const std::vector<ImagePair>& pairs, const Checkpoint& start, const TrainConfig& cfg,
                      FitTarget target, const TrainHooks& hooks) {
  return fit_prior(
      pairs.size(), [&](std::size_t j, std::size_t, std::size_t) { return pairs[j]; }, start, cfg, target, hooks);
}

TrainResult pretrain_artifact_removal(const Dataset& data, const PriorNet& net, const TrainConfig& cfg,
                                      FitTarget target) {
  if (data.samples.empty()) throw ConfigError("pretrain: dataset is empty");
  std::vector<ImagePair> pairs;
  for (const auto& s : data.samples) pairs.push_back({s.init, s.truth});
  return fit_prior(pairs, initial_checkpoint(net, cfg, {}, "pretrain"), cfg, target);
}

}  // namespace sgdnet
