// unfold-sgd: dataset synthesis, training, reconstruction, theory checks and
// timing for stochastic unfolded reconstruction.
//
// Exit codes: 2 bad arguments/config, 3 I/O, 4 divergence, 5 checkpoint or
// method mismatch, 6 tolerance failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgdnet/config.hpp"
#include "sgdnet/experiment.hpp"
#include "sgdnet/parallel.hpp"
#include "sgdnet/tensor_io.hpp"
#include "sgdnet/theory.hpp"

namespace fs = std::filesystem;
using namespace sgdnet;

namespace {

constexpr int kExitArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitTolerance = 6;

struct ToleranceFailure : Error {
  using Error::Error;
};

std::size_t worker_count(std::size_t jobs) {
  jobs = std::max<std::size_t>(jobs, 1);
  if (std::getenv("UNFOLD_SGD_THREADS")) jobs = std::min(jobs, env_worker_count());
  return jobs;
}

double parse_snr(const std::string& s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("--snr-db: expected a number or inf, got '" + s + "'");
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void save_run(const fs::path& dir, const Checkpoint& ckpt, const TrainTrace& trace) {
  save_checkpoint(dir, ckpt);
  write_text(dir / "trace.csv", trace.to_csv());
}

TrainTrace concat(TrainTrace head, const TrainTrace& tail) {
  head.rows.insert(head.rows.end(), tail.rows.begin(), tail.rows.end());
  return head;
}

void print_loss_summary(const char* what, const TrainResult& r) {
  std::fprintf(stderr, "%s: %zu iterations, last loss %.6g, tau %.6g\n", what, r.checkpoint.iteration,
               r.checkpoint.last_loss, r.checkpoint.net.tau());
}

// ------------------------------------------------------------------ gen-data

struct GenDataArgs {
  std::string kind = "radon";
  std::size_t size = 32;
  std::size_t components = 60;
  std::size_t count = 1;
  std::string snr = "30";
  std::uint64_t seed = 0;
  std::size_t supersample = 3;
  std::size_t detectors = 0;
  std::size_t kernel_size = 7;
  std::uint64_t model_seed = 0;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  DatasetSpec spec;
  spec.model.kind = a.kind;
  spec.model.size = a.size;
  spec.model.components = a.components;
  spec.model.supersample = a.supersample;
  spec.model.detectors = a.detectors;
  spec.model.kernel_size = a.kernel_size;
  spec.model.seed = a.model_seed;
  spec.count = a.count;
  spec.snr_db = parse_snr(a.snr);
  spec.seed = a.seed;
  if (spec.count == 0) throw ConfigError("--count must be at least 1");
  const ForwardModel model = build_model(spec.model);
  write_dataset(a.out, spec, model);
  std::fprintf(stderr, "wrote %zu samples to %s\n", spec.count, a.out.c_str());
  return 0;
}

// -------------------------------------------------------------- pretrain/train

struct TrainArgs {
  std::string config;
  std::string out;
  std::string warm_start;
  std::string resume;
  std::optional<std::size_t> minibatch;
  std::optional<std::string> mode;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> stop_at;
  bool denoiser = false;
  std::size_t jobs = 1;
};

ExperimentConfig load_for_training(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.minibatch) cfg.unfold.unfold.minibatch = *a.minibatch;
  if (a.mode) {
    if (*a.mode != "stochastic" && *a.mode != "full-batch") throw ConfigError("--mode: stochastic or full-batch");
    cfg.unfold.unfold.mode = *a.mode == "full-batch" ? DataMode::kFullBatch : DataMode::kStochastic;
  }
  if (a.steps) cfg.unfold.unfold.steps = *a.steps;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (!a.warm_start.empty()) cfg.paths.warm_start = a.warm_start;
  validate(cfg);
  return cfg;
}

int run_pretrain_cmd(const TrainArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (a.epochs) (a.denoiser ? cfg.baselines.denoiser : cfg.pretrain.train).epochs = *a.epochs;
  validate(cfg);
  ProblemData problem = load_problem(cfg);
  ensure_dir(a.out);
  if (a.denoiser) {
    std::vector<Tensor> clean;
    for (const auto& s : problem.train.samples) clean.push_back(s.truth);
    TrainResult r = train_denoiser(clean, cfg.baselines.denoiser_sigma, initial_net(cfg), cfg.baselines.denoiser);
    save_run(a.out, r.checkpoint, r.trace);
    print_loss_summary("denoiser", r);
    return 0;
  }
  TrainHooks hooks;
  hooks.workers = worker_count(a.jobs);
  TrainResult r = run_pretrain(cfg, problem.train, hooks);
  save_run(a.out, r.checkpoint, r.trace);
  print_loss_summary("pretrain", r);
  return 0;
}

void check_unfold_match(const Checkpoint& c, const UnfoldConfig& u) {
  const auto& cu = c.unfold;
  if (cu.steps != u.steps || cu.gamma != u.gamma || cu.mode != u.mode ||
      (u.mode == DataMode::kStochastic && cu.minibatch != u.minibatch)) {
    throw CheckpointMismatch("resume checkpoint was trained with a different unfolding (Q, gamma, B or mode)");
  }
}

int run_train_cmd(const TrainArgs& a) {
  const ExperimentConfig cfg = load_for_training(a);
  ProblemData problem = load_problem(cfg);
  const UnfoldConfig& unfold = cfg.unfold.unfold;
  ensure_dir(a.out);

  Checkpoint start;
  TrainTrace before;
  if (!a.resume.empty()) {
    start = load_checkpoint(a.resume);
    if (start.method != "sgdnet" && start.method != "ured") {
      throw CheckpointMismatch("cannot resume unfolded training from a '" + start.method + "' checkpoint");
    }
    check_unfold_match(start, unfold);
    if (start.seed != cfg.train.seed) throw CheckpointMismatch("resume checkpoint has a different training seed");
    if (fs::exists(fs::path(a.resume) / "trace.csv")) {
      before = TrainTrace::from_csv(read_text(fs::path(a.resume) / "trace.csv"));
      std::erase_if(before.rows, [&](const TraceRow& r) { return r.iteration >= start.iteration; });
    }
  } else {
    PriorNet net = initial_net(cfg);
    if (!cfg.paths.warm_start.empty()) {
      Checkpoint warm = load_checkpoint(cfg.paths.warm_start);
      if (warm.method == "denoiser") throw CheckpointMismatch("a denoiser checkpoint cannot warm-start training");
      if (warm.net.spec() != cfg.unfold.net) throw CheckpointMismatch("warm start network has a different layout");
      net = warm.net;
    }
    net.set_tau(cfg.unfold.tau);
    start = initial_checkpoint(net, cfg.train, unfold);
  }

  TrainHooks hooks;
  hooks.workers = worker_count(a.jobs);
  if (a.stop_at) hooks.stop_at_iteration = *a.stop_at;
  hooks.on_snapshot = [&](const Checkpoint& c, const TrainTrace& t) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%08zu", c.iteration);
    save_run(fs::path(a.out) / "snapshots" / name, c, concat(before, t));
  };
  try {
    TrainResult r = train_unfolded(problem.train, problem.model, start, unfold, cfg.train, hooks);
    save_run(a.out, r.checkpoint, concat(before, r.trace));
    print_loss_summary(r.checkpoint.method.c_str(), r);
  } catch (const TrainingDiverged& e) {
    save_run(fs::path(a.out) / "last_good", e.last_good(), concat(before, e.trace()));
    throw;
  }
  return 0;
}

// -------------------------------------------------------------- reconstruct

struct ReconstructArgs {
  std::string method;
  std::string ckpt;
  std::string input;
  std::string out;
  std::string config;
  std::optional<std::size_t> test_b;
  std::optional<std::string> mode;
  std::string init = "auto";
  std::optional<double> tv_tau;
  std::optional<double> red_tau;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

int run_reconstruct(const ReconstructArgs& a) {
  static const std::vector<std::string> methods{"sgdnet", "ured", "tv", "red", "fbp", "bp"};
  if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) {
    throw ConfigError("--method must be one of sgdnet, ured, tv, red, fbp, bp");
  }
  const bool unfolded = a.method == "sgdnet" || a.method == "ured";
  const bool needs_ckpt = unfolded || a.method == "red";
  if (needs_ckpt && a.ckpt.empty()) throw ConfigError("--ckpt is required for method " + a.method);
  if (!needs_ckpt && !a.ckpt.empty()) throw CheckpointMismatch("method " + a.method + " does not use a checkpoint");
  if (a.mode && *a.mode != "stochastic" && *a.mode != "full-batch") {
    throw ConfigError("--mode: stochastic or full-batch");
  }
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);

  // Probe the manifest for the model kind before choosing the initialiser.
  const fs::path input(a.input);
  InitKind init = InitKind::kBackprojection;
  if (a.init == "auto") {
    LoadedDataset probe = read_dataset(input, InitKind::kBackprojection);
    init = probe.spec.model.kind == "radon" ? InitKind::kFbp : InitKind::kBackprojection;
  } else {
    init = parse_init_kind(a.init);
  }
  if (a.method == "fbp") init = InitKind::kFbp;
  if (a.method == "bp") init = InitKind::kBackprojection;
  LoadedDataset data = read_dataset(input, init);
  const ForwardModel model = build_model(data.spec.model);
  data.data.check(model);
  const std::size_t workers = worker_count(a.jobs);

  std::vector<Tensor> images;
  if (unfolded) {
    Checkpoint c = load_checkpoint(a.ckpt);
    if (c.method != "sgdnet" && c.method != "ured") {
      throw CheckpointMismatch("method " + a.method + " needs an unfolded-network checkpoint, got '" + c.method + "'");
    }
    UnfoldConfig u = c.unfold;
    if (a.method == "ured") {
      u.mode = DataMode::kFullBatch;
    } else {
      u.mode = a.mode ? (*a.mode == "full-batch" ? DataMode::kFullBatch : DataMode::kStochastic)
                      : DataMode::kStochastic;
      if (a.test_b) u.minibatch = *a.test_b;
    }
    images = reconstruct_unfolded(data.data, model, c.net, u, a.seed, workers);
  } else if (a.method == "red") {
    Checkpoint c = load_checkpoint(a.ckpt);
    if (c.method != "denoiser") {
      throw CheckpointMismatch("method red needs a denoiser checkpoint, got '" + c.method + "'");
    }
    BaselineSection b = cfg.baselines;
    if (a.red_tau) b.red_tau = *a.red_tau;
    images = reconstruct_red(data.data, model, c.net, b, workers);
  } else if (a.method == "tv") {
    double tau = a.tv_tau ? *a.tv_tau : cfg.baselines.tv_taus.front();
    images = reconstruct_tv(data.data, model, tau, cfg.baselines, workers);
  } else {
    images = initial_images(data.data);
  }

  ensure_dir(a.out);
  for (std::size_t j = 0; j < images.size(); ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "recon_%04zu.f64", j);
    write_tensor(fs::path(a.out) / name, images[j]);
  }
  const MetricReport report = score(images, data.data);
  write_text(fs::path(a.out) / "metrics.csv", metrics_csv(a.method, report));
  const Summary s = report.snr_summary();
  std::fprintf(stderr, "%s: mean SNR %.3f dB (median %.3f, std %.3f), mean SSIM %.4f over %zu images\n",
               a.method.c_str(), s.mean, s.median, s.stddev, report.ssim_summary().mean, images.size());
  return 0;
}

// ------------------------------------------------------------------- theory

struct TheoryArgs {
  std::string check;
  std::string config;
  std::string out;
  std::vector<std::size_t> batches;
  std::vector<std::size_t> iterations;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> draws;
  std::size_t jobs = 1;
};

Dataset theory_dataset(const TheorySection& t, const ForwardModel& model) {
  DatasetSpec ds;
  ds.model = t.problem.model;
  ds.count = t.problem.samples;
  ds.snr_db = t.problem.snr_db;
  ds.seed = t.problem.data_seed;
  return synthesize_dataset(ds, model,
                            t.problem.model.kind == "radon" ? InitKind::kFbp : InitKind::kBackprojection);
}

std::vector<Tensor> theory_probes(const TheorySection& t) {
  std::vector<Tensor> probes;
  for (std::size_t p = 0; p < t.probes; ++p) {
    Rng rng(derive_seed(t.root_seed, {0x50524f4245ULL, p}));
    probes.push_back(make_phantom(t.problem.model.size, rng));
  }
  return probes;
}

void emit(const std::string& out_dir, const std::string& name, const std::string& csv) {
  if (out_dir.empty()) {
    std::cout << csv;
  } else {
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / name, csv);
  }
}

int run_theory(const TheoryArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  TheorySection t = cfg.theory;
  if (!a.batches.empty()) t.batches = a.batches;
  if (!a.iterations.empty()) t.iterations = a.iterations;
  if (a.seeds) t.seeds = *a.seeds;
  if (a.draws) t.variance_draws = *a.draws;
  cfg.theory = t;
  validate(cfg);
  const std::size_t workers = worker_count(a.jobs);
  const ForwardModel model = build_model(t.problem.model);
  char buf[256];
  bool ok = true;

  if (a.check == "unbiasedness") {
    const Dataset data = theory_dataset(t, model);
    auto r = check_phi_unbiasedness(model, data.samples[0].y, theory_probes(t), t.unbiasedness_tolerance);
    std::string csv = "probe,deviation\n";
    for (std::size_t p = 0; p < r.deviation.size(); ++p) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", p, r.deviation[p]);
      csv += buf;
    }
    emit(a.out, "unbiasedness.csv", csv);
    ok = r.passed();
    std::fprintf(stderr, "unbiasedness: max deviation %.3g (tolerance %.3g) -> %s\n", r.max_deviation, r.tolerance,
                 ok ? "pass" : "FAIL");
  } else if (a.check == "variance") {
    const Dataset data = theory_dataset(t, model);
    auto r = check_variance_scaling(model, data.samples[0].y, theory_probes(t), t.variance_batches, t.variance_draws,
                                    t.root_seed, t.variance_tolerance_se);
    std::string csv = "probe,B,sigma_sq,expected,monte_carlo,standard_error,z\n";
    for (const auto& row : r.rows) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.6f\n", row.probe, row.batch, row.sigma_sq,
                    row.expected, row.monte_carlo, row.standard_error, row.z_score());
      csv += buf;
    }
    emit(a.out, "variance.csv", csv);
    ok = r.passed();
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, std::abs(row.z_score()));
    std::fprintf(stderr, "variance: worst |z| %.3f over %zu rows (tolerance %.1f SE) -> %s\n", worst, r.rows.size(),
                 r.tolerance_se, ok ? "pass" : "FAIL");
  } else if (a.check == "assumption3") {
    const Dataset data = theory_dataset(t, model);
    const PriorNet net =
        PriorNet::random(t.problem.net, derive_seed(t.root_seed, {0x4e4554ULL, 0}), t.problem.tau, t.problem.init_gain);
    UnfoldConfig u;
    u.steps = t.problem.steps;
    u.gamma = t.problem.gamma;
    u.minibatch = t.batches.front();
    auto r = check_training_gradient_unbiasedness(data, model, net, u, t.unbiasedness_tolerance);
    std::snprintf(buf, sizeof buf, "deviation,epsilon_sq\n%.17g,%.17g\n", r.deviation, r.epsilon_sq);
    emit(a.out, "assumption3.csv", buf);
    ok = r.passed();
    std::fprintf(stderr, "assumption3: deviation %.3g, epsilon^2 %.6g -> %s\n", r.deviation, r.epsilon_sq,
                 ok ? "pass" : "FAIL");
  } else if (a.check == "theorem1") {
    Theorem1Result r = theorem1_sweep(t.problem, t.batches, t.iterations, t.seeds, t.root_seed, workers);
    r.summary = summarize_theorem1(r.runs, t.b_tolerance);
    emit(a.out, "theorem1_summary.csv", r.summary_csv());
    if (!a.out.empty()) {
      for (const auto& run : r.runs) {
        std::snprintf(buf, sizeof buf, "theorem1_B%zu_K%zu_s%zu.csv", run.batch, run.iterations, run.seed_index);
        write_text(fs::path(a.out) / buf, run.to_csv());
      }
    }
    for (const auto& line : r.summary.checks) std::fprintf(stderr, "%s\n", line.c_str());
    for (const auto& run : r.runs) {
      if (run.diverged) std::fprintf(stderr, "run B=%zu K=%zu s=%zu diverged: %s\n", run.batch, run.iterations,
                                     run.seed_index, run.note.c_str());
    }
    // Trend checks need at least two K values or two B values to say anything.
    ok = r.summary.k_trend_ok && r.summary.b_trend_ok;
  } else {
    throw ConfigError("--check must be unbiasedness, variance, assumption3 or theorem1");
  }
  if (!ok) throw ToleranceFailure("theory check '" + a.check + "' failed");
  return 0;
}

// -------------------------------------------------------------------- bench

struct BenchArgs {
  std::string config;
  std::string ckpt;
  std::string out;
  std::vector<std::size_t> batches{8, 16, 32};
  std::size_t repeats = 3;
  std::size_t forward_images = 10;
  bool no_epoch = false;
};

int run_bench(const BenchArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  if (a.batches.empty()) throw ConfigError("--minibatch-sizes must not be empty");
  ProblemData problem = load_problem(cfg);
  PriorNet net = initial_net(cfg);
  if (!a.ckpt.empty()) {
    Checkpoint c = load_checkpoint(a.ckpt);
    if (c.method == "denoiser") throw CheckpointMismatch("bench needs an unfolded or pretrained network");
    net = c.net;
  }
  BenchOptions o;
  o.batches = a.batches;
  o.repeats = a.repeats;
  o.forward_images = a.forward_images;
  o.time_epochs = !a.no_epoch;
  const std::string csv = bench_csv(bench_minibatch(cfg, problem, net, o));
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_text(a.out, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic unfolded reconstruction: data, training, reconstruction, theory checks and timing"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "synthesize phantoms, measurements and initialisations");
  g->add_option("--kind", gen.kind, "radon or conv")->check(CLI::IsMember({"radon", "conv"}));
  g->add_option("--size", gen.size, "image side N");
  g->add_option("--components", gen.components, "number of components I");
  g->add_option("--count", gen.count, "number of samples M")->required();
  g->add_option("--snr-db", gen.snr, "input SNR in dB, or inf");
  g->add_option("--seed", gen.seed);
  g->add_option("--supersample", gen.supersample, "radon sub-pixel splitting per axis");
  g->add_option("--detectors", gen.detectors, "radon detector bins (0: automatic)");
  g->add_option("--kernel-size", gen.kernel_size, "conv kernel size");
  g->add_option("--model-seed", gen.model_seed, "conv kernel seed");
  g->add_option("--out", gen.out)->required();

  TrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "fit the artifact-removal network on the initialisations");
  p->add_option("--config", pre.config)->required()->check(CLI::ExistingFile);
  p->add_option("--out", pre.out)->required();
  p->add_option("--epochs", pre.epochs);
  p->add_flag("--denoiser", pre.denoiser, "train the AWGN denoiser used by method red instead");
  p->add_option("--jobs", pre.jobs);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the unfolded network end to end");
  t->add_option("--config", tr.config)->required()->check(CLI::ExistingFile);
  t->add_option("--out", tr.out)->required();
  t->add_option("--warm-start", tr.warm_start, "checkpoint directory (overrides paths.warm_start)");
  t->add_option("--resume", tr.resume, "snapshot directory to continue from");
  t->add_option("--minibatch", tr.minibatch, "B");
  t->add_option("--mode", tr.mode, "stochastic or full-batch");
  t->add_option("--steps", tr.steps, "Q");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--stop-at", tr.stop_at, "stop after this many iterations (for interrupted runs)");
  t->add_option("--jobs", tr.jobs);

  ReconstructArgs rc;
  auto* r = app.add_subcommand("reconstruct", "reconstruct a dataset and score it");
  r->add_option("--method", rc.method, "sgdnet, ured, tv, red, fbp or bp")->required();
  r->add_option("--ckpt", rc.ckpt);
  r->add_option("--input", rc.input, "dataset directory")->required();
  r->add_option("--out", rc.out)->required();
  r->add_option("--config", rc.config, "config for baseline settings")->check(CLI::ExistingFile);
  r->add_option("--test-B", rc.test_b, "minibatch size at test time");
  r->add_option("--mode", rc.mode, "stochastic or full-batch (sgdnet)");
  r->add_option("--init", rc.init, "auto, bp or fbp");
  r->add_option("--tv-tau", rc.tv_tau);
  r->add_option("--red-tau", rc.red_tau);
  r->add_option("--seed", rc.seed, "seed of the test-time minibatch draws");
  r->add_option("--jobs", rc.jobs);

  TheoryArgs th;
  auto* h = app.add_subcommand("theory", "unbiasedness, variance and convergence checks");
  h->add_option("--check", th.check)
      ->required()
      ->check(CLI::IsMember({"unbiasedness", "variance", "assumption3", "theorem1"}));
  h->add_option("--config", th.config)->check(CLI::ExistingFile);
  h->add_option("--out", th.out, "directory for CSV output (default: stdout)");
  h->add_option("--batches", th.batches)->delimiter(',');
  h->add_option("--iterations", th.iterations)->delimiter(',');
  h->add_option("--seeds", th.seeds);
  h->add_option("--draws", th.draws, "Monte-Carlo draws for the variance check");
  h->add_option("--jobs", th.jobs);

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "wall-clock per minibatch size");
  b->add_option("--config", be.config)->check(CLI::ExistingFile);
  b->add_option("--ckpt", be.ckpt);
  b->add_option("--out", be.out, "CSV file (default: stdout)");
  b->add_option("--minibatch-sizes", be.batches)->delimiter(',');
  b->add_option("--repeats", be.repeats);
  b->add_option("--forward-images", be.forward_images);
  b->add_flag("--no-epoch", be.no_epoch, "skip epoch timing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitArgs;
  }

  try {
    if (*g) return run_gen_data(gen);
    if (*p) return run_pretrain_cmd(pre);
    if (*t) return run_train_cmd(tr);
    if (*r) return run_reconstruct(rc);
    if (*h) return run_theory(th);
    if (*b) return run_bench(be);
  } catch (const TrainingDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const CheckpointMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const ToleranceFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitTolerance;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArgs;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
