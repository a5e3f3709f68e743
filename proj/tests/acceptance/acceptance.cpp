// Acceptance gate. Each criterion prints one PASS/FAIL line; the exit status
// is non-zero when any selected criterion fails.
//
//   acceptance --group fast|theorem1|quality|cost|all [--out DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sgdnet/baselines.hpp"
#include "sgdnet/config.hpp"
#include "sgdnet/experiment.hpp"
#include "sgdnet/grad_check.hpp"
#include "sgdnet/ops.hpp"
#include "sgdnet/parallel.hpp"
#include "sgdnet/tensor_io.hpp"
#include "sgdnet/theory.hpp"

namespace fs = std::filesystem;
using namespace sgdnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

void run(int id, const std::string& name, const std::function<Outcome()>& fn) {
  try {
    report(id, name, fn());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// ------------------------------------------------------------------ fast

Outcome adjoint_identities() {
  const auto t0 = Clock::now();
  Rng rng(101);
  Tensor dense = random_tensor({200, 256}, rng);
  std::vector<std::pair<std::string, ForwardModel>> models;
  RadonOptions radon;
  radon.supersample = 2;
  models.emplace_back("radon", make_radon_model(24, 30, radon));
  models.emplace_back("conv", make_conv_model(32, 8, 102));
  models.emplace_back("matrix", ForwardModel({16, 16}, {std::make_shared<ExplicitMatrix>(dense, Shape{16, 16})}));
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, model] : models) {
    double w = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto& op = model.component(rng.index(model.size()));
      Tensor x = random_tensor(op.image_shape(), rng);
      Tensor u = random_tensor(op.output_shape(), rng);
      Tensor ax = op.apply(x);
      const double gap = std::abs(dot(ax, u) - dot(x, op.adjoint(u)));
      w = std::max(w, gap / (norm(ax) * norm(u)));
    }
    worst = std::max(worst, w);
    detail += fmt("%s %.2e, ", name.c_str(), w);
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0,
          fmt("worst relative gap: %stol 1e-10; %.2f s (limit 10 s)", detail.c_str(), secs)};
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  DatasetSpec ds;
  ds.model.size = 8;
  ds.model.components = 6;
  ds.count = 3;
  ds.snr_db = 30.0;
  ds.seed = 201;
  const ForwardModel model = build_model(ds.model);
  const Dataset data = synthesize_dataset(ds, model, InitKind::kFbp);
  const PriorNet net = PriorNet::random({}, 202, 0.8, 1.0);
  UnfoldConfig cfg;
  cfg.steps = 3;
  cfg.gamma = 0.05;
  cfg.minibatch = 2;
  Rng rng(203);
  std::vector<IndexDraws> draws;
  for (std::size_t j = 0; j < data.size(); ++j) draws.push_back(draw_indices(cfg, model.size(), rng));

  std::vector<ParamBlock> params;
  const auto infos = net.blocks();
  for (std::size_t b = 0; b < infos.size(); ++b) params.push_back({infos[b].name, net.block(b)});
  params.push_back({"tau", Tensor::scalar(net.tau())});

  auto loss = [&](Tape& tape, const std::vector<Var>& v) {
    NetVars vars;
    vars.spec = net.spec();
    vars.blocks.assign(v.begin(), v.end() - 1);
    vars.tau = v.back();
    Var total = tape.constant(Tensor::scalar(0.0));
    for (std::size_t j = 0; j < data.size(); ++j) {
      const Sample& s = data.samples[j];
      Unrolled u = unroll(vars, tape.constant(s.init), s.y, model, cfg.gamma, draws[j]);
      total = add(total, sum_squares(sub(u.output, tape.constant(s.truth))));
    }
    return scale(total, 1.0 / static_cast<double>(data.size()));
  };
  GradCheckReport r = grad_check(loss, params, 1e-6, 1e-5);
  std::string worst_block;
  double worst = 0.0;
  for (const auto& b : r.blocks) {
    if (b.max_rel_error >= worst) {
      worst = b.max_rel_error;
      worst_block = b.name;
    }
  }
  const double secs = seconds_since(t0);
  return {r.passed() && secs < 60.0,
          fmt("max relative error %.2e in block %s over %zu blocks (tol 1e-5); %.1f s (limit 60 s)", worst,
              worst_block.c_str(), r.blocks.size(), secs)};
}

Outcome batch_equivalence() {
  const ForwardModel model = make_radon_model(16, 20);
  Rng rng(301);
  std::size_t equal = 0;
  for (int c = 0; c < 20; ++c) {
    const PriorNet net = PriorNet::random({}, 302 + c, rng.uniform(0.0, 5.0), rng.uniform(0.2, 1.5));
    UnfoldConfig cfg;
    cfg.steps = 1 + rng.index(8);
    cfg.gamma = rng.uniform(1e-3, 5e-2);
    cfg.mode = DataMode::kFullBatch;
    cfg.record_iterates = true;
    Rng img(303 + c);
    Tensor truth = make_phantom(16, img);
    MeasurementSet y = add_awgn_to_input_snr(apply(model, truth), 30.0, img);
    Tensor x0 = fbp_init(y, model);
    Rng draws(304 + c);
    UnfoldOutput a = sgdnet_forward(x0, y, model, net, cfg, draws);
    UnfoldOutput b = ured_forward(x0, y, model, net, cfg);
    if (a.final_image == b.final_image && a.iterates == b.iterates) ++equal;
  }
  return {equal == 20, fmt("%zu of 20 random (theta, tau, gamma, Q) configurations bit-identical", equal)};
}

struct TheoryFixture {
  ForwardModel model;
  MeasurementSet y;
  std::vector<Tensor> probes;
};

TheoryFixture theory_fixture() {
  TheoryFixture f{make_radon_model(16, 20), {}, {}};
  Rng rng(401);
  f.y = add_awgn_to_input_snr(apply(f.model, make_phantom(16, rng)), 30.0, rng);
  for (int p = 0; p < 5; ++p) f.probes.push_back(make_phantom(16, rng));
  return f;
}

Outcome unbiasedness() {
  const TheoryFixture f = theory_fixture();
  const auto r = check_phi_unbiasedness(f.model, f.y, f.probes, 1e-12);
  return {r.passed(), fmt("max ||mean_i g_i - grad g|| = %.2e over %zu probes on 16x16, I=20 (tol 1e-12)",
                          r.max_deviation, r.deviation.size())};
}

Outcome variance_law() {
  const auto t0 = Clock::now();
  const TheoryFixture f = theory_fixture();
  std::vector<Tensor> probes(f.probes.begin(), f.probes.begin() + 3);
  const auto r = check_variance_scaling(f.model, f.y, probes, {1, 2, 5, 10}, 10000, 402, 3.0);
  double worst = 0.0;
  for (const auto& row : r.rows) worst = std::max(worst, std::abs(row.z_score()));
  const double secs = seconds_since(t0);
  return {r.passed() && secs < 120.0,
          fmt("worst |MC - sigma^2/B| = %.2f SE over %zu (probe, B) rows, N=1e4 (tol 3 SE); %.1f s (limit 120 s)",
              worst, r.rows.size(), secs)};
}

Outcome metric_correctness() {
  Rng rng(1101);
  Tensor x = random_tensor({16, 16}, rng), xhat = x + 0.3 * random_tensor({16, 16}, rng);
  const double base = snr_db(xhat, x);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double a = rng.uniform(-5.0, 5.0), b = rng.uniform(-3.0, 3.0);
    if (std::abs(a) < 0.1) continue;
    Tensor moved = a * xhat;
    for (double& v : moved.data()) v += b;
    worst = std::max(worst, std::abs(snr_db(moved, x) - base));
  }
  const double worked =
      snr_db(Tensor({3}, std::vector<double>{1, 2, 2}), Tensor({3}, std::vector<double>{1, 2, 3}));
  const double expected = 10.0 * std::log10(28.0);
  Tensor img({12, 12});
  for (double& v : img.data()) v = rng.uniform();
  const double self = ssim(img, img, 1.0);
  const bool ok = worst <= 1e-9 && std::abs(worked - expected) <= 1e-12 && std::abs(self - 1.0) <= 1e-12;
  return {ok, fmt("affine invariance gap %.1e (tol 1e-9); worked example %.12f vs 10 log10(28) = %.12f; "
                  "ssim(x, x) - 1 = %.1e (tol 1e-12)",
                  worst, worked, expected, self - 1.0)};
}

// (A^T A + tau I) u = A^T y by Gaussian elimination with partial pivoting.
Tensor dense_regularised(const Tensor& a, const Tensor& y, double tau, const Shape& image) {
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> mat(n * n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t r = 0; r < m; ++r) mat[i * n + j] += a[r * n + i] * a[r * n + j];
    mat[i * n + i] += tau;
    for (std::size_t r = 0; r < m; ++r) rhs[i] += a[r * n + i] * y[r];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(mat[r * n + c]) > std::abs(mat[piv * n + c])) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(mat[c * n + k], mat[piv * n + k]);
    std::swap(rhs[c], rhs[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = mat[r * n + c] / mat[c * n + c];
      for (std::size_t k = c; k < n; ++k) mat[r * n + k] -= f * mat[c * n + k];
      rhs[r] -= f * rhs[c];
    }
  }
  std::vector<double> u(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = rhs[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= mat[r * n + k] * u[k];
    u[r] = s / mat[r * n + r];
  }
  return Tensor(image, std::move(u));
}

Outcome baseline_sanity() {
  Rng rng(1201);
  Tensor a = random_tensor({24, 12}, rng);
  a *= 1.0 / std::sqrt(24.0);
  const ForwardModel model({3, 4}, {std::make_shared<ExplicitMatrix>(a, Shape{3, 4})});
  MeasurementSet y;
  y.blocks = {random_tensor({24}, rng)};

  TVConfig tv;
  tv.tau = 0.0;
  tv.iterations = 3000;
  const double tv_gap = max_abs_diff(tv_apgm(y, model, tv).image, dense_regularised(a, y.blocks[0], 0.0, {3, 4}));

  REDConfig red;
  red.tau = 0.5;
  red.iterations = 600;
  const double red_gap = max_abs_diff(red_fixed_point(y, model, PriorNet::identity({4, 3}), red).image,
                                      dense_regularised(a, y.blocks[0], 0.5, {3, 4}));
  return {tv_gap <= 1e-5 && red_gap <= 1e-5,
          fmt("TV (tau=0) vs least squares %.2e; RED (identity R) vs Tikhonov %.2e (tol 1e-5)", tv_gap, red_gap)};
}

// ------------------------------------------------------------- convergence

void theorem1_group(const fs::path& out) {
  const auto t0 = Clock::now();
  TheorySection t = ExperimentConfig().theory;
  Theorem1Result r;
  std::string error;
  try {
    r = theorem1_sweep(t.problem, t.batches, t.iterations, t.seeds, t.root_seed, env_worker_count());
    r.summary = summarize_theorem1(r.runs, t.b_tolerance);
    fs::create_directories(out);
    write_text(out / "theorem1_summary.csv", r.summary_csv());
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double secs = seconds_since(t0);
  if (!error.empty()) {
    report(6, "convergence K trend", {false, "exception: " + error});
    report(7, "convergence B trend", {false, "exception: " + error});
    return;
  }
  std::size_t diverged = 0;
  for (const auto& run : r.runs) diverged += run.diverged;
  std::string k_detail, b_detail;
  for (const auto& line : r.summary.checks) (line.rfind("K-trend", 0) == 0 ? k_detail : b_detail) += line + "; ";
  report(6, "convergence K trend",
         {r.summary.k_trend_ok && secs < 1200.0 && diverged == 0,
          k_detail + fmt("%zu runs, %zu diverged, %.0f s total (limit 1200 s)", r.runs.size(), diverged, secs)});
  report(7, "convergence B trend", {r.summary.b_trend_ok && diverged == 0, b_detail});
}

// --------------------------------------------------------------- quality

void quality_group(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  const std::size_t workers = env_worker_count();
  std::ostringstream log;
  std::string error;
  double fbp = 0.0, tv = 0.0;
  struct Cell {
    std::size_t steps;
    bool full;
    double snr, train_s;
  };
  std::vector<Cell> cells;
  try {
    const ProblemData problem = load_problem(cfg);
    fbp = score(initial_images(problem.test), problem.test).snr_summary().mean;

    auto t0 = Clock::now();
    const TVTuning tuning = tune_tv(problem.train, problem.model, cfg.baselines, workers);
    const MetricReport tv_report =
        score(reconstruct_tv(problem.test, problem.model, tuning.best_tau, cfg.baselines, workers), problem.test);
    tv = tv_report.snr_summary().mean;
    std::string csv = "tau,train_mean_snr_db\n";
    for (std::size_t i = 0; i < tuning.taus.size(); ++i) csv += fmt("%g,%.6f\n", tuning.taus[i], tuning.mean_snr[i]);
    write_text(out / "tv_tuning.csv", csv);
    std::printf("  FBP %.3f dB; TV (tau %g, tuned on %zu training images) %.3f dB; %.0f s\n", fbp, tuning.best_tau,
                cfg.baselines.tv_tune_images, tv, seconds_since(t0));

    t0 = Clock::now();
    const TrainResult pre = run_pretrain(cfg, problem.train);
    const double pre_s = seconds_since(t0);
    const double r_only = score(
        [&] {
          std::vector<Tensor> v;
          for (const auto& s : problem.test.samples) v.push_back(r_theta_apply(pre.checkpoint.net, s.init));
          return v;
        }(),
        problem.test).snr_summary().mean;
    std::printf("  warm start: %zu pretraining iterations in %.0f s, R(init) test SNR %.3f dB\n",
                pre.checkpoint.iteration, pre_s, r_only);
    std::fflush(stdout);

    std::string metrics = "image_id,method,snr_db,ssim\n";
    std::string runs = "Q,mode,B,train_s,mean_snr_db,median_snr_db,std_snr_db,mean_ssim\n";
    for (std::size_t q : {2, 4, 8}) {
      for (bool full : {false, true}) {
        UnfoldConfig u = cfg.unfold.unfold;
        u.steps = q;
        u.mode = full ? DataMode::kFullBatch : DataMode::kStochastic;
        t0 = Clock::now();
        const TrainResult r = run_unfolded(cfg, problem, pre.checkpoint.net, u);
        const double train_s = seconds_since(t0);
        const MetricReport m =
            score(reconstruct_unfolded(problem.test, problem.model, r.checkpoint.net, u, 0, workers), problem.test);
        const Summary s = m.snr_summary();
        cells.push_back({q, full, s.mean, train_s});
        const std::string method = fmt("%s_Q%zu", full ? "ured" : "sgdnet_B10", q);
        metrics += metrics_csv(method, m, false);
        runs += fmt("%zu,%s,%zu,%.1f,%.6f,%.6f,%.6f,%.6f\n", q, full ? "full-batch" : "stochastic",
                    full ? problem.model.size() : u.minibatch, train_s, s.mean, s.median, s.stddev,
                    m.ssim_summary().mean);
        std::printf("  Q=%zu %-10s trained in %6.1f s (tau %.4f): test SNR %.3f dB\n", q,
                    full ? "full-batch" : "B=10", train_s, r.checkpoint.net.tau(), s.mean);
        std::fflush(stdout);
      }
    }
    write_text(out / "quality_metrics.csv", metrics);
    write_text(out / "quality_runs.csv", runs);
  } catch (const std::exception& e) {
    error = e.what();
  }
  if (!error.empty()) {
    report(8, "quality parity", {false, "exception: " + error});
    report(9, "step-count monotonicity", {false, "exception: " + error});
    return;
  }
  auto find = [&](std::size_t q, bool full) {
    for (const auto& c : cells)
      if (c.steps == q && c.full == full) return c;
    return Cell{};
  };
  const Cell sg = find(8, false), ur = find(8, true);
  double slowest = 0.0;
  for (const auto& c : cells) slowest = std::max(slowest, c.train_s);
  const bool parity = std::abs(sg.snr - ur.snr) <= 0.5;
  const bool over_fbp = std::min(sg.snr, ur.snr) >= fbp + 3.0;
  const bool over_tv = std::min(sg.snr, ur.snr) >= tv;
  report(8, "quality parity",
         {parity && over_fbp && over_tv && slowest < 1800.0,
          fmt("SGD-Net B=10 %.3f dB vs U-RED %.3f dB (|diff| %.3f, tol 0.5); FBP %.3f (+3 dB needed), TV %.3f; "
              "slowest training run %.0f s (limit 1800 s)",
              sg.snr, ur.snr, std::abs(sg.snr - ur.snr), fbp, tv, slowest)});
  bool mono = true;
  std::string detail;
  for (bool full : {false, true}) {
    const double a = find(2, full).snr, b = find(4, full).snr, c = find(8, full).snr;
    mono = mono && b >= a - 0.2 && c >= b - 0.2;
    detail += fmt("%s: Q=2 %.3f, Q=4 %.3f, Q=8 %.3f; ", full ? "full batch" : "B=10", a, b, c);
  }
  report(9, "step-count monotonicity", {mono, detail + "tolerance 0.2 dB"});
}

// ------------------------------------------------------------------ cost

void cost_group(const ExperimentConfig& base, const fs::path& out) {
  try {
    ExperimentConfig cfg = base;
    cfg.problem.test_count = 10;
    const ProblemData problem = load_problem(cfg);
    const PriorNet net = initial_net(cfg);

    BenchOptions epochs;
    epochs.batches = {10, 60};
    epochs.repeats = 1;
    epochs.forward_images = 10;
    const auto epoch_rows = bench_minibatch(cfg, problem, net, epochs);

    BenchOptions forward;
    forward.batches = {8, 16, 32};
    forward.repeats = 5;
    forward.forward_images = 10;
    forward.time_epochs = false;
    const auto fwd_rows = bench_minibatch(cfg, problem, net, forward);

    fs::create_directories(out);
    write_text(out / "bench_epoch.csv", bench_csv(epoch_rows));
    write_text(out / "bench_forward.csv", bench_csv(fwd_rows));

    const double e10 = epoch_rows[0].epoch_s.mean, e60 = epoch_rows[1].epoch_s.mean;
    bool ok = e10 <= 0.6 * e60;
    std::string detail = fmt("epoch B=10 %.2f s vs B=60 %.2f s (ratio %.3f, limit 0.6); data-consistency per forward"
                             " pass: ",
                             e10, e60, e10 / e60);
    for (std::size_t i = 1; i < fwd_rows.size(); ++i) {
      const double ratio = fwd_rows[i].data_consistency_ms.median / fwd_rows[i - 1].data_consistency_ms.median;
      ok = ok && ratio >= 1.5 && ratio <= 2.5;
      detail += fmt("B=%zu/B=%zu %.2f, ", fwd_rows[i].batch, fwd_rows[i - 1].batch, ratio);
    }
    detail += "range [1.5, 2.5]; whole forward incl. network: ";
    for (std::size_t i = 1; i < fwd_rows.size(); ++i) {
      detail += fmt("%.2f ", fwd_rows[i].forward_ms.median / fwd_rows[i - 1].forward_ms.median);
    }
    report(10, "cost scaling", {ok, detail});
  } catch (const std::exception& e) {
    report(10, "cost scaling", {false, std::string("exception: ") + e.what()});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string group = "fast", out = "acceptance_out", config;
  app.add_option("--group", group)->check(CLI::IsMember({"fast", "theorem1", "quality", "cost", "all"}));
  app.add_option("--out", out, "directory for CSV artifacts");
  app.add_option("--config", config, "experiment config for the quality and cost groups");
  CLI11_PARSE(app, argc, argv);

  ExperimentConfig cfg;
  if (!config.empty()) cfg = load_config(config);
  const bool all = group == "all";
  const auto t0 = Clock::now();
  if (all || group == "fast") {
    run(1, "adjoint identities", adjoint_identities);
    run(2, "gradient fidelity", gradient_fidelity);
    run(3, "batch equivalence", batch_equivalence);
    run(4, "unbiasedness", unbiasedness);
    run(5, "variance law", variance_law);
    run(11, "metric correctness", metric_correctness);
    run(12, "baseline sanity", baseline_sanity);
  }
  if (all || group == "theorem1") theorem1_group(out);
  if (all || group == "quality") quality_group(cfg, out);
  if (all || group == "cost") cost_group(cfg, out);
  std::printf("%s: %d failing criteria, %.0f s\n", group.c_str(), failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
