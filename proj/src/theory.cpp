#include "sgdnet/theory.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sgdnet/parallel.hpp"

namespace sgdnet {

UnbiasednessReport check_phi_unbiasedness(const ForwardModel& model, const MeasurementSet& y,
                                          const std::vector<Tensor>& probes, double tolerance) {
  UnbiasednessReport r;
  r.tolerance = tolerance;
  for (const Tensor& x : probes) {
    Tensor mean(x.shape());
    for (std::size_t i = 0; i < model.size(); ++i) {
      const std::size_t idx[1] = {i};
      mean += minibatch_gradient(x, y, model, idx);
    }
    mean *= 1.0 / static_cast<double>(model.size());
    const double d = norm(mean - full_gradient(x, y, model));
    r.deviation.push_back(d);
    r.max_deviation = std::max(r.max_deviation, d);
  }
  return r;
}

double enumerated_variance(const ForwardModel& model, const MeasurementSet& y, const Tensor& x) {
  const Tensor full = full_gradient(x, y, model);
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const std::size_t idx[1] = {i};
    s += sum_squares(minibatch_gradient(x, y, model, idx) - full);
  }
  return s / static_cast<double>(model.size());
}

bool VarianceReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [&](const VarianceRow& r) { return r.within(tolerance_se); });
}

VarianceReport check_variance_scaling(const ForwardModel& model, const MeasurementSet& y,
                                      const std::vector<Tensor>& probes, const std::vector<std::size_t>& batches,
                                      std::size_t draws, std::uint64_t seed, double tolerance_se) {
  if (draws < 2) throw ConfigError("variance check needs at least two draws");
  VarianceReport rep;
  rep.tolerance_se = tolerance_se;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const Tensor& x = probes[p];
    const Tensor full = full_gradient(x, y, model);
    const double sigma_sq = enumerated_variance(model, y, x);
    for (std::size_t b : batches) {
      Rng rng(derive_seed(seed, {p, b}));
      double mean = 0.0, m2 = 0.0;
      for (std::size_t n = 0; n < draws; ++n) {
        const auto idx = sample_indices(b, model.size(), rng);
        const double d = sum_squares(minibatch_gradient(x, y, model, idx) - full);
        // Welford update
        const double delta = d - mean;
        mean += delta / static_cast<double>(n + 1);
        m2 += delta * (d - mean);
      }
      VarianceRow row;
      row.probe = p;
      row.batch = b;
      row.sigma_sq = sigma_sq;
      row.expected = sigma_sq / static_cast<double>(b);
      row.monte_carlo = mean;
      row.standard_error = std::sqrt(m2 / static_cast<double>(draws - 1) / static_cast<double>(draws));
      rep.rows.push_back(row);
    }
  }
  return rep;
}

TrainingGradientReport check_training_gradient_unbiasedness(const Dataset& data, const ForwardModel& model,
                                                            const PriorNet& net, const UnfoldConfig& unfold,
                                                            double tolerance) {
  UnfoldConfig full = unfold;
  full.mode = DataMode::kFullBatch;
  const ObjectiveGradient f = full_objective_gradient(data, model, net, full);
  std::vector<SampleGradient> per;
  for (const auto& s : data.samples) {
    per.push_back(sample_gradient(s, model, net, full, IndexDraws(full.steps), {true, true}));
  }
  Tensor mean({net.parameter_count()});
  double tau = 0.0;
  for (const auto& g : per) {
    mean += g.theta;
    tau += g.tau;
  }
  const double inv = 1.0 / static_cast<double>(per.size());
  mean *= inv;
  tau *= inv;
  TrainingGradientReport r;
  r.tolerance = tolerance;
  r.deviation = std::sqrt(sum_squares(mean - f.theta) + (tau - f.tau) * (tau - f.tau));
  for (const auto& g : per) {
    r.epsilon_sq += sum_squares(g.theta - f.theta) + (g.tau - f.tau) * (g.tau - f.tau);
  }
  r.epsilon_sq *= inv;
  return r;
}

TheoryProblem::TheoryProblem() {
  model.kind = "radon";
  model.size = 16;
  model.components = 20;
}

std::string Theorem1Run::to_csv() const {
  std::ostringstream os;
  os << "iteration,grad_norm_sq,min_so_far\n";
  char buf[96];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", samples[i].first, samples[i].second, min_so_far[i]);
    os << buf;
  }
  return os.str();
}

const Theorem1Summary::Cell* Theorem1Summary::find(std::size_t batch, std::size_t iterations) const {
  for (const auto& c : cells)
    if (c.batch == batch && c.iterations == iterations) return &c;
  return nullptr;
}

std::string Theorem1Result::summary_csv() const {
  std::ostringstream os;
  os << "B,K,seed,min_grad_norm_sq,tail_floor,wallclock_s,diverged\n";
  char buf[160];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g,%.3f,%d\n", r.batch, r.iterations, r.seed_index,
                  r.min_grad_norm_sq, r.tail_floor, r.wallclock_s, r.diverged ? 1 : 0);
    os << buf;
  }
  return os.str();
}

Theorem1Summary summarize_theorem1(const std::vector<Theorem1Run>& runs, double b_tolerance) {
  Theorem1Summary s;
  s.b_tolerance = b_tolerance;
  std::map<std::pair<std::size_t, std::size_t>, Theorem1Summary::Cell> cells;
  for (const auto& r : runs) {
    auto& c = cells[{r.batch, r.iterations}];
    c.batch = r.batch;
    c.iterations = r.iterations;
    if (r.diverged) {
      ++c.diverged;
      continue;
    }
    ++c.runs;
    c.mean_min += r.min_grad_norm_sq;
    c.mean_floor += r.tail_floor;
  }
  std::vector<std::size_t> bs, ks;
  for (auto& [key, c] : cells) {
    if (c.runs) {
      c.mean_min /= static_cast<double>(c.runs);
      c.mean_floor /= static_cast<double>(c.runs);
    }
    s.cells.push_back(c);
    bs.push_back(key.first);
    ks.push_back(key.second);
  }
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty() || bs.empty()) return s;

  char buf[200];
  const std::size_t k_lo = ks.front(), k_hi = ks.back();
  for (std::size_t b : bs) {
    const auto* lo = s.find(b, k_lo);
    const auto* hi = s.find(b, k_hi);
    const bool ok = lo && hi && lo->runs && hi->runs && hi->mean_min <= lo->mean_min;
    s.k_trend_ok = s.k_trend_ok && ok;
    std::snprintf(buf, sizeof buf, "K-trend B=%zu: min@K=%zu %.6g vs min@K=%zu %.6g -> %s", b, k_hi,
                  hi ? hi->mean_min : NAN, k_lo, lo ? lo->mean_min : NAN, ok ? "ok" : "violated");
    s.checks.push_back(buf);
  }
  for (std::size_t i = 1; i < bs.size(); ++i) {
    const auto* prev = s.find(bs[i - 1], k_hi);
    const auto* cur = s.find(bs[i], k_hi);
    const bool ok =
        prev && cur && prev->runs && cur->runs && cur->mean_floor <= (1.0 + b_tolerance) * prev->mean_floor;
    s.b_trend_ok = s.b_trend_ok && ok;
    std::snprintf(buf, sizeof buf, "B-trend K=%zu: floor@B=%zu %.6g vs floor@B=%zu %.6g (tol %.0f%%) -> %s", k_hi,
                  bs[i], cur ? cur->mean_floor : NAN, bs[i - 1], prev ? prev->mean_floor : NAN, 100 * b_tolerance,
                  ok ? "ok" : "violated");
    s.checks.push_back(buf);
  }
  return s;
}

Theorem1Result theorem1_sweep(const TheoryProblem& problem, std::vector<std::size_t> batches,
                              std::vector<std::size_t> iterations, std::size_t seeds, std::uint64_t root_seed,
                              std::size_t workers) {
  if (batches.empty() || iterations.empty() || seeds == 0) throw ConfigError("theorem1: empty sweep");
  const ForwardModel model = build_model(problem.model);
  DatasetSpec ds;
  ds.model = problem.model;
  ds.count = problem.samples;
  ds.snr_db = problem.snr_db;
  ds.seed = problem.data_seed;
  const InitKind init = model.all_of_kind(ComponentKind::kRadonView) ? InitKind::kFbp : InitKind::kBackprojection;
  const Dataset data = synthesize_dataset(ds, model, init);

  struct Job {
    std::size_t b, k, s;
  };
  std::vector<Job> jobs;
  for (std::size_t b : batches)
    for (std::size_t k : iterations)
      for (std::size_t s = 0; s < seeds; ++s) jobs.push_back({b, k, s});

  Theorem1Result result;
  result.runs.resize(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t n) {
    const Job& job = jobs[n];
    Theorem1Run& run = result.runs[n];
    run.batch = job.b;
    run.iterations = job.k;
    run.seed_index = job.s;
    run.seed = derive_seed(root_seed, {job.b, job.k, job.s});

    const PriorNet net =
        PriorNet::random(problem.net, derive_seed(root_seed, {0x4e4554ULL, job.s}), problem.tau, problem.init_gain);
    UnfoldConfig unfold;
    unfold.steps = problem.steps;
    unfold.gamma = problem.gamma;
    unfold.minibatch = job.b;
    unfold.mode = DataMode::kStochastic;
    TrainConfig cfg;
    cfg.iterations = job.k;
    cfg.schedule.kind = Schedule::Kind::kInverseSqrt;
    cfg.schedule.rate = problem.rate;
    cfg.seed = run.seed;
    cfg.trace_period = std::max<std::size_t>(1, job.k / std::max<std::size_t>(problem.trace_points, 1));
    run.eta = cfg.schedule.eta(0, job.k);

    const auto t0 = std::chrono::steady_clock::now();
    TrainTrace trace;
    try {
      trace = train_unfolded(data, model, initial_checkpoint(net, cfg, unfold), unfold, cfg).trace;
    } catch (const TrainingDiverged& e) {
      run.diverged = true;
      run.note = e.what();
      trace = e.trace();
    }
    run.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.samples = trace.grad_norms();
    double best = INFINITY;
    for (const auto& [k, v] : run.samples) {
      best = std::min(best, v);
      run.min_so_far.push_back(best);
    }
    run.min_grad_norm_sq = best;
    const std::size_t tail = std::max<std::size_t>(1, run.samples.size() / 10);
    double floor = 0.0;
    for (std::size_t i = run.samples.size() - std::min(tail, run.samples.size()); i < run.samples.size(); ++i) {
      floor += run.samples[i].second;
    }
    run.tail_floor = run.samples.empty() ? NAN : floor / static_cast<double>(std::min(tail, run.samples.size()));
  });
  result.summary = summarize_theorem1(result.runs);
  return result;
}

}  // namespace sgdnet
