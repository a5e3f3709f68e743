#include "sgdnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sgdnet/error.hpp"
#include "sgdnet/parallel.hpp"

namespace sgdnet {

ProblemData load_problem(const ExperimentConfig& cfg) {
  const auto& p = cfg.problem;
  if (cfg.paths.train_data.empty() != cfg.paths.test_data.empty()) {
    throw ConfigError("paths.train_data and paths.test_data must be given together");
  }
  if (!cfg.paths.train_data.empty()) {
    LoadedDataset train = read_dataset(cfg.paths.train_data, p.init);
    LoadedDataset test = read_dataset(cfg.paths.test_data, p.init);
    ForwardModel model = build_model(train.spec.model);
    train.data.check(model);
    test.data.check(model);
    return {std::move(model), std::move(train.data), std::move(test.data)};
  }
  ForwardModel model = build_model(p.model);
  Dataset train = synthesize_dataset(dataset_spec(p, false), model, p.init);
  Dataset test;
  if (p.test_count > 0) test = synthesize_dataset(dataset_spec(p, true), model, p.init);
  return {std::move(model), std::move(train), std::move(test)};
}

PriorNet initial_net(const ExperimentConfig& cfg) {
  const auto& u = cfg.unfold;
  return PriorNet::random(u.net, u.net_seed, u.tau, u.init_gain);
}

TrainResult run_pretrain(const ExperimentConfig& cfg, const Dataset& train, const TrainHooks& hooks) {
  const PriorNet net = initial_net(cfg);
  const Checkpoint start = initial_checkpoint(net, cfg.pretrain.train, cfg.unfold.unfold, "pretrain");
  std::vector<ImagePair> pairs;
  for (const auto& s : train.samples) pairs.push_back({s.init, s.truth});
  TrainResult r = fit_prior(pairs, start, cfg.pretrain.train, cfg.pretrain.target, hooks);
  r.checkpoint.method = "pretrain";
  return r;
}

TrainResult run_unfolded(const ExperimentConfig& cfg, const ProblemData& problem, const PriorNet& warm,
                         const UnfoldConfig& unfold, const TrainHooks& hooks) {
  if (warm.spec() != cfg.unfold.net) {
    throw CheckpointMismatch("warm start network " + warm.spec_hash() + " does not match the configured one");
  }
  PriorNet net = warm;
  net.set_tau(cfg.unfold.tau);
  return train_unfolded(problem.train, problem.model, initial_checkpoint(net, cfg.train, unfold), unfold, cfg.train,
                        hooks);
}

std::vector<Tensor> reconstruct_unfolded(const Dataset& data, const ForwardModel& model, const PriorNet& net,
                                         const UnfoldConfig& unfold, std::uint64_t seed, std::size_t workers) {
  validate(unfold, model.size());
  std::vector<Tensor> out(data.size());
  parallel_for(data.size(), workers, [&](std::size_t j) {
    const Sample& s = data.samples[j];
    if (unfold.mode == DataMode::kFullBatch) {
      out[j] = ured_forward(s.init, s.y, model, net, unfold).final_image;
    } else {
      Rng rng(derive_seed(seed, {j}));
      out[j] = sgdnet_forward(s.init, s.y, model, net, unfold, rng).final_image;
    }
  });
  return out;
}

std::vector<Tensor> reconstruct_tv(const Dataset& data, const ForwardModel& model, double tau,
                                   const BaselineSection& cfg, std::size_t workers) {
  std::vector<Tensor> out(data.size());
  parallel_for(data.size(), workers, [&](std::size_t j) {
    TVConfig tv;
    tv.tau = tau;
    tv.iterations = cfg.tv_iterations;
    tv.inner_iterations = cfg.tv_inner;
    tv.init = data.samples[j].init;
    out[j] = tv_apgm(data.samples[j].y, model, tv).image;
  });
  return out;
}

TVTuning tune_tv(const Dataset& train, const ForwardModel& model, const BaselineSection& cfg, std::size_t workers) {
  if (cfg.tv_taus.empty()) throw ConfigError("TV grid is empty");
  Dataset subset;
  const std::size_t n = std::min(std::max<std::size_t>(cfg.tv_tune_images, 1), train.size());
  subset.samples.assign(train.samples.begin(), train.samples.begin() + static_cast<std::ptrdiff_t>(n));
  TVTuning t;
  double best = -INFINITY;
  for (double tau : cfg.tv_taus) {
    const double mean = score(reconstruct_tv(subset, model, tau, cfg, workers), subset).snr_summary().mean;
    t.taus.push_back(tau);
    t.mean_snr.push_back(mean);
    if (mean > best) {
      best = mean;
      t.best_tau = tau;
    }
  }
  return t;
}

std::vector<Tensor> reconstruct_red(const Dataset& data, const ForwardModel& model, const PriorNet& denoiser,
                                    const BaselineSection& cfg, std::size_t workers) {
  std::vector<Tensor> out(data.size());
  parallel_for(data.size(), workers, [&](std::size_t j) {
    REDConfig red;
    red.tau = cfg.red_tau;
    red.iterations = cfg.red_iterations;
    red.init = data.samples[j].init;
    out[j] = red_fixed_point(data.samples[j].y, model, denoiser, red).image;
  });
  return out;
}

std::vector<Tensor> initial_images(const Dataset& data) {
  std::vector<Tensor> out;
  for (const auto& s : data.samples) out.push_back(s.init);
  return out;
}

MetricReport score(const std::vector<Tensor>& images, const Dataset& data) {
  if (images.size() != data.size()) throw ShapeError("score: image count does not match the dataset");
  MetricReport r;
  for (std::size_t j = 0; j < images.size(); ++j) {
    r.snr_db.push_back(snr_db(images[j], data.samples[j].truth));
    r.ssim.push_back(ssim(images[j], data.samples[j].truth, 1.0));
  }
  return r;
}

std::string metrics_csv(const std::string& method, const MetricReport& report, bool header) {
  std::ostringstream os;
  if (header) os << "image_id,method,snr_db,ssim\n";
  char buf[64];
  for (std::size_t j = 0; j < report.snr_db.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.9f", report.ssim[j]);
    os << j << ',' << method << ',' << format_snr(report.snr_db[j]) << ',' << buf << '\n';
  }
  return os.str();
}

namespace {

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<BenchRow> bench_minibatch(const ExperimentConfig& cfg, const ProblemData& problem, const PriorNet& net,
                                      const BenchOptions& options) {
  if (options.repeats == 0) throw ConfigError("bench: repeats must be at least 1");
  std::vector<std::size_t> batches = options.batches;
  std::sort(batches.begin(), batches.end());
  batches.erase(std::unique(batches.begin(), batches.end()), batches.end());
  const Dataset& images = problem.test.size() ? problem.test : problem.train;
  const std::size_t n = std::min(std::max<std::size_t>(options.forward_images, 1), images.size());

  std::vector<BenchRow> rows;
  for (std::size_t b : batches) {
    UnfoldConfig unfold = cfg.unfold.unfold;
    unfold.mode = DataMode::kStochastic;
    unfold.minibatch = b;
    validate(unfold, problem.model.size());
    std::vector<double> dc, fwd, epoch;
    for (std::size_t r = 0; r < options.repeats; ++r) {
      Rng rng(derive_seed(cfg.train.seed, {b, r}));
      std::vector<IndexDraws> draws;
      for (std::size_t j = 0; j < n; ++j) draws.push_back(draw_indices(unfold, problem.model.size(), rng));

      auto t0 = std::chrono::steady_clock::now();
      double sink = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const Sample& s = images.samples[j];
        for (const auto& idx : draws[j]) sink += minibatch_gradient(s.init, s.y, problem.model, idx)[0];
      }
      dc.push_back(1e3 * elapsed(t0) / static_cast<double>(n));
      if (!std::isfinite(sink)) throw NumericError("bench: non-finite data-consistency output");

      t0 = std::chrono::steady_clock::now();
      for (std::size_t j = 0; j < n; ++j) {
        const Sample& s = images.samples[j];
        sgdnet_forward_with_draws(s.init, s.y, problem.model, net, unfold, draws[j]);
      }
      fwd.push_back(1e3 * elapsed(t0) / static_cast<double>(n));

      if (options.time_epochs) {
        TrainConfig tc = cfg.train;
        tc.epochs = 1;
        tc.iterations = 0;
        tc.trace_period = 0;
        tc.snapshot_period = 0;
        t0 = std::chrono::steady_clock::now();
        train_unfolded(problem.train, problem.model, initial_checkpoint(net, tc, unfold), unfold, tc);
        epoch.push_back(elapsed(t0));
      }
    }
    BenchRow row;
    row.batch = b;
    row.data_consistency_ms = summarize(dc);
    row.forward_ms = summarize(fwd);
    if (!epoch.empty()) row.epoch_s = summarize(epoch);
    rows.push_back(row);
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "B,dc_ms_mean,dc_ms_std,forward_ms_mean,forward_ms_std,epoch_s_mean,epoch_s_std\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.batch, r.data_consistency_ms.mean,
                  r.data_consistency_ms.stddev, r.forward_ms.mean, r.forward_ms.stddev, r.epoch_s.mean,
                  r.epoch_s.stddev);
    os << buf;
  }
  return os.str();
}

}  // namespace sgdnet
