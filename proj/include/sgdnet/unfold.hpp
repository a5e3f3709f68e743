#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sgdnet/forward_model.hpp"
#include "sgdnet/prior_net.hpp"
#include "sgdnet/rng.hpp"
#include "sgdnet/tape.hpp"

namespace sgdnet {

enum class DataMode { kStochastic, kFullBatch };

struct UnfoldConfig {
  std::size_t steps = 8;  // Q
  double gamma = 5e-3;
  std::size_t minibatch = 1;  // B, stochastic mode only
  DataMode mode = DataMode::kStochastic;
  std::uint64_t seed = 0;
  bool record_iterates = false;
};

// Throws ConfigError unless Q >= 1, gamma > 0 and (stochastic) 1 <= B <= I.
void validate(const UnfoldConfig& cfg, std::size_t components);

// Component indices used by each unrolled step. An empty entry means the
// step uses the full batch.
using IndexDraws = std::vector<std::vector<std::size_t>>;

// Fresh, independent minibatches for each of the Q steps.
IndexDraws draw_indices(const UnfoldConfig& cfg, std::size_t components, Rng& rng);

/// Data-consistency layer: minibatch gradient at x over `indices`
/// (empty: full gradient). Linear in x; its reverse pass applies the same
/// averaged normal operator. The indices are frozen, not differentiated.
Var data_consistency(Var x, const MeasurementSet& y, const ForwardModel& model, std::span<const std::size_t> indices);

// x - gamma * (grad + tau * D_theta(x))
Var sgdnet_step(const NetVars& net, Var x, const MeasurementSet& y, const ForwardModel& model, double gamma,
                std::span<const std::size_t> indices);

struct Unrolled {
  Var output;
  std::vector<Var> iterates;  // x^0..x^Q
};

Unrolled unroll(const NetVars& net, Var x0, const MeasurementSet& y, const ForwardModel& model, double gamma,
                const IndexDraws& draws);

/// Result of one forward evaluation. Owns the tape, so the caller may add a
/// loss on `tape` and run a single backward sweep.
struct UnfoldOutput {
  std::shared_ptr<Tape> tape;
  NetVars vars;
  Var output;
  Tensor final_image;
  std::vector<Tensor> iterates;  // Q + 1 images when recorded
  IndexDraws draws;
};

struct Trainable {
  bool theta = false;
  bool tau = false;
};

UnfoldOutput sgdnet_forward(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model,
                            const PriorNet& net, const UnfoldConfig& cfg, Rng& rng, Trainable trainable = {});

// Replays given draws (one entry per step).
UnfoldOutput sgdnet_forward_with_draws(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model,
                                       const PriorNet& net, const UnfoldConfig& cfg, const IndexDraws& draws,
                                       Trainable trainable = {});

// Full gradient in every step.
UnfoldOutput ured_forward(const Tensor& x0, const MeasurementSet& y, const ForwardModel& model, const PriorNet& net,
                          const UnfoldConfig& cfg, Trainable trainable = {});

}  // namespace sgdnet
