#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace sgdnet {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed for a run identified by integer coordinates. Used to give every
// (sample, iteration, run) its own independent stream.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> coords);

/// Seeded random source. All draws are functions of the engine state only,
/// so `state()` fully captures it for checkpointing.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), unbiased.
  std::size_t index(std::size_t n);
  // Standard normal (Box-Muller, no cached spare).
  double normal();

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace sgdnet
