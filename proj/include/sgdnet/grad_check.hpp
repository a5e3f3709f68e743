#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgdnet/tape.hpp"

namespace sgdnet {

struct ParamBlock {
  std::string name;
  Tensor value;
};

// Builds the scalar loss on a fresh tape from leaves bound to the blocks,
// in block order.
using LossBuilder = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

struct BlockDiscrepancy {
  std::string name;
  // max_i |reverse_i - central_i| / max(|central|_inf, |reverse|_inf)
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<BlockDiscrepancy> blocks;
  double tolerance = 0.0;

  double worst_rel_error() const;
  bool passed() const { return worst_rel_error() <= tolerance; }
};

/// Compares reverse-mode gradients with central differences
/// (f(p + h e_i) - f(p - h e_i)) / 2h, entry by entry, for every block.
GradCheckReport grad_check(const LossBuilder& f, const std::vector<ParamBlock>& params, double step = 1e-6,
                           double tolerance = 1e-6);

}  // namespace sgdnet
