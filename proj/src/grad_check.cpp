#include "sgdnet/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace sgdnet {

double GradCheckReport::worst_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_rel_error);
  return worst;
}

namespace {

double evaluate(const LossBuilder& f, const std::vector<ParamBlock>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.constant(p.value));
  return f(tape, leaves).value().item();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& f, const std::vector<ParamBlock>& params, double step,
                           double tolerance) {
  std::vector<Tensor> reverse;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.leaf(p.value, p.name));
    Var loss = f(tape, leaves);
    Gradients g = tape.backward(loss);
    for (Var v : leaves) reverse.push_back(g.of(v));
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<ParamBlock> probe = params;
  for (std::size_t b = 0; b < params.size(); ++b) {
    Tensor central(params[b].value.shape());
    for (std::size_t i = 0; i < central.size(); ++i) {
      const double orig = probe[b].value[i];
      probe[b].value[i] = orig + step;
      const double up = evaluate(f, probe);
      probe[b].value[i] = orig - step;
      const double down = evaluate(f, probe);
      probe[b].value[i] = orig;
      central[i] = (up - down) / (2.0 * step);
    }
    BlockDiscrepancy d;
    d.name = params[b].name;
    d.max_abs_error = max_abs_diff(reverse[b], central);
    const double scale = std::max(max_abs(central), max_abs(reverse[b]));
    d.max_rel_error = scale > 0.0 ? d.max_abs_error / scale : 0.0;
    report.blocks.push_back(d);
  }
  return report;
}

}  // namespace sgdnet
