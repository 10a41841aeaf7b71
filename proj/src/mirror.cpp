#include "dsgd/mirror.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dsgd/random.hpp"

namespace dsgd {

namespace {

constexpr double kMaxExponent = 700.0;

bool is_entropy(const MirrorMap& map) { return map.kind == MirrorMap::Kind::neg_entropy_unnormalized; }

void require_positive(const ParameterVector& x) {
  for (double v : x.values()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("entropy map needs strictly positive finite coordinates");
  }
}

// x * exp(-eta g) with the exponent and the product kept finite and positive.
double exp_update(double x, double eta_g, bool& clamped) {
  double exponent = -eta_g;
  if (exponent > kMaxExponent) {
    exponent = kMaxExponent;
    clamped = true;
  } else if (exponent < -kMaxExponent) {
    exponent = -kMaxExponent;
    clamped = true;
  }
  double out = x * std::exp(exponent);
  if (!(out > 0.0)) {
    out = std::numeric_limits<double>::min();
    clamped = true;
  } else if (!std::isfinite(out)) {
    out = std::numeric_limits<double>::max();
    clamped = true;
  }
  return out;
}

}  // namespace

double bregman(const MirrorMap& map, const ParameterVector& x, const ParameterVector& xp) {
  if (x.dim() != xp.dim()) throw StructuralError("bregman arguments differ in dimension");
  double sum = 0.0;
  if (!is_entropy(map)) {
    for (std::size_t i = 0; i < x.dim(); ++i) {
      const double d = x[i] - xp[i];
      sum += d * d;
    }
    return 0.5 * sum;
  }
  require_positive(x);
  require_positive(xp);
  for (std::size_t i = 0; i < x.dim(); ++i) sum += x[i] * std::log(x[i] / xp[i]) - x[i] + xp[i];
  return std::max(0.0, sum);
}

MirrorStepResult mirror_step(const MirrorMap& map, const ParameterVector& x, const SparseVector& g, double eta) {
  MirrorStepResult out{x, false};
  if (!is_entropy(map)) {
    for (const auto& e : g.entries()) {
      if (e.index >= x.dim()) throw StructuralError("gradient index exceeds dimension");
      out.x[e.index] = x[e.index] - eta * e.value;
    }
    return out;
  }
  require_positive(x);
  for (const auto& e : g.entries()) {
    if (e.index >= x.dim()) throw StructuralError("gradient index exceeds dimension");
    out.x[e.index] = exp_update(x[e.index], eta * e.value, out.clamped);
  }
  if (map.normalized) {
    double total = 0.0;
    for (double v : out.x.values()) total += v;
    for (double& v : out.x.values()) v /= total;
  }
  return out;
}

bool mirror_step_inplace(const MirrorMap& map, ScaledVector& x, const SparseVector& g, double eta,
                         const LossSpec& loss, const FeasibleRegion& region) {
  if (!is_entropy(map)) {
    apply_step(x, g, eta, loss, region);
    return false;
  }
  bool clamped = false;
  for (const auto& e : g.entries()) {
    if (e.index >= x.dim()) throw StructuralError("gradient index exceeds dimension");
    x.set_raw(e.index, exp_update(x.raw(e.index), eta * e.value, clamped));
  }
  if (map.normalized) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.dim(); ++i) total += x.raw(i);
    for (std::size_t i = 0; i < x.dim(); ++i) x.set_raw(i, x.raw(i) / total);
    x.recompute_norm();
  }
  return clamped;
}

RunResult run_mirror(const RunConfig& config, const MirrorMap& map, std::span<const SparseExample> stream) {
  config.validate();
  if (stream.empty()) throw DomainError("stream must contain at least one example");
  if (!(map.Phi > 0.0)) throw DomainError("Phi must be positive");
  if (is_entropy(map)) {
    if (config.region.kind != FeasibleRegion::Kind::unbounded) {
      throw DomainError("entropy map runs on the positive orthant; region must be unbounded");
    }
    if (config.loss.l2_reg != 0.0) throw DomainError("entropy map does not support an L2 term");
  }

  const std::uint64_t T = stream.size();
  RunResult result;
  result.ledger = RegretLedger(config.tau);
  result.ledger.reserve(T);
  if (config.tau >= T) {
    result.trajectory.warnings.push_back("tau >= T: no delayed gradient is applied within the stream");
  }

  const double init = is_entropy(map) ? 1.0 / static_cast<double>(config.dimension) : 0.0;
  ScaledVector x(config.dimension, init);
  DelayBuffer buffer(config.tau);
  auto& traj = result.trajectory;
  if (config.record_trajectory) traj.iterates.push_back(x.materialize());

  auto apply = [&](const TaggedGradient& g, std::uint64_t t) {
    if (t <= config.tau) throw ContractViolation("mirror step at t <= tau");
    traj.clamped |= mirror_step_inplace(map, x, g.gradient, config.schedule.eta(t), config.loss, config.region);
    ++traj.updates_applied;
    result.delays.add(t - g.birth_step);
    if (config.record_trajectory) traj.applied_birth_steps.push_back(g.birth_step);
  };

  for (std::uint64_t t = 1; t <= T; ++t) {
    Evaluation ev = evaluate_example(config.loss, x, stream[t - 1]);
    if (!std::isfinite(ev.loss)) throw DomainError("loss diverged at step " + std::to_string(t));
    result.ledger.record(ev.loss, ev.mistake);
    if (auto delayed = buffer.push({std::move(ev.gradient), t})) apply(*delayed, t);
    if (config.record_trajectory) traj.iterates.push_back(x.materialize());
  }
  if (config.drain_tail) {
    std::uint64_t t = T;
    while (auto g = buffer.pop()) {
      apply(*g, ++t);
      if (config.record_trajectory) traj.iterates.push_back(x.materialize());
    }
  }
  if (traj.clamped) traj.warnings.push_back("exponentiated update clamped to stay finite and positive");

  traj.steps = T;
  traj.final_iterate = x.materialize();
  return result;
}

double measure_phi(const MirrorMap& map, std::size_t dim, std::size_t samples, double x_max, double step_max,
                   std::uint64_t seed) {
  if (dim == 0 || samples == 0) throw DomainError("measure_phi needs dim > 0 and samples > 0");
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double xi = is_entropy(map) ? x_max * (1.0 - uniform01(rng)) : uniform(rng, -x_max, x_max);
      const double step = uniform(rng, -step_max, step_max);
      const double moved = is_entropy(map) ? std::exp(std::log(xi) - step) : xi - step;
      num += (moved - xi) * (moved - xi);
      den += step * step;
    }
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

}  // namespace dsgd
