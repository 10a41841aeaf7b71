#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "dsgd/delayed_engine.hpp"

namespace dsgd {

struct MirrorMap {
  enum class Kind {
    squared_norm,              // phi(x) = 1/2 |x|^2
    neg_entropy_unnormalized,  // phi(x) = sum x_i log x_i - x_i on x > 0
  };

  Kind kind = Kind::squared_norm;
  double Phi = 1.0;
  /// Entropy map only: renormalize iterates onto the simplex after each step.
  bool normalized = false;
};

/// D_phi(x || xp) = phi(x) - phi(xp) - <x - xp, grad phi(xp)>.
double bregman(const MirrorMap& map, const ParameterVector& x, const ParameterVector& xp);

struct MirrorStepResult {
  ParameterVector x;
  bool clamped = false;
};

/// grad phi*(grad phi(x) - eta g): x - eta g, or x_i exp(-eta g_i).
MirrorStepResult mirror_step(const MirrorMap& map, const ParameterVector& x, const SparseVector& g,
                             double eta);

/// In-place variant on the engine's iterate. Returns true if an exponent or
/// result had to be clamped to stay finite and strictly positive.
bool mirror_step_inplace(const MirrorMap& map, ScaledVector& x, const SparseVector& g, double eta,
                         const LossSpec& loss, const FeasibleRegion& region);

/// Delayed mirror descent. Same loop and queue semantics as run(); the
/// squared-norm map reproduces run() bit for bit. The entropy map starts at
/// x_i = 1/d and requires an unbounded region and no L2 term.
RunResult run_mirror(const RunConfig& config, const MirrorMap& map, std::span<const SparseExample> stream);

/// Empirical Phi: max over `samples` random pairs of
/// |grad phi*(grad phi(x) - x') - x| / |x'|, with x drawn from (0, x_max]^d
/// and x' from [-step_max, step_max]^d.
double measure_phi(const MirrorMap& map, std::size_t dim, std::size_t samples, double x_max,
                   double step_max, std::uint64_t seed);

}  // namespace dsgd
