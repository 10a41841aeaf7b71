#pragma once

#include <span>

#include "dsgd/param_core.hpp"

namespace dsgd {

/// Constants shared by the regret bound formulas. T is real-valued so the
/// log terms can be probed at non-integer points.
struct BoundInputs {
  double F = 1.0;       // sqrt of the divergence diameter
  double L = 1.0;       // gradient norm bound
  double tau = 0.0;     // delay
  double T = 1.0;       // horizon
  double sigma = 1.0;   // learning-rate scale
  double lambda = 0.0;  // strong convexity
  double H = 0.0;       // gradient Lipschitz constant
  double alpha = 1.0;   // gradient correlation factor in [0, 1]
  double Phi = 1.0;     // implicit-update Lipschitz constant
};

/// sigma L^2 sqrt(T) + F^2 sqrt(T)/sigma + L^2 sigma tau^2/2 + 2 L^2 sigma tau sqrt(T),
/// or 4 F L sqrt(tau T) at the optimal sigma (needs tau >= 1, T >= tau^2).
double bound_lipschitz(const BoundInputs& in, bool optimal_sigma = false);

/// lambda tau F^2 + (1/2 + tau)(L^2/lambda)(1 + tau + log T), for
/// eta_t = 1/(lambda (t - tau)).
double bound_strong(const BoundInputs& in);

/// Worst-case bound with the delay terms scaled by alpha; optimal form
/// 4 F L sqrt(alpha tau T) needs tau alpha >= 1 and T >= tau^2.
double bound_alpha(const BoundInputs& in, bool optimal_sigma = false);

/// Expected regret for i.i.d. smooth losses with sigma = F/L:
/// [28.3 F^2 H + 2/3 F L + 4/3 F^2 H log T] tau^2 + 8/3 F L sqrt(T).
/// Requires H >= L / (4 F sqrt(tau)) when tau > 0.
double bound_smooth(const BoundInputs& in);

/// Expected regret for i.i.d. smooth, strongly convex losses (tau >= 1).
double bound_smooth_strong(const BoundInputs& in);

/// Bregman-divergence version of the worst-case bound, delay terms scaled by
/// Phi; optimal form 4 F L sqrt(Phi tau T) needs tau Phi >= 1, T >= tau^2.
double bound_bregman(const BoundInputs& in, bool optimal_sigma = false);

/// sigma^2 = F^2 / (2 tau c L^2) for c = 1, alpha or Phi.
double optimal_sigma(double F, double L, double tau, double c = 1.0);

/// alpha = Lambda^2 |E[z' z^T]|_Frob / L^2 for i.i.d. z, z'. The Frobenius
/// norm of mu mu^T is |mu|^2 with mu the sample mean, so no d x d matrix is
/// formed.
double estimate_alpha(std::span<const SparseVector> sample, double Lambda, double L);

}  // namespace dsgd
