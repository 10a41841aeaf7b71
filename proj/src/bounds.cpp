#include "dsgd/bounds.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <map>

#include "dsgd/errors.hpp"

namespace dsgd {

namespace {

void check_common(const BoundInputs& in) {
  if (!(in.T >= 1.0)) throw DomainError("bound needs T >= 1");
  if (!(in.tau >= 0.0)) throw DomainError("bound needs tau >= 0");
  if (!(in.F > 0.0) || !(in.L >= 0.0)) throw DomainError("bound needs F > 0 and L >= 0");
}

// Shared shape of the Lipschitz / alpha / Bregman bounds; `c` scales the delay terms.
double delayed_sqrt_bound(const BoundInputs& in, double c, bool optimal, const char* name) {
  check_common(in);
  const double sqrtT = std::sqrt(in.T);
  if (optimal) {
    if (in.tau * c < 1.0) {
      throw DomainError(std::string(name) + ": optimal-sigma form needs tau * c >= 1");
    }
    if (in.T < in.tau * in.tau) throw DomainError(std::string(name) + ": optimal-sigma form needs T >= tau^2");
    return 4.0 * in.F * in.L * std::sqrt(c * in.tau * in.T);
  }
  if (!(in.sigma > 0.0)) throw DomainError(std::string(name) + ": sigma must be positive");
  const double L2 = in.L * in.L;
  return in.sigma * L2 * sqrtT + in.F * in.F * sqrtT / in.sigma + L2 * c * in.sigma * in.tau * in.tau / 2.0 +
         2.0 * L2 * c * in.sigma * in.tau * sqrtT;
}

}  // namespace

double bound_lipschitz(const BoundInputs& in, bool optimal_sigma) {
  return delayed_sqrt_bound(in, 1.0, optimal_sigma, "bound_lipschitz");
}

double bound_alpha(const BoundInputs& in, bool optimal_sigma) {
  if (!(in.alpha >= 0.0 && in.alpha <= 1.0)) throw DomainError("bound_alpha: alpha must lie in [0, 1]");
  return delayed_sqrt_bound(in, in.alpha, optimal_sigma, "bound_alpha");
}

double bound_bregman(const BoundInputs& in, bool optimal_sigma) {
  if (!(in.Phi > 0.0)) throw DomainError("bound_bregman: Phi must be positive");
  return delayed_sqrt_bound(in, in.Phi, optimal_sigma, "bound_bregman");
}

double bound_strong(const BoundInputs& in) {
  check_common(in);
  if (!(in.lambda > 0.0)) throw DomainError("bound_strong: lambda must be positive");
  return in.lambda * in.tau * in.F * in.F +
         (0.5 + in.tau) * (in.L * in.L / in.lambda) * (1.0 + in.tau + std::log(in.T));
}

double bound_smooth(const BoundInputs& in) {
  check_common(in);
  if (in.tau > 0.0 && in.H < in.L / (4.0 * in.F * std::sqrt(in.tau))) {
    throw DomainError("bound_smooth: requires H >= L / (4 F sqrt(tau))");
  }
  const double F = in.F;
  const double L = in.L;
  const double H = in.H;
  return (28.3 * F * F * H + (2.0 / 3.0) * F * L + (4.0 / 3.0) * F * F * H * std::log(in.T)) * in.tau * in.tau +
         (8.0 / 3.0) * F * L * std::sqrt(in.T);
}

double bound_smooth_strong(const BoundInputs& in) {
  check_common(in);
  if (!(in.lambda > 0.0)) throw DomainError("bound_smooth_strong: lambda must be positive");
  if (in.tau < 1.0) throw DomainError("bound_smooth_strong: requires tau >= 1 (log(3 tau + H tau / lambda))");
  const double lam = in.lambda;
  const double L2 = in.L * in.L;
  const double tau = in.tau;
  const double inner = lam * tau * in.F * in.F +
                       (0.5 + tau) * (L2 / lam) * (1.0 + tau + std::log(3.0 * tau + in.H * tau / lam)) +
                       (L2 / (2.0 * lam)) * (1.0 + std::log(in.T)) +
                       std::numbers::pi * std::numbers::pi * tau * tau * in.H * L2 / (6.0 * lam * lam);
  return (10.0 / 9.0) * inner;
}

double optimal_sigma(double F, double L, double tau, double c) {
  if (!(tau * c > 0.0) || !(L > 0.0)) throw DomainError("optimal sigma needs tau * c > 0 and L > 0");
  return std::sqrt(F * F / (2.0 * tau * c * L * L));
}

double estimate_alpha(std::span<const SparseVector> sample, double Lambda, double L) {
  if (sample.empty()) throw DomainError("estimate_alpha needs a non-empty sample");
  if (!(L > 0.0)) throw DomainError("estimate_alpha needs L > 0");
  std::map<std::size_t, double> sums;
  for (const auto& z : sample) {
    for (const auto& e : z.entries()) sums[e.index] += e.value;
  }
  const double m = static_cast<double>(sample.size());
  double mu_sq = 0.0;
  for (const auto& [i, s] : sums) {
    const double mu = s / m;
    mu_sq += mu * mu;
  }
  return Lambda * Lambda * mu_sq / (L * L);
}

}  // namespace dsgd
