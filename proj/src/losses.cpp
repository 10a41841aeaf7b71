#include "dsgd/losses.hpp"

#include <cmath>

namespace dsgd {

namespace {

void require_margin(LossKind kind) {
  if (kind == LossKind::centered_quadratic) {
    throw DomainError("centered_quadratic is not a scalar margin loss");
  }
}

void require_finite(double chi) {
  if (!std::isfinite(chi)) throw DomainError("margin must be finite");
}

}  // namespace

double margin_loss(LossKind kind, double chi) {
  require_margin(kind);
  require_finite(chi);
  switch (kind) {
    case LossKind::smoothed_margin:
      if (chi <= 0.0) return 0.5 - chi;
      if (chi <= 1.0) return 0.5 * (chi - 1.0) * (chi - 1.0);
      return 0.0;
    case LossKind::logistic:
      // log(1 + e^-chi) without overflow for large |chi|
      if (chi >= 0.0) return std::log1p(std::exp(-chi));
      return -chi + std::log1p(std::exp(chi));
    case LossKind::squared:
      return 0.5 * (1.0 - chi) * (1.0 - chi);
    case LossKind::centered_quadratic:
      break;
  }
  throw DomainError("unknown loss kind");
}

double margin_derivative(LossKind kind, double chi) {
  require_margin(kind);
  require_finite(chi);
  switch (kind) {
    case LossKind::smoothed_margin:
      if (chi <= 0.0) return -1.0;
      if (chi <= 1.0) return chi - 1.0;
      return 0.0;
    case LossKind::logistic:
      // -sigmoid(-chi)
      if (chi >= 0.0) {
        const double e = std::exp(-chi);
        return -e / (1.0 + e);
      }
      return -1.0 / (1.0 + std::exp(chi));
    case LossKind::squared:
      return chi - 1.0;
    case LossKind::centered_quadratic:
      break;
  }
  throw DomainError("unknown loss kind");
}

double margin_curvature(LossKind kind) {
  switch (kind) {
    case LossKind::smoothed_margin:
      return 1.0;  // quadratic segment only; the loss is merely C^1
    case LossKind::logistic:
      return 0.25;
    case LossKind::squared:
    case LossKind::centered_quadratic:
      return 1.0;
  }
  throw DomainError("unknown loss kind");
}

LossConstants constants_for(const LossSpec& loss, double z_norm_bound, std::optional<double> radius) {
  if (!(z_norm_bound > 0.0)) throw DomainError("z_norm_bound must be positive");
  if (radius && !(*radius > 0.0)) throw DomainError("radius must be positive");
  LossConstants c;
  c.lambda = loss.l2_reg;
  const double inf = std::numeric_limits<double>::infinity();
  switch (loss.kind) {
    case LossKind::smoothed_margin:
    case LossKind::logistic:
      c.Lambda = 1.0;
      break;
    case LossKind::squared:
      // |l'(chi)| = |1 - chi| <= 1 + |z| R on the ball
      c.Lambda = radius ? 1.0 + z_norm_bound * *radius : inf;
      break;
    case LossKind::centered_quadratic:
      c.Lambda = 1.0;
      c.lambda += 1.0;
      c.L = radius ? *radius + z_norm_bound : inf;
      c.H = 1.0 + loss.l2_reg;
      if (radius) c.L += loss.l2_reg * *radius;
      return c;
  }
  c.L = c.Lambda * z_norm_bound;
  if (radius) c.L += loss.l2_reg * *radius;
  c.H = margin_curvature(loss.kind) * z_norm_bound * z_norm_bound + loss.l2_reg;
  return c;
}

}  // namespace dsgd
