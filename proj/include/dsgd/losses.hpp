#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dsgd/errors.hpp"
#include "dsgd/example.hpp"
#include "dsgd/param_core.hpp"

namespace dsgd {

enum class LossKind {
  smoothed_margin,     // 1/2 - chi | 1/2 (chi - 1)^2 | 0
  logistic,            // log(1 + e^-chi)
  squared,             // 1/2 (1 - chi)^2
  centered_quadratic,  // 1/2 |x - c|^2, not a margin loss
};

struct LossSpec {
  LossKind kind = LossKind::smoothed_margin;
  double l2_reg = 0.0;

  bool is_margin() const { return kind != LossKind::centered_quadratic; }
};

struct LossConstants {
  double L = 0.0;       // gradient norm bound
  double lambda = 0.0;  // strong convexity
  double H = 0.0;       // gradient Lipschitz constant
  double Lambda = 0.0;  // bound on |l'(chi)|
};

/// Scalar margin loss l(chi). centered_quadratic is rejected.
double margin_loss(LossKind kind, double chi);
/// l'(chi). At the smoothed-margin kink both branches give -1.
double margin_derivative(LossKind kind, double chi);
/// Max of l''(chi), the curvature used for H.
double margin_curvature(LossKind kind);

/// Constants for f(x) = l(y <z, x>) + l2/2 |x|^2 with |z| <= z_norm_bound.
/// `radius` enables the region-dependent terms (lambda_reg R for L; the
/// range of |l'| for the squared loss; the center-distance bound for
/// centered_quadratic).
LossConstants constants_for(const LossSpec& loss, double z_norm_bound,
                            std::optional<double> radius = std::nullopt);

/// Point types the loss helpers accept: ParameterVector and ScaledVector.
template <typename P>
concept Point = requires(const P& p, const SparseVector& z, std::size_t i) {
  { p.dim() } -> std::convertible_to<std::size_t>;
  { p.dot(z) } -> std::convertible_to<double>;
  { p.coord(i) } -> std::convertible_to<double>;
  { p.squared_norm() } -> std::convertible_to<double>;
};

namespace detail {

inline void check_example(const SparseExample& ex, std::size_t dim) {
  if (ex.features.extent() > dim) throw StructuralError("example index exceeds parameter dimension");
}

template <Point P>
double centered_value(const P& x, const SparseVector& c) {
  double sum = 0.0;
  auto it = c.entries().begin();
  const auto end = c.entries().end();
  for (std::size_t i = 0; i < x.dim(); ++i) {
    double ci = 0.0;
    if (it != end && it->index == i) {
      ci = it->value;
      ++it;
    }
    const double diff = x.coord(i) - ci;
    sum += diff * diff;
  }
  return 0.5 * sum;
}

}  // namespace detail

/// Margin y <z, x> (or 0 for centered_quadratic).
template <Point P>
double example_margin(const LossSpec& loss, const P& x, const SparseExample& ex) {
  if (!loss.is_margin()) return 0.0;
  return ex.label * x.dot(ex.features);
}

/// f_t(x) including the l2/2 |x|^2 term.
template <Point P>
double example_loss(const LossSpec& loss, const P& x, const SparseExample& ex) {
  detail::check_example(ex, x.dim());
  const double base = loss.is_margin() ? margin_loss(loss.kind, example_margin(loss, x, ex))
                                       : detail::centered_value(x, ex.features);
  if (loss.l2_reg == 0.0) return base;
  return base + 0.5 * loss.l2_reg * x.squared_norm();
}

/// Gradient of the unregularized loss term; L2 is applied lazily by engines.
template <Point P>
SparseVector example_gradient(const LossSpec& loss, const P& x, const SparseExample& ex) {
  detail::check_example(ex, x.dim());
  std::vector<SparseEntry> out;
  if (loss.is_margin()) {
    const double chi = example_margin(loss, x, ex);
    const double coef = ex.label * margin_derivative(loss.kind, chi);
    if (coef == 0.0) return {};
    out.reserve(ex.features.size());
    for (const auto& e : ex.features.entries()) {
      const double g = coef * e.value;
      if (g != 0.0) out.push_back({e.index, g});
    }
  } else {
    auto it = ex.features.entries().begin();
    const auto end = ex.features.entries().end();
    for (std::size_t i = 0; i < x.dim(); ++i) {
      double ci = 0.0;
      if (it != end && it->index == i) {
        ci = it->value;
        ++it;
      }
      const double g = x.coord(i) - ci;
      if (g != 0.0) out.push_back({i, g});
    }
  }
  return SparseVector(std::move(out));
}

struct Evaluation {
  double loss = 0.0;
  bool mistake = false;
  SparseVector gradient;
};

/// Loss, mistake flag and gradient from a single margin evaluation. Produces
/// exactly the values of example_loss / example_mistake / example_gradient.
template <Point P>
Evaluation evaluate_example(const LossSpec& loss, const P& x, const SparseExample& ex) {
  detail::check_example(ex, x.dim());
  if (!loss.is_margin()) {
    return {example_loss(loss, x, ex), false, example_gradient(loss, x, ex)};
  }
  Evaluation ev;
  const double chi = example_margin(loss, x, ex);
  ev.loss = margin_loss(loss.kind, chi);
  if (loss.l2_reg != 0.0) ev.loss = ev.loss + 0.5 * loss.l2_reg * x.squared_norm();
  ev.mistake = chi <= 0.0;
  const double coef = ex.label * margin_derivative(loss.kind, chi);
  if (coef != 0.0) {
    std::vector<SparseEntry> out;
    out.reserve(ex.features.size());
    for (const auto& e : ex.features.entries()) {
      const double g = coef * e.value;
      if (g != 0.0) out.push_back({e.index, g});
    }
    ev.gradient = SparseVector(std::move(out));
  }
  return ev;
}

/// Progressive-validation mistake: sign(<z, x>) disagrees with y, with a zero
/// margin counted as a mistake. Always false for centered_quadratic.
template <Point P>
bool example_mistake(const LossSpec& loss, const P& x, const SparseExample& ex) {
  if (!loss.is_margin()) return false;
  return example_margin(loss, x, ex) <= 0.0;
}

}  // namespace dsgd
