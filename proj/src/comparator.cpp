#include "dsgd/comparator.hpp"

#include <algorithm>
#include <cmath>

#include "dsgd/delayed_engine.hpp"

namespace dsgd {

std::vector<double> per_example_losses(const LossSpec& loss, const ParameterVector& x,
                                       std::span<const SparseExample> stream) {
  std::vector<double> out;
  out.reserve(stream.size());
  for (const auto& ex : stream) out.push_back(example_loss(loss, x, ex));
  return out;
}

double total_loss(const LossSpec& loss, const ParameterVector& x, std::span<const SparseExample> stream) {
  double sum = 0.0;
  for (const auto& ex : stream) sum += example_loss(loss, x, ex);
  return sum;
}

namespace {

void project_inplace(ParameterVector& x, const FeasibleRegion& region) {
  if (region.kind == FeasibleRegion::Kind::unbounded) return;
  x = project(x, region);
}

ParameterVector quadratic_minimizer(const LossSpec& loss, const FeasibleRegion& region, std::size_t dim,
                                    std::span<const SparseExample> stream) {
  // sum_t 1/2 |x - c_t|^2 + l2/2 |x|^2 is isotropic, so projecting the free
  // minimizer gives the constrained one.
  ParameterVector x(dim);
  for (const auto& ex : stream) {
    for (const auto& e : ex.features.entries()) x[e.index] += e.value;
  }
  const double denom = static_cast<double>(stream.size()) * (1.0 + loss.l2_reg);
  for (std::size_t i = 0; i < dim; ++i) x[i] /= denom;
  project_inplace(x, region);
  return x;
}

// Gradient of (1/T) sum_t f_t at x, dense.
std::vector<double> mean_gradient(const LossSpec& loss, const ParameterVector& x,
                                  std::span<const SparseExample> stream) {
  std::vector<double> g(x.dim(), 0.0);
  for (const auto& ex : stream) {
    const double chi = example_margin(loss, x, ex);
    const double coef = ex.label * margin_derivative(loss.kind, chi);
    if (coef == 0.0) continue;
    for (const auto& e : ex.features.entries()) g[e.index] += coef * e.value;
  }
  const double inv = 1.0 / static_cast<double>(stream.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * inv + loss.l2_reg * x[i];
  return g;
}

ParameterVector sgd_warm_start(const LossSpec& loss, const FeasibleRegion& region, std::size_t dim,
                               std::span<const SparseExample> stream, std::size_t passes) {
  ScaledVector x(dim);
  std::uint64_t t = 0;
  for (std::size_t p = 0; p < passes; ++p) {
    for (const auto& ex : stream) {
      ++t;
      const double eta =
          loss.l2_reg > 0.0 ? 1.0 / (loss.l2_reg * static_cast<double>(t)) : 1.0 / std::sqrt(static_cast<double>(t));
      apply_step(x, example_gradient(loss, x, ex), eta, loss, region);
    }
  }
  return x.materialize();
}

ParameterVector accelerated_descent(const LossSpec& loss, const FeasibleRegion& region, ParameterVector start,
                                    std::span<const SparseExample> stream, std::size_t iterations) {
  double zmax = 0.0;
  for (const auto& ex : stream) zmax = std::max(zmax, ex.features.squared_norm());
  const double H = margin_curvature(loss.kind) * zmax + loss.l2_reg;
  if (!(H > 0.0)) return start;
  const double step = 1.0 / H;
  const std::size_t d = start.dim();

  ParameterVector x = start;
  ParameterVector y = start;
  ParameterVector best = start;
  double best_value = total_loss(loss, start, stream);
  double theta = 1.0;
  for (std::size_t k = 0; k < iterations; ++k) {
    const auto g = mean_gradient(loss, y, stream);
    ParameterVector next(d);
    for (std::size_t i = 0; i < d; ++i) next[i] = y[i] - step * g[i];
    project_inplace(next, region);
    const double value = total_loss(loss, next, stream);
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    if (value > best_value) {
      // Restart the momentum whenever the objective goes up.
      theta = 1.0;
      y = best;
      x = best;
      continue;
    }
    best_value = value;
    best = next;
    const double beta = (theta - 1.0) / theta_next;
    for (std::size_t i = 0; i < d; ++i) y[i] = next[i] + beta * (next[i] - x[i]);
    x = std::move(next);
    theta = theta_next;
  }
  return best;
}

}  // namespace

ParameterVector batch_comparator(const LossSpec& loss, const FeasibleRegion& region, std::size_t dim,
                                 std::span<const SparseExample> stream, const ComparatorOptions& options) {
  if (dim == 0) throw DomainError("dimension must be positive");
  if (stream.empty()) throw DomainError("comparator needs a non-empty stream");
  if (!loss.is_margin()) return quadratic_minimizer(loss, region, dim, stream);

  ParameterVector zero(dim);
  ParameterVector best = zero;
  double best_value = total_loss(loss, zero, stream);
  auto consider = [&](const ParameterVector& candidate) {
    const double value = total_loss(loss, candidate, stream);
    if (std::isfinite(value) && value < best_value) {
      best_value = value;
      best = candidate;
    }
  };
  if (options.sgd_passes > 0) consider(sgd_warm_start(loss, region, dim, stream, options.sgd_passes));
  if (options.gd_iterations > 0) consider(accelerated_descent(loss, region, best, stream, options.gd_iterations));
  return best;
}

}  // namespace dsgd
