#pragma once
// Reference implementations written directly from the textbook definitions.
// They share no code with the library beyond the data types.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "dsgd/example.hpp"
#include "dsgd/param_core.hpp"

namespace oracle {

enum class Loss { smoothed_margin, logistic, squared, centered_quadratic };

inline double loss_value(Loss k, double chi) {
  switch (k) {
    case Loss::smoothed_margin:
      return chi <= 0.0 ? 0.5 - chi : (chi <= 1.0 ? 0.5 * (chi - 1.0) * (chi - 1.0) : 0.0);
    case Loss::logistic:
      return chi >= 0.0 ? std::log1p(std::exp(-chi)) : -chi + std::log1p(std::exp(chi));
    case Loss::squared:
      return 0.5 * (1.0 - chi) * (1.0 - chi);
    default:
      return 0.0;
  }
}

// l'(chi); the logistic form is the numerically stable sigmoid.
inline double loss_slope(Loss k, double chi) {
  switch (k) {
    case Loss::smoothed_margin:
      return chi <= 0.0 ? -1.0 : (chi <= 1.0 ? chi - 1.0 : 0.0);
    case Loss::logistic:
      if (chi >= 0.0) {
        const double e = std::exp(-chi);
        return -e / (1.0 + e);
      }
      return -1.0 / (1.0 + std::exp(chi));
    case Loss::squared:
      return chi - 1.0;
    default:
      return 0.0;
  }
}

struct Config {
  Loss loss = Loss::smoothed_margin;
  std::uint64_t tau = 0;
  double radius = 0.0;  // 0 = unbounded
  // eta(t) for the step that applies a gradient at step t
  std::function<double(std::uint64_t)> eta;
};

struct Trace {
  std::vector<double> losses;
  std::vector<int> mistakes;
  std::vector<std::vector<double>> iterates;  // x_1 .. x_{T+1}
};

inline double dense_dot(const std::vector<double>& x, const dsgd::SparseVector& z) {
  double s = 0.0;
  for (const auto& e : z.entries()) s += e.value * x[e.index];
  return s;
}

// Plain projected SGD with a delay line: loss at x_t, then x <- P(x - eta_t g_{t-tau}).
inline Trace projected_sgd(const Config& c, std::size_t d, const std::vector<dsgd::SparseExample>& stream) {
  Trace tr;
  std::vector<double> x(d, 0.0);
  std::vector<std::vector<double>> grads;  // dense
  tr.iterates.push_back(x);
  for (std::size_t t = 1; t <= stream.size(); ++t) {
    const auto& ex = stream[t - 1];
    std::vector<double> g(d, 0.0);
    if (c.loss == Loss::centered_quadratic) {
      std::vector<double> center(d, 0.0);
      for (const auto& e : ex.features.entries()) center[e.index] = e.value;
      double v = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = x[i] - center[i];
        v += diff * diff;
        g[i] = diff;
      }
      tr.losses.push_back(0.5 * v);
      tr.mistakes.push_back(0);
    } else {
      const double chi = ex.label * dense_dot(x, ex.features);
      tr.losses.push_back(loss_value(c.loss, chi));
      tr.mistakes.push_back(chi <= 0.0 ? 1 : 0);
      const double coef = ex.label * loss_slope(c.loss, chi);
      for (const auto& e : ex.features.entries()) g[e.index] = coef * e.value;
    }
    grads.push_back(std::move(g));
    if (t > c.tau) {
      const auto& gd = grads[t - 1 - c.tau];
      const double eta = c.eta(t);
      for (std::size_t i = 0; i < d; ++i) {
        if (gd[i] != 0.0) x[i] = x[i] - eta * gd[i];
      }
      if (c.radius > 0.0) {
        double sq = 0.0;
        for (double v : x) sq += v * v;
        const double n = std::sqrt(sq);
        if (n > c.radius) {
          for (double& v : x) v = v * c.radius / n;
        }
      }
    }
    tr.iterates.push_back(x);
  }
  return tr;
}

// Exponentiated gradient: x_i <- x_i exp(-eta g_i), x_1 = 1/d.
inline std::vector<std::vector<double>> exponentiated_gradient(std::size_t d, const std::vector<std::vector<double>>& grads,
                                                              const std::function<double(std::uint64_t)>& eta) {
  std::vector<std::vector<double>> out;
  std::vector<double> x(d, 1.0 / static_cast<double>(d));
  out.push_back(x);
  for (std::size_t t = 0; t < grads.size(); ++t) {
    for (std::size_t i = 0; i < d; ++i) x[i] *= std::exp(-eta(t + 1) * grads[t][i]);
    out.push_back(x);
  }
  return out;
}

// Frobenius norm of the mean of z_a z_b^T over all ordered pairs (brute force).
inline double pairwise_outer_frobenius(const std::vector<dsgd::SparseVector>& sample, std::size_t d) {
  std::vector<double> m(d * d, 0.0);
  const double n = static_cast<double>(sample.size());
  for (const auto& a : sample) {
    for (const auto& b : sample) {
      for (const auto& ea : a.entries()) {
        for (const auto& eb : b.entries()) m[ea.index * d + eb.index] += ea.value * eb.value / (n * n);
      }
    }
  }
  double s = 0.0;
  for (double v : m) s += v * v;
  return std::sqrt(s);
}

}  // namespace oracle
