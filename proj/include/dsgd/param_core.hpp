#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dsgd/errors.hpp"

namespace dsgd {

struct SparseEntry {
  std::size_t index = 0;
  double value = 0.0;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sorted sparse vector: strictly increasing indices, no stored zeros.
class SparseVector {
 public:
  SparseVector() = default;

  /// Takes entries that already satisfy the invariant; throws StructuralError
  /// otherwise. Zero values are rejected too.
  explicit SparseVector(std::vector<SparseEntry> entries);

  /// Sorts, sums duplicate indices and drops zeros.
  static SparseVector from_unsorted(std::vector<SparseEntry> entries);

  std::span<const SparseEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// One past the largest index, 0 when empty.
  std::size_t extent() const { return entries_.empty() ? 0 : entries_.back().index + 1; }
  double squared_norm() const;
  double norm() const;

  /// Entries whose index lies in [begin, end).
  std::span<const SparseEntry> slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  std::vector<SparseEntry> entries_;
};

/// Dense iterate x. Length fixed at construction.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  explicit ParameterVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double coord(std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double dot(const SparseVector& z) const;
  double squared_norm() const;
  bool all_finite() const;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<double> values_;
};

struct FeasibleRegion {
  enum class Kind { unbounded, l2_ball };

  Kind kind = Kind::unbounded;
  double radius = 0.0;

  static FeasibleRegion unbounded() { return {}; }
  static FeasibleRegion l2_ball(double radius);

  /// F^2 = max D(x||x') = 2R^2 for the ball; infinite when unbounded.
  double diameter_squared() const;
};

struct Schedule {
  enum class Kind { inv_sqrt_shifted, inv_sqrt_plain, inv_linear_strong };

  Kind kind = Kind::inv_sqrt_plain;
  double sigma = 1.0;
  double lambda = 1.0;
  std::uint64_t tau = 0;

  /// sigma / sqrt(t - tau), 1 / sqrt(t), or 1 / (lambda (t - tau)).
  double eta(std::uint64_t t) const;
  bool shifted() const { return kind != Kind::inv_sqrt_plain; }
};

ParameterVector project(const ParameterVector& x, const FeasibleRegion& region);
ParameterVector axpy(const ParameterVector& x, double a, const SparseVector& g);

/// Lazily scaled iterate x = s * v. L2 shrinkage multiplies s; sparse gradient
/// steps touch only the affected coordinates of v. Every element access is a
/// relaxed atomic load/store so a vector guarded by a writer lock can be read
/// coordinate-wise by other threads without torn reads.
class ScaledVector {
 public:
  static constexpr double kFoldThreshold = 1e-6;

  ScaledVector() = default;
  explicit ScaledVector(std::size_t dim, double fill = 0.0);
  ScaledVector(const ScaledVector& other);
  ScaledVector& operator=(const ScaledVector& other);
  ScaledVector(ScaledVector&&) noexcept = default;
  ScaledVector& operator=(ScaledVector&&) noexcept = default;

  std::size_t dim() const { return values_.size(); }
  double scale() const { return load(scale_); }
  double raw(std::size_t i) const { return load(values_[i]); }
  double coord(std::size_t i) const { return scale() * raw(i); }
  /// Unscaled storage; only for the thread that owns the vector.
  std::span<const double> raw_values() const { return values_; }
  /// |v|^2 as tracked incrementally.
  double raw_squared_norm() const { return load(raw_sq_); }

  /// s * sum_i z_i v_i, summed in index order.
  double dot(const SparseVector& z) const;
  /// s^2 * |v|^2 from an incrementally maintained accumulator.
  double squared_norm() const;

  /// x <- factor * x. Folds s into v when |s| drops below kFoldThreshold.
  void shrink(double factor);
  /// x <- x + a * g, i.e. v_i += (a * g_i) / s on g's support.
  void add(const SparseVector& g, double a);
  /// Overwrites v_i, keeping the norm accumulator in sync.
  void set_raw(std::size_t i, double value);
  void fold();
  void project(const FeasibleRegion& region);
  void recompute_norm();

  ParameterVector materialize() const;

 private:
  static double load(const double& d) {
    return std::atomic_ref<double>(const_cast<double&>(d)).load(std::memory_order_relaxed);
  }
  static void store(double& d, double value) {
    std::atomic_ref<double>(d).store(value, std::memory_order_relaxed);
  }

  std::vector<double> values_;
  double scale_ = 1.0;
  double raw_sq_ = 0.0;
};

}  // namespace dsgd
