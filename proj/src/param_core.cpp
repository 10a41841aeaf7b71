#include "dsgd/param_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dsgd {

SparseVector::SparseVector(std::vector<SparseEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (k > 0 && entries_[k].index <= entries_[k - 1].index) {
      throw StructuralError("sparse vector indices must be strictly increasing");
    }
    if (entries_[k].value == 0.0) {
      throw StructuralError("sparse vector must not store zeros");
    }
  }
}

SparseVector SparseVector::from_unsorted(std::vector<SparseEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  std::vector<SparseEntry> merged;
  merged.reserve(entries.size());
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().index == e.index) {
      merged.back().value += e.value;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const SparseEntry& e) { return e.value == 0.0; });
  SparseVector out;
  out.entries_ = std::move(merged);
  return out;
}

double SparseVector::squared_norm() const {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.value * e.value;
  return sum;
}

double SparseVector::norm() const { return std::sqrt(squared_norm()); }

std::span<const SparseEntry> SparseVector::slice(std::size_t begin, std::size_t end) const {
  auto by_index = [](const SparseEntry& e, std::size_t i) { return e.index < i; };
  auto lo = std::lower_bound(entries_.begin(), entries_.end(), begin, by_index);
  auto hi = std::lower_bound(lo, entries_.end(), end, by_index);
  return {lo, hi};
}

double ParameterVector::dot(const SparseVector& z) const {
  double sum = 0.0;
  for (const auto& e : z.entries()) {
    if (e.index >= values_.size()) throw StructuralError("feature index exceeds dimension");
    sum += e.value * values_[e.index];
  }
  return sum;
}

double ParameterVector::squared_norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return sum;
}

bool ParameterVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

FeasibleRegion FeasibleRegion::l2_ball(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw DomainError("l2 ball radius must be positive and finite");
  }
  return {Kind::l2_ball, radius};
}

double FeasibleRegion::diameter_squared() const {
  if (kind == Kind::unbounded) return std::numeric_limits<double>::infinity();
  return 2.0 * radius * radius;
}

double Schedule::eta(std::uint64_t t) const {
  if (t == 0) throw DomainError("schedule index t starts at 1");
  switch (kind) {
    case Kind::inv_sqrt_plain:
      return 1.0 / std::sqrt(static_cast<double>(t));
    case Kind::inv_sqrt_shifted:
      if (t <= tau) throw DomainError("shifted schedule evaluated at t <= tau (t=" + std::to_string(t) + ")");
      return sigma / std::sqrt(static_cast<double>(t - tau));
    case Kind::inv_linear_strong:
      if (t <= tau) throw DomainError("shifted schedule evaluated at t <= tau (t=" + std::to_string(t) + ")");
      return 1.0 / (lambda * static_cast<double>(t - tau));
  }
  throw DomainError("unknown schedule kind");
}

ParameterVector project(const ParameterVector& x, const FeasibleRegion& region) {
  if (!x.all_finite()) throw DomainError("cannot project a non-finite point");
  if (region.kind == FeasibleRegion::Kind::unbounded) return x;
  const double norm = std::sqrt(x.squared_norm());
  if (norm <= region.radius) return x;
  ParameterVector out = x;
  for (double& v : out.values()) v = v * region.radius / norm;
  return out;
}

ParameterVector axpy(const ParameterVector& x, double a, const SparseVector& g) {
  ParameterVector out = x;
  for (const auto& e : g.entries()) {
    if (e.index >= x.dim()) throw StructuralError("gradient index exceeds dimension");
    out[e.index] += a * e.value;
  }
  return out;
}

ScaledVector::ScaledVector(std::size_t dim, double fill)
    : values_(dim, fill), raw_sq_(static_cast<double>(dim) * fill * fill) {}

ScaledVector::ScaledVector(const ScaledVector& other)
    : values_(other.values_.size()), scale_(other.scale()), raw_sq_(load(other.raw_sq_)) {
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = other.raw(i);
}

ScaledVector& ScaledVector::operator=(const ScaledVector& other) {
  if (this != &other) {
    ScaledVector copy(other);
    *this = std::move(copy);
  }
  return *this;
}

double ScaledVector::dot(const SparseVector& z) const {
  double sum = 0.0;
  for (const auto& e : z.entries()) {
    if (e.index >= values_.size()) throw StructuralError("feature index exceeds dimension");
    sum += e.value * raw(e.index);
  }
  return scale() * sum;
}

double ScaledVector::squared_norm() const {
  const double s = scale();
  return s * s * std::max(0.0, load(raw_sq_));
}

void ScaledVector::shrink(double factor) {
  if (factor == 1.0) return;
  store(scale_, scale_ * factor);
  if (std::abs(scale_) < kFoldThreshold) fold();
}

void ScaledVector::add(const SparseVector& g, double a) {
  const double s = scale_;
  double sq = raw_sq_;
  for (const auto& e : g.entries()) {
    if (e.index >= values_.size()) throw StructuralError("gradient index exceeds dimension");
    const double old = values_[e.index];
    const double updated = old + (a * e.value) / s;
    store(values_[e.index], updated);
    sq += updated * updated - old * old;
  }
  store(raw_sq_, sq);
}

void ScaledVector::set_raw(std::size_t i, double value) {
  const double old = values_[i];
  store(values_[i], value);
  store(raw_sq_, raw_sq_ + value * value - old * old);
}

void ScaledVector::fold() {
  const double s = scale_;
  if (s != 1.0) {
    for (double& v : values_) store(v, v * s);
  }
  store(scale_, 1.0);
  recompute_norm();
}

void ScaledVector::recompute_norm() {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  store(raw_sq_, sq);
}

void ScaledVector::project(const FeasibleRegion& region) {
  if (region.kind == FeasibleRegion::Kind::unbounded) return;
  if (scale_ != 1.0) fold();
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw DomainError("cannot project a non-finite point");
  if (norm <= region.radius) {
    store(raw_sq_, sq);
    return;
  }
  for (double& v : values_) store(v, v * region.radius / norm);
  recompute_norm();
}

ParameterVector ScaledVector::materialize() const {
  ParameterVector out(values_.size());
  const double s = scale();
  for (std::size_t i = 0; i < values_.size(); ++i) out[i] = s * raw(i);
  return out;
}

}  // namespace dsgd
