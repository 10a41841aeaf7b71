#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsgd/param_core.hpp"

namespace dsgd {

/// Per-step record of f_t(x_t) plus the comparator's per-step losses, giving
/// R = sum f_t(x_t) - f_t(x*). Cumulative columns are exact prefix sums in
/// step order. Regret is stored signed, never clamped.
class RegretLedger {
 public:
  RegretLedger() = default;
  explicit RegretLedger(std::uint64_t warmup) : warmup_(warmup) {}

  void reserve(std::size_t n);
  void record(double loss, bool mistake);

  std::size_t size() const { return losses_.size(); }
  std::uint64_t warmup() const { return warmup_; }
  void set_warmup(std::uint64_t w) { warmup_ = w; }

  double loss(std::size_t row) const { return losses_[row]; }
  double cumulative_loss(std::size_t row) const { return cumulative_[row]; }
  double total_loss() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  /// Fraction of mistakes among rows 0..row.
  double progressive_error(std::size_t row) const;
  double final_progressive_error() const;
  double average_loss() const;
  std::uint64_t mistakes() const { return mistakes_.empty() ? 0 : mistakes_.back(); }

  /// Per-step comparator losses f_t(x*), one per row.
  void set_comparator(std::vector<double> losses);
  bool has_comparator() const { return !comparator_cumulative_.empty(); }
  double comparator_cumulative(std::size_t row) const { return comparator_cumulative_[row]; }
  /// cumulative loss minus comparator prefix at `row`.
  double regret_at(std::size_t row) const;
  /// Regret over all rows.
  double regret() const;
  /// Regret over rows after the first `warmup()` steps.
  double regret_after_warmup() const;

  bool valid() const { return valid_; }
  void invalidate(std::string reason);
  const std::string& invalid_reason() const { return invalid_reason_; }

 private:
  std::uint64_t warmup_ = 0;
  std::vector<double> losses_;
  std::vector<double> cumulative_;
  std::vector<std::uint64_t> mistakes_;
  std::vector<double> comparator_;
  std::vector<double> comparator_cumulative_;
  bool valid_ = true;
  std::string invalid_reason_;
};

/// delay -> number of applied gradients with that delay.
class DelayHistogram {
 public:
  void add(std::uint64_t delay) { ++counts_[delay]; ++total_; }
  std::uint64_t total() const { return total_; }
  const std::map<std::uint64_t, std::uint64_t>& counts() const { return counts_; }
  double mean() const;
  std::uint64_t median() const;
  std::uint64_t max() const;
  /// "delay,count" with one row per observed delay.
  std::string to_csv() const;

 private:
  std::map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

struct TrajectorySummary {
  ParameterVector final_iterate;
  std::uint64_t steps = 0;            // examples processed
  std::uint64_t updates_applied = 0;
  std::vector<std::string> warnings;
  bool clamped = false;               // mirror exp overflow/underflow was clamped
  std::vector<ParameterVector> iterates;           // x_1..x_{T+1}, if recorded
  std::vector<std::uint64_t> applied_birth_steps;  // per update, if recorded
};

struct RunResult {
  TrajectorySummary trajectory;
  RegretLedger ledger;
  DelayHistogram delays;
};

}  // namespace dsgd
