#include "dsgd/ledger.hpp"

#include <sstream>

#include "dsgd/errors.hpp"

namespace dsgd {

void RegretLedger::reserve(std::size_t n) {
  losses_.reserve(n);
  cumulative_.reserve(n);
  mistakes_.reserve(n);
}

void RegretLedger::record(double loss, bool mistake) {
  losses_.push_back(loss);
  cumulative_.push_back(cumulative_.empty() ? loss : cumulative_.back() + loss);
  const std::uint64_t prev = mistakes_.empty() ? 0 : mistakes_.back();
  mistakes_.push_back(prev + (mistake ? 1 : 0));
}

double RegretLedger::progressive_error(std::size_t row) const {
  return static_cast<double>(mistakes_[row]) / static_cast<double>(row + 1);
}

double RegretLedger::final_progressive_error() const {
  return losses_.empty() ? 0.0 : progressive_error(losses_.size() - 1);
}

double RegretLedger::average_loss() const {
  return losses_.empty() ? 0.0 : total_loss() / static_cast<double>(losses_.size());
}

void RegretLedger::set_comparator(std::vector<double> losses) {
  if (losses.size() != losses_.size()) {
    throw StructuralError("comparator losses must have one entry per ledger row");
  }
  comparator_ = std::move(losses);
  comparator_cumulative_.resize(comparator_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < comparator_.size(); ++i) {
    sum += comparator_[i];
    comparator_cumulative_[i] = sum;
  }
}

double RegretLedger::regret_at(std::size_t row) const {
  if (!has_comparator()) throw ContractViolation("ledger has no comparator");
  return cumulative_[row] - comparator_cumulative_[row];
}

double RegretLedger::regret() const {
  if (losses_.empty()) return 0.0;
  return regret_at(losses_.size() - 1);
}

double RegretLedger::regret_after_warmup() const {
  if (!has_comparator()) throw ContractViolation("ledger has no comparator");
  if (warmup_ >= losses_.size()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = warmup_; i < losses_.size(); ++i) sum += losses_[i] - comparator_[i];
  return sum;
}

void RegretLedger::invalidate(std::string reason) {
  valid_ = false;
  invalid_reason_ = std::move(reason);
}

double DelayHistogram::mean() const {
  if (total_ == 0) return 0.0;
  double sum = 0.0;
  for (const auto& [d, c] : counts_) sum += static_cast<double>(d) * static_cast<double>(c);
  return sum / static_cast<double>(total_);
}

std::uint64_t DelayHistogram::median() const {
  if (total_ == 0) return 0;
  const std::uint64_t half = (total_ + 1) / 2;
  std::uint64_t seen = 0;
  for (const auto& [d, c] : counts_) {
    seen += c;
    if (seen >= half) return d;
  }
  return counts_.rbegin()->first;
}

std::uint64_t DelayHistogram::max() const { return counts_.empty() ? 0 : counts_.rbegin()->first; }

std::string DelayHistogram::to_csv() const {
  std::ostringstream out;
  out << "delay,count\n";
  for (const auto& [d, c] : counts_) out << d << ',' << c << '\n';
  return out.str();
}

}  // namespace dsgd
