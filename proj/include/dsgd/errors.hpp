#pragma once

#include <stdexcept>
#include <string>

namespace dsgd {

/// Input outside the mathematical domain of an operation (non-finite values,
/// t <= tau for shifted schedules, unmet bound preconditions, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Shape mismatch: index out of range, misaligned slices, dimension mismatch.
class StructuralError : public std::out_of_range {
 public:
  explicit StructuralError(const std::string& what) : std::out_of_range(what) {}
};

/// Caller broke an engine contract (e.g. stepping before the first delayed
/// gradient exists).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace dsgd
