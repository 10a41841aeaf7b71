#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsgd/example.hpp"
#include "dsgd/losses.hpp"
#include "dsgd/param_core.hpp"

namespace dsgd {

struct ComparatorOptions {
  /// Plain SGD passes used as a warm start.
  std::size_t sgd_passes = 5;
  /// Accelerated projected gradient iterations on the full objective.
  std::size_t gd_iterations = 200;
};

/// Reference batch solver for x* = argmin_{x in region} sum_t f_t(x).
/// centered_quadratic is solved in closed form. Margin losses get a few SGD
/// passes followed by accelerated projected gradient descent; the best of the
/// candidates (including 0) by total loss is returned.
ParameterVector batch_comparator(const LossSpec& loss, const FeasibleRegion& region, std::size_t dim,
                                 std::span<const SparseExample> stream, const ComparatorOptions& options = {});

/// f_t(x) for every example, in stream order.
std::vector<double> per_example_losses(const LossSpec& loss, const ParameterVector& x,
                                       std::span<const SparseExample> stream);

double total_loss(const LossSpec& loss, const ParameterVector& x, std::span<const SparseExample> stream);

}  // namespace dsgd
