#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>

#include "dsgd/example.hpp"
#include "dsgd/ledger.hpp"
#include "dsgd/losses.hpp"
#include "dsgd/param_core.hpp"

namespace dsgd {

struct RunConfig {
  std::uint64_t tau = 0;
  Schedule schedule;
  FeasibleRegion region;
  LossSpec loss;
  std::size_t dimension = 1;
  std::uint64_t seed = 0;
  /// Apply the τ gradients still queued after the stream ends, at steps
  /// T+1..T+τ. Off by default: the trajectory then has T+1 iterates.
  bool drain_tail = false;
  /// Keep every iterate and the birth step of every applied gradient.
  bool record_trajectory = false;

  void validate() const;
};

/// A gradient tagged with the step whose iterate produced it.
struct TaggedGradient {
  SparseVector gradient;
  std::uint64_t birth_step = 0;
};

/// FIFO realising g_{t - τ}: push returns the gradient pushed τ pushes ago
/// once the buffer is warm. Capacity 0 is pass-through.
class DelayBuffer {
 public:
  explicit DelayBuffer(std::uint64_t capacity) : capacity_(capacity) {}

  std::optional<TaggedGradient> push(TaggedGradient g);
  std::optional<TaggedGradient> pop();
  std::size_t size() const { return slots_.size(); }
  std::uint64_t capacity() const { return capacity_; }

 private:
  std::uint64_t capacity_;
  std::deque<TaggedGradient> slots_;
};

/// Lazily regularised projected step x <- Proj((1 - eta λ) x - eta g).
/// Shared by every engine so that their arithmetic is identical.
void apply_step(ScaledVector& x, const SparseVector& g, double eta, const LossSpec& loss,
                const FeasibleRegion& region);

/// Engine state for step(): the iterate and the config it runs under.
struct DelayedState {
  const RunConfig* config = nullptr;
  ScaledVector x;
};

/// One delayed update at step t (requires t > τ).
void step(DelayedState& state, const SparseVector& g_delayed, std::uint64_t t);

/// Delayed SGD over `stream`: the loss at step t is evaluated at x_t, the
/// gradient g_t is queued, and g_{t-τ} is applied. The first τ steps only
/// fill the queue.
RunResult run(const RunConfig& config, std::span<const SparseExample> stream);

}  // namespace dsgd
