#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <span>
#include <thread>

#include "dsgd/delayed_engine.hpp"

namespace dsgd {

struct AsyncConfig {
  enum class Mode { round_robin_strict, free_running };
  enum class ReadConsistency { snapshot, relaxed };

  std::size_t workers = 1;
  Mode mode = Mode::round_robin_strict;
  std::uint64_t max_delay = 100;
  ReadConsistency read_consistency = ReadConsistency::snapshot;

  void validate() const;
};

/// The shared iterate. Updates need the writer lock; relaxed readers go
/// straight to the coordinates, which are individually atomic.
class SharedState {
 public:
  explicit SharedState(std::size_t dim) : x_(dim) {}

  std::mutex& mutex() { return mutex_; }
  const ScaledVector& vector() const { return x_; }
  ScaledVector snapshot() const { return x_; }
  std::uint64_t counter() const { return counter_.load(std::memory_order_acquire); }

  /// Marks the calling thread as the current writer; paired with release_token().
  void acquire_token();
  void release_token();
  bool token_held_by_me() const;

  /// Same arithmetic as the simulator's step. Caller must hold the token.
  void apply_update(const SparseVector& g, double eta, const LossSpec& loss, const FeasibleRegion& region);

 private:
  std::mutex mutex_;
  ScaledVector x_;
  std::atomic<std::uint64_t> counter_{0};
  std::atomic<std::thread::id> writer_{};
};

/// RAII: lock the state's mutex and hold the update token.
class UpdateGuard {
 public:
  explicit UpdateGuard(SharedState& s) : state_(s), lock_(s.mutex()) { state_.acquire_token(); }
  ~UpdateGuard() { state_.release_token(); }
  UpdateGuard(const UpdateGuard&) = delete;
  UpdateGuard& operator=(const UpdateGuard&) = delete;

  std::unique_lock<std::mutex>& lock() { return lock_; }

 private:
  SharedState& state_;
  std::unique_lock<std::mutex> lock_;
};

/// Asynchronous engine: n workers compute gradients against the shared
/// iterate and apply them one at a time. Examples are dealt round-robin.
/// round_robin_strict fixes the update order to the example order, which
/// reproduces the simulator at tau = n - 1 (with drain_tail); free_running
/// applies updates as workers finish and measures the delay. The run's tau
/// and shifted-schedule tau are overridden with n - 1. `cancel` may be set
/// by another thread to stop early; the ledger then holds a consistent prefix
/// and is flagged invalid.
RunResult run_async(const AsyncConfig& cfg, const RunConfig& run, std::span<const SparseExample> stream,
                    const std::atomic<bool>* cancel = nullptr);

}  // namespace dsgd
