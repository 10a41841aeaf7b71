#include "dsgd/async_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <set>
#include <string>
#include <vector>

namespace dsgd {

void AsyncConfig::validate() const {
  if (workers == 0) throw DomainError("async engine needs at least one worker");
  if (max_delay == 0) throw DomainError("max_delay must be positive");
  if (max_delay + 1 < workers) throw DomainError("max_delay must be at least workers - 1");
}

void SharedState::acquire_token() { writer_.store(std::this_thread::get_id(), std::memory_order_relaxed); }

void SharedState::release_token() { writer_.store(std::thread::id{}, std::memory_order_relaxed); }

bool SharedState::token_held_by_me() const {
  return writer_.load(std::memory_order_relaxed) == std::this_thread::get_id();
}

void SharedState::apply_update(const SparseVector& g, double eta, const LossSpec& loss, const FeasibleRegion& region) {
  if (!token_held_by_me()) throw ContractViolation("apply_update called without holding the update token");
  apply_step(x_, g, eta, loss, region);
  counter_.fetch_add(1, std::memory_order_release);
}

namespace {

class AsyncRun {
 public:
  AsyncRun(const AsyncConfig& cfg, const RunConfig& run, std::span<const SparseExample> stream,
           const std::atomic<bool>* cancel)
      : cfg_(cfg), run_(run), stream_(stream), cancel_(cancel), state_(run.dimension) {
    const std::uint64_t n = cfg.workers;
    run_.tau = n - 1;
    if (run_.schedule.shifted()) run_.schedule.tau = n - 1;
    run_.validate();
    result_.ledger = RegretLedger(run_.tau);
    result_.ledger.reserve(stream.size());
  }

  RunResult execute() {
    const std::size_t n = std::min<std::size_t>(cfg_.workers, stream_.size());
    initial_reads_needed_ = n;
    {
      std::vector<std::jthread> threads;
      threads.reserve(n);
      for (std::size_t w = 0; w < n; ++w) {
        threads.emplace_back([this, w] { worker_main(w); });
      }
    }
    auto& traj = result_.trajectory;
    traj.steps = stream_.size();
    traj.updates_applied = state_.counter();
    traj.final_iterate = state_.vector().materialize();
    if (!failure_.empty()) {
      result_.ledger.invalidate(failure_);
    } else if (traj.updates_applied != stream_.size()) {
      result_.ledger.invalidate("cancelled after " + std::to_string(traj.updates_applied) + " updates");
    }
    return std::move(result_);
  }

 private:
  bool stopping() const {
    return aborted_ || (cancel_ != nullptr && cancel_->load(std::memory_order_relaxed));
  }

  // Waits on the condition; polls when an external cancel flag is attached.
  template <typename Pred>
  void wait(std::unique_lock<std::mutex>& lock, Pred pred) {
    if (cancel_ == nullptr) {
      cv_.wait(lock, pred);
      return;
    }
    while (!pred()) cv_.wait_for(lock, std::chrono::milliseconds(5));
  }

  void fail(const std::string& why) {
    std::lock_guard lock(state_.mutex());
    if (failure_.empty()) failure_ = why;
    aborted_ = true;
    cv_.notify_all();
  }

  Evaluation evaluate(const ScaledVector* snapshot, std::uint64_t t) {
    const SparseExample& ex = stream_[t - 1];
    Evaluation ev = snapshot != nullptr ? evaluate_example(run_.loss, *snapshot, ex)
                                        : evaluate_example(run_.loss, state_.vector(), ex);
    if (!std::isfinite(ev.loss)) throw DomainError("loss diverged at example " + std::to_string(t));
    return ev;
  }

  // Applies the gradient of example t; the caller holds the state mutex.
  void apply_locked(const Evaluation& ev, std::uint64_t t, std::uint64_t read_counter) {
    state_.acquire_token();
    const std::uint64_t k = state_.counter() + 1;
    const std::uint64_t step_index = k + run_.tau;
    state_.apply_update(ev.gradient, run_.schedule.eta(step_index), run_.loss, run_.region);
    state_.release_token();
    result_.ledger.record(ev.loss, ev.mistake);
    if (cfg_.mode == AsyncConfig::Mode::round_robin_strict) {
      // The first n - 1 turns are the warm-up slots, so every gradient lands
      // exactly tau steps after the iterate it was computed from.
      result_.delays.add(step_index - t);
    } else {
      result_.delays.add(k - 1 - read_counter);
    }
    if (run_.record_trajectory) result_.trajectory.applied_birth_steps.push_back(t);
  }

  void worker_main(std::size_t w) {
    try {
      if (cfg_.mode == AsyncConfig::Mode::round_robin_strict) {
        strict_worker(w);
      } else {
        free_worker(w);
      }
    } catch (const std::exception& e) {
      fail(std::string("worker ") + std::to_string(w) + " failed: " + e.what());
    }
  }

  void strict_worker(std::size_t w) {
    const std::uint64_t n = cfg_.workers;
    const std::uint64_t T = stream_.size();
    const bool snapshot_mode = cfg_.read_consistency == AsyncConfig::ReadConsistency::snapshot;
    std::uint64_t t = w + 1;
    ScaledVector snap;
    {
      std::unique_lock lock(state_.mutex());
      if (snapshot_mode) snap = state_.snapshot();
      ++initial_reads_;
      cv_.notify_all();
    }
    while (t <= T) {
      Evaluation ev = evaluate(snapshot_mode ? &snap : nullptr, t);
      std::unique_lock lock(state_.mutex());
      wait(lock, [&] {
        return stopping() || (state_.counter() == t - 1 && initial_reads_ == initial_reads_needed_);
      });
      if (stopping()) return;
      apply_locked(ev, t, 0);
      t += n;
      if (t <= T && snapshot_mode) snap = state_.snapshot();
      cv_.notify_all();
    }
  }

  void free_worker(std::size_t w) {
    const std::uint64_t n = cfg_.workers;
    const std::uint64_t T = stream_.size();
    const bool snapshot_mode = cfg_.read_consistency == AsyncConfig::ReadConsistency::snapshot;
    ScaledVector snap;
    for (std::uint64_t t = w + 1; t <= T; t += n) {
      std::uint64_t read_counter = 0;
      {
        std::unique_lock lock(state_.mutex());
        // Admit a new read only if every in-flight gradient, including this
        // one, stays within max_delay even if all others land first.
        wait(lock, [&] {
          if (stopping()) return true;
          if (in_flight_.empty()) return true;
          const std::uint64_t oldest = *in_flight_.begin();
          return (state_.counter() - oldest) + in_flight_.size() <= cfg_.max_delay;
        });
        if (stopping()) return;
        read_counter = state_.counter();
        in_flight_.insert(read_counter);
        if (snapshot_mode) snap = state_.snapshot();
      }
      Evaluation ev = evaluate(snapshot_mode ? &snap : nullptr, t);
      std::unique_lock lock(state_.mutex());
      if (stopping()) return;
      apply_locked(ev, t, read_counter);
      in_flight_.erase(in_flight_.find(read_counter));
      cv_.notify_all();
    }
  }

  const AsyncConfig& cfg_;
  RunConfig run_;
  std::span<const SparseExample> stream_;
  const std::atomic<bool>* cancel_;
  SharedState state_;
  std::condition_variable cv_;
  std::multiset<std::uint64_t> in_flight_;
  std::size_t initial_reads_ = 0;
  std::size_t initial_reads_needed_ = 0;
  bool aborted_ = false;
  std::string failure_;
  RunResult result_;
};

}  // namespace

RunResult run_async(const AsyncConfig& cfg, const RunConfig& run, std::span<const SparseExample> stream,
                    const std::atomic<bool>* cancel) {
  cfg.validate();
  if (stream.empty()) throw DomainError("stream must contain at least one example");
  AsyncRun engine(cfg, run, stream, cancel);
  return engine.execute();
}

}  // namespace dsgd
