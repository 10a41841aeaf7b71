#include "dsgd/delayed_engine.hpp"

#include <cmath>
#include <string>

namespace dsgd {

void RunConfig::validate() const {
  if (dimension == 0) throw DomainError("dimension must be positive");
  if (schedule.shifted() && schedule.tau != tau) {
    throw DomainError("shifted schedule tau (" + std::to_string(schedule.tau) +
                      ") must match the run delay (" + std::to_string(tau) + ")");
  }
  if (loss.l2_reg < 0.0) throw DomainError("l2 regularization must be non-negative");
}

std::optional<TaggedGradient> DelayBuffer::push(TaggedGradient g) {
  if (capacity_ == 0) return g;
  slots_.push_back(std::move(g));
  if (slots_.size() > capacity_) return pop();
  return std::nullopt;
}

std::optional<TaggedGradient> DelayBuffer::pop() {
  if (slots_.empty()) return std::nullopt;
  TaggedGradient front = std::move(slots_.front());
  slots_.pop_front();
  return front;
}

void apply_step(ScaledVector& x, const SparseVector& g, double eta, const LossSpec& loss,
                const FeasibleRegion& region) {
  if (loss.l2_reg != 0.0) x.shrink(1.0 - eta * loss.l2_reg);
  x.add(g, -eta);
  x.project(region);
}

void step(DelayedState& state, const SparseVector& g_delayed, std::uint64_t t) {
  const RunConfig& cfg = *state.config;
  if (t <= cfg.tau) {
    throw ContractViolation("step called at t=" + std::to_string(t) + " <= tau=" + std::to_string(cfg.tau));
  }
  apply_step(state.x, g_delayed, cfg.schedule.eta(t), cfg.loss, cfg.region);
}

RunResult run(const RunConfig& config, std::span<const SparseExample> stream) {
  config.validate();
  if (stream.empty()) throw DomainError("stream must contain at least one example");

  const std::uint64_t T = stream.size();
  RunResult result;
  result.ledger = RegretLedger(config.tau);
  result.ledger.reserve(T);
  if (config.tau >= T) {
    result.trajectory.warnings.push_back("tau >= T: no delayed gradient is applied within the stream");
  }

  DelayedState state{&config, ScaledVector(config.dimension)};
  DelayBuffer buffer(config.tau);
  auto& traj = result.trajectory;
  if (config.record_trajectory) traj.iterates.push_back(state.x.materialize());

  auto apply = [&](const TaggedGradient& g, std::uint64_t t) {
    step(state, g.gradient, t);
    ++traj.updates_applied;
    result.delays.add(t - g.birth_step);
    if (config.record_trajectory) traj.applied_birth_steps.push_back(g.birth_step);
  };

  for (std::uint64_t t = 1; t <= T; ++t) {
    const SparseExample& ex = stream[t - 1];
    Evaluation ev = evaluate_example(config.loss, state.x, ex);
    if (!std::isfinite(ev.loss)) throw DomainError("loss diverged at step " + std::to_string(t));
    result.ledger.record(ev.loss, ev.mistake);
    auto delayed = buffer.push({std::move(ev.gradient), t});
    if (delayed) apply(*delayed, t);
    if (config.record_trajectory) traj.iterates.push_back(state.x.materialize());
  }

  if (config.drain_tail) {
    std::uint64_t t = T;
    while (auto g = buffer.pop()) {
      ++t;
      apply(*g, t);
      if (config.record_trajectory) traj.iterates.push_back(state.x.materialize());
    }
  }

  traj.steps = T;
  traj.final_iterate = state.x.materialize();
  return result;
}

}  // namespace dsgd
