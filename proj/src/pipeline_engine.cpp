#include "dsgd/pipeline_engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "dsgd/bounded_queue.hpp"

namespace dsgd {

ShardPlan plan_shards(std::size_t d, std::size_t shards) {
  if (d == 0) throw DomainError("dimension must be positive");
  if (shards == 0) throw DomainError("need at least one shard");
  if (shards > d) throw DomainError("more shards than coordinates");
  ShardPlan plan;
  plan.ranges.reserve(shards);
  const std::size_t base = d / shards;
  const std::size_t extra = d % shards;
  std::size_t begin = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    plan.ranges.emplace_back(begin, begin + len);
    begin += len;
  }
  return plan;
}

double partial_dot(std::span<const double> x_slice, std::size_t range_begin, std::span<const SparseEntry> z_slice) {
  double sum = 0.0;
  for (const auto& e : z_slice) {
    if (e.index < range_begin || e.index - range_begin >= x_slice.size()) {
      throw StructuralError("example entry outside the shard range");
    }
    sum += e.value * x_slice[e.index - range_begin];
  }
  return sum;
}

namespace {

struct Command {
  enum class Kind { dot, update, stop };
  Kind kind = Kind::stop;
  std::uint64_t example = 0;  // 1-based
  double coef = 0.0;
  double eta = 0.0;
};

struct Partial {
  std::uint64_t example = 0;
  double raw_dot = 0.0;
  double raw_sq = 0.0;
  double scale = 1.0;
};

// The master's view of an iterate whose coordinates it never sees.
struct AssembledPoint {
  std::size_t dimension = 0;
  double margin_raw = 0.0;
  double raw_sq = 0.0;
  double s = 1.0;

  std::size_t dim() const { return dimension; }
  double dot(const SparseVector&) const { return s * margin_raw; }
  double coord(std::size_t) const { throw ContractViolation("pipeline master has no coordinate access"); }
  double squared_norm() const { return s * s * std::max(0.0, raw_sq); }
};

class Shard {
 public:
  Shard(std::size_t begin, std::size_t end, std::size_t window, const RunConfig& run,
        std::span<const SparseExample> stream)
      : begin_(begin),
        end_(end),
        run_(run),
        stream_(stream),
        slice_(end - begin),
        commands_(2 * window + 2),
        partials_(window) {}

  BoundedQueue<Command>& commands() { return commands_; }
  BoundedQueue<Partial>& partials() { return partials_; }
  const ScaledVector& slice() const { return slice_; }

  void main() {
    while (auto cmd = commands_.pop()) {
      if (cmd->kind == Command::Kind::stop) return;
      const auto z = stream_[cmd->example - 1].features.slice(begin_, end_);
      if (cmd->kind == Command::Kind::dot) {
        Partial p{cmd->example, partial_dot(slice_.raw_values(), begin_, z), slice_.raw_squared_norm(),
                  slice_.scale()};
        if (!partials_.push(p)) return;
      } else {
        std::vector<SparseEntry> local;
        local.reserve(z.size());
        for (const auto& e : z) {
          const double g = cmd->coef * e.value;
          if (g != 0.0) local.push_back({e.index - begin_, g});
        }
        apply_step(slice_, SparseVector(std::move(local)), cmd->eta, run_.loss, run_.region);
      }
    }
  }

 private:
  std::size_t begin_;
  std::size_t end_;
  const RunConfig& run_;
  std::span<const SparseExample> stream_;
  ScaledVector slice_;
  BoundedQueue<Command> commands_;
  BoundedQueue<Partial> partials_;
};

class PipelineRun {
 public:
  PipelineRun(const ShardPlan& plan, const RunConfig& run, std::size_t window, std::span<const SparseExample> stream,
              const PipelineOptions& options)
      : plan_(plan), run_(run), window_(window), stream_(stream), options_(options) {
    run_.tau = window - 1;
    if (run_.schedule.shifted()) run_.schedule.tau = window - 1;
    run_.validate();
    for (const auto& ex : stream) {
      if (ex.features.extent() > run_.dimension) throw StructuralError("example index exceeds parameter dimension");
    }
    for (const auto& [b, e] : plan.ranges) {
      shards_.push_back(std::make_unique<Shard>(b, e, window, run_, stream));
    }
    result_.run.ledger = RegretLedger(run_.tau);
    result_.run.ledger.reserve(stream.size());
  }

  PipelineResult execute() {
    {
      std::vector<std::jthread> threads;
      threads.reserve(shards_.size());
      for (std::size_t s = 0; s < shards_.size(); ++s) {
        threads.emplace_back([this, s] { shard_main(s); });
      }
      try {
        master();
      } catch (const std::exception& e) {
        record_failure(std::string("master failed: ") + e.what());
      }
      for (auto& sh : shards_) sh->commands().push({Command::Kind::stop});
    }
    auto& traj = result_.run.trajectory;
    traj.steps = stream_.size();
    traj.updates_applied = applied_;
    ParameterVector x(run_.dimension);
    for (std::size_t s = 0; s < shards_.size(); ++s) {
      const auto begin = plan_.ranges[s].first;
      const auto local = shards_[s]->slice().materialize();
      for (std::size_t i = 0; i < local.dim(); ++i) x[begin + i] = local[i];
    }
    traj.final_iterate = std::move(x);
    if (failed()) {
      result_.run.ledger.invalidate(failure_);
    } else if (applied_ != stream_.size()) {
      result_.run.ledger.invalidate("pipeline stopped after " + std::to_string(applied_) + " updates");
    }
    return std::move(result_);
  }

 private:
  bool failed() {
    std::lock_guard lock(failure_mutex_);
    return !failure_.empty();
  }

  void record_failure(const std::string& why) {
    {
      std::lock_guard lock(failure_mutex_);
      if (failure_.empty()) failure_ = why;
    }
    close_all();
  }

  void close_all() {
    for (auto& sh : shards_) {
      sh->commands().close();
      sh->partials().close();
    }
  }

  void shard_main(std::size_t s) {
    try {
      shards_[s]->main();
    } catch (const std::exception& e) {
      record_failure("shard " + std::to_string(s) + " failed: " + e.what());
    }
  }

  void broadcast(const Command& cmd) {
    for (auto& sh : shards_) {
      if (!sh->commands().push(cmd)) throw DomainError("pipeline aborted");
    }
  }

  // Collects the partials of the oldest ticket, evaluates it and broadcasts
  // its update as update number applied_ + 1.
  void resolve(std::deque<InFlightTicket>& in_flight) {
    InFlightTicket ticket = std::move(in_flight.front());
    in_flight.pop_front();
    ticket.partials.reserve(shards_.size());
    for (auto& sh : shards_) {
      auto p = sh->partials().pop();
      if (!p) throw DomainError("pipeline aborted");
      if (p->example != ticket.example_id) throw ContractViolation("partial arrived out of order");
      if (p->scale != ticket.scale) throw ContractViolation("shard scale diverged from the master");
      ticket.partials.push_back(p->raw_dot);
      sq_partials_.push_back(p->raw_sq);
    }
    AssembledPoint point{run_.dimension, ticket.partials[0], sq_partials_[0], ticket.scale};
    for (std::size_t s = 1; s < ticket.partials.size(); ++s) {
      point.margin_raw += ticket.partials[s];
      point.raw_sq += sq_partials_[s];
    }
    sq_partials_.clear();
    if (options_.record_dots) result_.dots.push_back(point.margin_raw);

    const SparseExample& ex = stream_[ticket.example_id - 1];
    const double chi = example_margin(run_.loss, point, ex);
    double loss = margin_loss(run_.loss.kind, chi);
    if (run_.loss.l2_reg != 0.0) loss = loss + 0.5 * run_.loss.l2_reg * point.squared_norm();
    if (!std::isfinite(loss)) throw DomainError("loss diverged at example " + std::to_string(ticket.example_id));
    result_.run.ledger.record(loss, chi <= 0.0);

    const std::uint64_t k = applied_ + 1;
    const double eta = run_.schedule.eta(k + run_.tau);
    const double coef = ex.label * margin_derivative(run_.loss.kind, chi);
    broadcast({Command::Kind::update, ticket.example_id, coef, eta});
    if (run_.loss.l2_reg != 0.0) scale_.shrink(1.0 - eta * run_.loss.l2_reg);
    applied_ = k;
    result_.run.delays.add(k - 1 - ticket.birth_counter);
    if (run_.record_trajectory) result_.run.trajectory.applied_birth_steps.push_back(ticket.example_id);
  }

  void master() {
    std::deque<InFlightTicket> in_flight;
    const std::uint64_t T = stream_.size();
    for (std::uint64_t t = 1; t <= T; ++t) {
      if (in_flight.size() == window_) resolve(in_flight);
      InFlightTicket ticket;
      ticket.example_id = t;
      ticket.birth_counter = applied_;
      ticket.scale = scale_.scale();
      broadcast({Command::Kind::dot, t});
      in_flight.push_back(std::move(ticket));
    }
    while (!in_flight.empty()) resolve(in_flight);
  }

  const ShardPlan& plan_;
  RunConfig run_;
  std::size_t window_;
  std::span<const SparseExample> stream_;
  PipelineOptions options_;
  std::vector<std::unique_ptr<Shard>> shards_;
  ScaledVector scale_{0};  // tracks only the lazy scale
  std::vector<double> sq_partials_;
  std::uint64_t applied_ = 0;
  std::mutex failure_mutex_;
  std::string failure_;
  PipelineResult result_;
};

}  // namespace

PipelineResult run_pipeline(const ShardPlan& plan, const RunConfig& run, std::size_t window,
                            std::span<const SparseExample> stream, const PipelineOptions& options) {
  if (window == 0) throw DomainError("window must be positive");
  if (window > options.window_cap) {
    throw DomainError("window " + std::to_string(window) + " exceeds the cap of " +
                      std::to_string(options.window_cap));
  }
  if (plan.shards() == 0) throw DomainError("shard plan is empty");
  if (plan.dimension() != run.dimension) throw StructuralError("shard plan does not cover the run dimension");
  if (run.region.kind != FeasibleRegion::Kind::unbounded) {
    throw DomainError("pipeline engine supports only the unbounded region");
  }
  if (!run.loss.is_margin()) throw DomainError("pipeline engine supports only margin losses");
  if (stream.empty()) throw DomainError("stream must contain at least one example");
  PipelineRun engine(plan, run, window, stream, options);
  return engine.execute();
}

}  // namespace dsgd
