#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dsgd/delayed_engine.hpp"

namespace dsgd {

/// Contiguous ranges [begin, end) partitioning [0, d); sizes differ by at most one.
struct ShardPlan {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  std::size_t shards() const { return ranges.size(); }
  std::size_t dimension() const { return ranges.empty() ? 0 : ranges.back().second; }
};

ShardPlan plan_shards(std::size_t d, std::size_t shards);

/// Inner product of a shard's slice of x with the example entries falling in
/// that slice. `range_begin` is the global index of x_slice[0]; every entry
/// of z_slice must lie in [range_begin, range_begin + x_slice.size()).
double partial_dot(std::span<const double> x_slice, std::size_t range_begin, std::span<const SparseEntry> z_slice);

/// Example bookkeeping while its partial dot products are outstanding.
struct InFlightTicket {
  std::uint64_t example_id = 0;
  std::vector<double> partials;
  std::uint64_t birth_counter = 0;  // updates applied when the dot was issued
  double scale = 1.0;               // lazy scale the shards' slices were under
};

struct PipelineOptions {
  /// Largest permitted window (max examples in flight).
  std::size_t window_cap = 100;
  /// Keep the reassembled raw dot product of every example.
  bool record_dots = false;
};

struct PipelineResult {
  RunResult run;
  /// Per-example sum of shard partials (before the lazy scale), if recorded.
  std::vector<double> dots;
};

/// Feature-sharded pipeline. Each shard thread owns its slice of the
/// iterate, computes partial dot products and applies broadcast updates; the
/// calling thread is the master: it sums partials in shard order, evaluates
/// the loss and broadcasts the scalar step. Up to `window` examples are in
/// flight, so each update uses an iterate that is up to window - 1 updates
/// old. Equivalent to the simulator at tau = window - 1 with drain_tail, up
/// to the reassociation of the dot product across shards. Only margin
/// losses and the unbounded region are supported.
PipelineResult run_pipeline(const ShardPlan& plan, const RunConfig& run, std::size_t window,
                            std::span<const SparseExample> stream, const PipelineOptions& options = {});

}  // namespace dsgd
