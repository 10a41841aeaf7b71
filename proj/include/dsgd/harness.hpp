#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dsgd/async_engine.hpp"
#include "dsgd/bounds.hpp"
#include "dsgd/comparator.hpp"
#include "dsgd/delayed_engine.hpp"
#include "dsgd/mirror.hpp"
#include "dsgd/streams.hpp"

namespace dsgd {

/// Bad configuration or unreadable data (exit status 2).
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// An engine run ended with an invalid ledger (exit status 1).
class EngineAbort : public std::runtime_error {
 public:
  explicit EngineAbort(const std::string& what) : std::runtime_error(what) {}
};

/// Environment variable overriding ExperimentConfig::outputs.
inline constexpr const char* kOutputDirEnv = "DSGD_OUTPUT_DIR";

enum class EngineKind { simulator, mirror, async, pipeline };

struct DataSpec {
  enum class Source { corpus, synthetic, text_synthetic };

  Source source = Source::synthetic;
  std::filesystem::path path;
  SyntheticParams synthetic;
  TextCorpusParams text;
  /// Shuffle corpus documents with the repeat's seed.
  bool permute = true;
};

struct ExperimentConfig {
  EngineKind engine = EngineKind::simulator;
  std::vector<std::uint64_t> delays{0};
  DataSpec data;
  HashConfig hash;
  FeatureKind features = FeatureKind::linear;
  std::size_t pair_token_cap = kDefaultPairTokenCap;
  Schedule schedule;
  LossSpec loss;
  FeasibleRegion region;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::filesystem::path outputs = "dsgd_out";
  bool drain_tail = false;

  MirrorMap mirror;
  AsyncConfig::Mode async_mode = AsyncConfig::Mode::round_robin_strict;
  AsyncConfig::ReadConsistency async_read = AsyncConfig::ReadConsistency::snapshot;
  std::uint64_t async_max_delay = 100;
  std::size_t shards = 1;
  std::size_t window_cap = 100;

  bool comparator = true;
  ComparatorOptions comparator_options;
  /// Examples used to estimate alpha for bounds.csv.
  std::size_t alpha_samples = 10000;
  /// Time every run (after an untimed warm-up run) into timing.csv.
  bool timing = false;
  /// Write delays_tau<t>_rep<r>.csv histograms.
  bool delay_histograms = false;

  /// Throws InputError.
  void validate() const;
};

/// Parses the flat `key = value` format (`#` comments, dotted keys).
/// Unknown keys and malformed values raise InputError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Output directory after applying the environment override.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

enum class BoundId { lipschitz, strong, alpha, smooth, smooth_strong, bregman };

std::string_view bound_name(BoundId id);

struct BoundReport {
  BoundId bound = BoundId::lipschitz;
  double empirical = 0.0;
  double value = 0.0;
  double ratio = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string reason;
};

/// Empirical regret of `ledger` against one bound. A bound whose
/// preconditions fail is reported as skipped with the reason.
BoundReport compare_to_bound(const RegretLedger& ledger, const BoundInputs& in, BoundId which,
                             bool optimal_sigma = false);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Curve file body: header `t,loss,cumloss,err,regret`, one row per step.
std::string curve_csv(const RegretLedger& ledger);

struct DelaySummary {
  std::uint64_t tau = 0;
  std::vector<double> final_errors;
  std::vector<double> regrets;
  std::vector<double> average_losses;
  std::uint64_t median_delay = 0;
};

struct ExperimentOutcome {
  std::vector<DelaySummary> delays;
  std::vector<std::pair<std::uint64_t, BoundReport>> bounds;
  std::filesystem::path output_dir;
};

/// Runs every (delay, repeat) pair and writes the CSV files. Data and config
/// problems are detected before anything is written.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// Bound values at the constants of the config's data, one row per delay and
/// bound, without running any engine. CSV text.
std::string bound_table(const ExperimentConfig& cfg);

}  // namespace dsgd
