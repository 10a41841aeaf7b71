#include "dsgd/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "dsgd/pipeline_engine.hpp"

namespace dsgd {

// ---------------------------------------------------------------- config

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw InputError("config key '" + std::string(key) + "': cannot read '" + std::string(value) + "' as " +
                   std::string(expected));
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

template <typename E>
E parse_enum(std::string_view key, std::string_view v, std::initializer_list<std::pair<std::string_view, E>> options) {
  std::string expected = "one of";
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    expected += " ";
    expected += name;
  }
  bad_value(key, v, expected);
}

std::vector<std::uint64_t> parse_list(std::string_view key, std::string_view v) {
  std::vector<std::uint64_t> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const auto item = trim(v.substr(0, comma));
    out.push_back(parse_u64(key, item));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  using C = ExperimentConfig;
  using K = std::string_view;
  static const std::map<std::string, Setter, std::less<>> table = {
      {"engine",
       [](C& c, K k, K v) {
         c.engine = parse_enum<EngineKind>(k, v,
                                           {{"simulator", EngineKind::simulator},
                                            {"mirror", EngineKind::mirror},
                                            {"async", EngineKind::async},
                                            {"pipeline", EngineKind::pipeline}});
       }},
      {"delays", [](C& c, K k, K v) { c.delays = parse_list(k, v); }},
      {"repeats", [](C& c, K k, K v) { c.repeats = parse_u64(k, v); }},
      {"seed", [](C& c, K k, K v) { c.seed = parse_u64(k, v); }},
      {"output", [](C& c, K, K v) { c.outputs = std::string(v); }},
      {"drain_tail", [](C& c, K k, K v) { c.drain_tail = parse_bool(k, v); }},
      {"timing", [](C& c, K k, K v) { c.timing = parse_bool(k, v); }},
      {"delay_histograms", [](C& c, K k, K v) { c.delay_histograms = parse_bool(k, v); }},

      {"data.source",
       [](C& c, K k, K v) {
         c.data.source = parse_enum<DataSpec::Source>(k, v,
                                                      {{"corpus", DataSpec::Source::corpus},
                                                       {"synthetic", DataSpec::Source::synthetic},
                                                       {"text_synthetic", DataSpec::Source::text_synthetic}});
       }},
      {"data.path", [](C& c, K, K v) { c.data.path = std::string(v); }},
      {"data.permute", [](C& c, K k, K v) { c.data.permute = parse_bool(k, v); }},

      {"synthetic.kind",
       [](C& c, K k, K v) {
         using S = SyntheticParams::Kind;
         c.data.synthetic.kind = parse_enum<S>(k, v,
                                               {{"quadratic_iid", S::quadratic_iid},
                                                {"linear_margin_iid", S::linear_margin_iid},
                                                {"correlated_blocks", S::correlated_blocks}});
       }},
      {"synthetic.dim", [](C& c, K k, K v) { c.data.synthetic.dim = parse_u64(k, v); }},
      {"synthetic.count", [](C& c, K k, K v) { c.data.synthetic.count = parse_u64(k, v); }},
      {"synthetic.radius", [](C& c, K k, K v) { c.data.synthetic.radius = parse_double(k, v); }},
      {"synthetic.sign_cloud", [](C& c, K k, K v) { c.data.synthetic.sign_cloud = parse_bool(k, v); }},
      {"synthetic.nnz", [](C& c, K k, K v) { c.data.synthetic.nnz = parse_u64(k, v); }},
      {"synthetic.z_norm", [](C& c, K k, K v) { c.data.synthetic.z_norm = parse_double(k, v); }},
      {"synthetic.label_noise", [](C& c, K k, K v) { c.data.synthetic.label_noise = parse_double(k, v); }},
      {"synthetic.block", [](C& c, K k, K v) { c.data.synthetic.block = parse_u64(k, v); }},

      {"text.documents", [](C& c, K k, K v) { c.data.text.documents = parse_u64(k, v); }},
      {"text.vocabulary", [](C& c, K k, K v) { c.data.text.vocabulary = parse_u64(k, v); }},
      {"text.indicative", [](C& c, K k, K v) { c.data.text.indicative = parse_u64(k, v); }},
      {"text.signal_rate", [](C& c, K k, K v) { c.data.text.signal_rate = parse_double(k, v); }},
      {"text.min_length", [](C& c, K k, K v) { c.data.text.min_length = parse_u64(k, v); }},
      {"text.max_length", [](C& c, K k, K v) { c.data.text.max_length = parse_u64(k, v); }},
      {"text.label_noise", [](C& c, K k, K v) { c.data.text.label_noise = parse_double(k, v); }},
      {"text.positive_rate", [](C& c, K k, K v) { c.data.text.positive_rate = parse_double(k, v); }},

      {"hash.bits", [](C& c, K k, K v) { c.hash.bits = static_cast<int>(std::min<std::uint64_t>(parse_u64(k, v), 64)); }},
      {"hash.signed", [](C& c, K k, K v) { c.hash.signed_hash = parse_bool(k, v); }},
      {"hash.seed", [](C& c, K k, K v) { c.hash.seed = parse_u64(k, v); }},
      {"features",
       [](C& c, K k, K v) {
         c.features = parse_enum<FeatureKind>(k, v, {{"linear", FeatureKind::linear}, {"quadratic", FeatureKind::quadratic}});
       }},
      {"features.pair_cap", [](C& c, K k, K v) { c.pair_token_cap = parse_u64(k, v); }},

      {"schedule.kind",
       [](C& c, K k, K v) {
         using S = Schedule::Kind;
         c.schedule.kind = parse_enum<S>(k, v,
                                         {{"inv_sqrt_plain", S::inv_sqrt_plain},
                                          {"inv_sqrt_shifted", S::inv_sqrt_shifted},
                                          {"inv_linear_strong", S::inv_linear_strong}});
       }},
      {"schedule.sigma", [](C& c, K k, K v) { c.schedule.sigma = parse_double(k, v); }},
      {"schedule.lambda", [](C& c, K k, K v) { c.schedule.lambda = parse_double(k, v); }},

      {"loss.kind",
       [](C& c, K k, K v) {
         c.loss.kind = parse_enum<LossKind>(k, v,
                                            {{"smoothed_margin", LossKind::smoothed_margin},
                                             {"logistic", LossKind::logistic},
                                             {"squared", LossKind::squared},
                                             {"centered_quadratic", LossKind::centered_quadratic}});
       }},
      {"loss.l2", [](C& c, K k, K v) { c.loss.l2_reg = parse_double(k, v); }},

      {"region",
       [](C& c, K k, K v) {
         c.region.kind = parse_enum<FeasibleRegion::Kind>(
             k, v, {{"unbounded", FeasibleRegion::Kind::unbounded}, {"ball", FeasibleRegion::Kind::l2_ball}});
       }},
      {"region.radius", [](C& c, K k, K v) { c.region.radius = parse_double(k, v); }},

      {"mirror.map",
       [](C& c, K k, K v) {
         c.mirror.kind = parse_enum<MirrorMap::Kind>(
             k, v, {{"squared_norm", MirrorMap::Kind::squared_norm}, {"entropy", MirrorMap::Kind::neg_entropy_unnormalized}});
       }},
      {"mirror.normalized", [](C& c, K k, K v) { c.mirror.normalized = parse_bool(k, v); }},
      {"mirror.phi", [](C& c, K k, K v) { c.mirror.Phi = parse_double(k, v); }},

      {"async.mode",
       [](C& c, K k, K v) {
         c.async_mode = parse_enum<AsyncConfig::Mode>(
             k, v, {{"strict", AsyncConfig::Mode::round_robin_strict}, {"free", AsyncConfig::Mode::free_running}});
       }},
      {"async.read",
       [](C& c, K k, K v) {
         c.async_read = parse_enum<AsyncConfig::ReadConsistency>(
             k, v,
             {{"snapshot", AsyncConfig::ReadConsistency::snapshot}, {"relaxed", AsyncConfig::ReadConsistency::relaxed}});
       }},
      {"async.max_delay", [](C& c, K k, K v) { c.async_max_delay = parse_u64(k, v); }},
      {"pipeline.shards", [](C& c, K k, K v) { c.shards = parse_u64(k, v); }},
      {"pipeline.window_cap", [](C& c, K k, K v) { c.window_cap = parse_u64(k, v); }},

      {"comparator.enabled", [](C& c, K k, K v) { c.comparator = parse_bool(k, v); }},
      {"comparator.sgd_passes", [](C& c, K k, K v) { c.comparator_options.sgd_passes = parse_u64(k, v); }},
      {"comparator.iterations", [](C& c, K k, K v) { c.comparator_options.gd_iterations = parse_u64(k, v); }},
      {"bounds.alpha_samples", [](C& c, K k, K v) { c.alpha_samples = parse_u64(k, v); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      throw InputError(e.what());
    }
  };
  if (delays.empty()) throw InputError("delays must not be empty");
  if (repeats == 0) throw InputError("repeats must be at least 1");
  if (data.source == DataSpec::Source::corpus && data.path.empty()) throw InputError("data.path is required");
  if (data.source == DataSpec::Source::synthetic) wrap([&] { data.synthetic.validate(); });
  if (data.source == DataSpec::Source::text_synthetic) wrap([&] { data.text.validate(); });
  if (data.source != DataSpec::Source::synthetic) {
    wrap([&] { hash.validate(); });
    if (!loss.is_margin()) throw InputError("text data needs a margin loss");
  } else if (data.synthetic.kind == SyntheticParams::Kind::quadratic_iid) {
    if (loss.is_margin()) throw InputError("quadratic_iid data needs loss.kind = centered_quadratic");
  } else if (!loss.is_margin()) {
    throw InputError("centered_quadratic loss needs quadratic_iid data");
  }
  if (region.kind == FeasibleRegion::Kind::l2_ball) wrap([&] { (void)FeasibleRegion::l2_ball(region.radius); });
  if (!(loss.l2_reg >= 0.0)) throw InputError("loss.l2 must be non-negative");
  if (!(schedule.sigma > 0.0)) throw InputError("schedule.sigma must be positive");
  if (schedule.kind == Schedule::Kind::inv_linear_strong && !(schedule.lambda > 0.0)) {
    throw InputError("schedule.lambda must be positive");
  }
  if (schedule.kind == Schedule::Kind::inv_linear_strong && loss.l2_reg == 0.0 &&
      loss.kind != LossKind::centered_quadratic) {
    throw InputError("inv_linear_strong needs a strongly convex loss (loss.l2 > 0 or centered_quadratic)");
  }
  switch (engine) {
    case EngineKind::mirror:
      if (mirror.kind == MirrorMap::Kind::neg_entropy_unnormalized &&
          (region.kind != FeasibleRegion::Kind::unbounded || loss.l2_reg != 0.0)) {
        throw InputError("the entropy map needs region = unbounded and loss.l2 = 0");
      }
      if (!(mirror.Phi > 0.0)) throw InputError("mirror.phi must be positive");
      break;
    case EngineKind::async:
      for (auto tau : delays) {
        wrap([&] { AsyncConfig{tau + 1, async_mode, async_max_delay, async_read}.validate(); });
      }
      break;
    case EngineKind::pipeline:
      if (region.kind != FeasibleRegion::Kind::unbounded) throw InputError("pipeline engine needs region = unbounded");
      if (!loss.is_margin()) throw InputError("pipeline engine needs a margin loss");
      if (shards == 0) throw InputError("pipeline.shards must be positive");
      for (auto tau : delays) {
        if (tau + 1 > window_cap) {
          throw InputError("delay " + std::to_string(tau) + " needs a window above pipeline.window_cap");
        }
      }
      break;
    case EngineKind::simulator:
      break;
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw InputError("config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    it->second(cfg, key, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') return env;
  return cfg.outputs;
}

// ---------------------------------------------------------------- bounds

std::string_view bound_name(BoundId id) {
  switch (id) {
    case BoundId::lipschitz: return "lipschitz";
    case BoundId::strong: return "strong";
    case BoundId::alpha: return "alpha";
    case BoundId::smooth: return "smooth";
    case BoundId::smooth_strong: return "smooth_strong";
    case BoundId::bregman: return "bregman";
  }
  return "unknown";
}

namespace {

double evaluate_bound(const BoundInputs& in, BoundId which, bool optimal) {
  switch (which) {
    case BoundId::lipschitz: return bound_lipschitz(in, optimal);
    case BoundId::strong: return bound_strong(in);
    case BoundId::alpha: return bound_alpha(in, optimal);
    case BoundId::smooth: return bound_smooth(in);
    case BoundId::smooth_strong: return bound_smooth_strong(in);
    case BoundId::bregman: return bound_bregman(in, optimal);
  }
  throw DomainError("unknown bound");
}

}  // namespace

BoundReport compare_to_bound(const RegretLedger& ledger, const BoundInputs& in, BoundId which, bool optimal_sigma) {
  BoundReport r;
  r.bound = which;
  if (!ledger.has_comparator()) {
    r.skipped = true;
    r.reason = "no comparator";
    return r;
  }
  r.empirical = ledger.regret();
  try {
    r.value = evaluate_bound(in, which, optimal_sigma);
  } catch (const DomainError& e) {
    r.skipped = true;
    r.reason = e.what();
    return r;
  }
  r.ratio = r.empirical / r.value;
  r.pass = r.empirical <= r.value;
  return r;
}

// ---------------------------------------------------------------- output

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

std::string curve_csv(const RegretLedger& ledger) {
  std::string out = "t,loss,cumloss,err,regret\n";
  for (std::size_t row = 0; row < ledger.size(); ++row) {
    out += std::to_string(row + 1);
    out += ',';
    out += format_double(ledger.loss(row));
    out += ',';
    out += format_double(ledger.cumulative_loss(row));
    out += ',';
    out += format_double(ledger.progressive_error(row));
    out += ',';
    out += ledger.has_comparator() ? format_double(ledger.regret_at(row)) : "";
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// One repeat's data, built before any output is written.
struct PreparedStream {
  std::vector<SparseExample> examples;
  std::vector<double> comparator_losses;
};

struct Prepared {
  std::size_t dimension = 0;
  std::vector<PreparedStream> repeats;
  double z_norm = 0.0;
  double alpha = 1.0;
};

std::uint64_t repeat_seed(std::uint64_t base, std::size_t rep) {
  // splitmix64 step so neighbouring repeats get unrelated streams
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (rep + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Prepared prepare(const ExperimentConfig& cfg, bool with_comparator) {
  cfg.validate();
  Prepared p;
  std::vector<LabeledText> corpus;
  if (cfg.data.source == DataSpec::Source::corpus) {
    try {
      auto read = read_corpus(cfg.data.path);
      corpus = std::move(read.documents);
    } catch (const DomainError& e) {
      throw InputError(e.what());
    }
    if (corpus.empty()) throw InputError("corpus " + cfg.data.path.string() + " has no usable documents");
  }
  p.dimension = cfg.data.source == DataSpec::Source::synthetic ? cfg.data.synthetic.dim : cfg.hash.bins();

  std::vector<SparseExample> base_corpus;
  if (!corpus.empty()) base_corpus = featurize(corpus, cfg.hash, cfg.features, cfg.pair_token_cap);

  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = repeat_seed(cfg.seed, r);
    PreparedStream s;
    switch (cfg.data.source) {
      case DataSpec::Source::corpus:
        s.examples = cfg.data.permute ? permute(base_corpus, seed) : base_corpus;
        break;
      case DataSpec::Source::text_synthetic: {
        const auto docs = synthetic_corpus(cfg.data.text, seed);
        s.examples = featurize(docs, cfg.hash, cfg.features, cfg.pair_token_cap);
        break;
      }
      case DataSpec::Source::synthetic:
        s.examples = synthetic_stream(cfg.data.synthetic, seed);
        break;
    }
    for (const auto& ex : s.examples) p.z_norm = std::max(p.z_norm, ex.features.norm());
    if (with_comparator && cfg.comparator) {
      const auto x = batch_comparator(cfg.loss, cfg.region, p.dimension, s.examples, cfg.comparator_options);
      s.comparator_losses = per_example_losses(cfg.loss, x, s.examples);
    }
    p.repeats.push_back(std::move(s));
  }

  if (cfg.loss.is_margin()) {
    const auto& first = p.repeats.front().examples;
    const std::size_t m = std::min(cfg.alpha_samples, first.size());
    std::vector<SparseVector> sample;
    sample.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<SparseEntry> e(first[i].features.entries().begin(), first[i].features.entries().end());
      for (auto& entry : e) entry.value *= first[i].label;
      sample.push_back(SparseVector(std::move(e)));
    }
    const auto c = constants_for(cfg.loss, p.z_norm,
                                 cfg.region.kind == FeasibleRegion::Kind::l2_ball ? std::optional(cfg.region.radius)
                                                                                  : std::nullopt);
    if (m > 0 && c.L > 0.0 && std::isfinite(c.L)) p.alpha = std::min(1.0, estimate_alpha(sample, c.Lambda, c.L));
  }
  return p;
}

BoundInputs inputs_for(const ExperimentConfig& cfg, const Prepared& p, std::uint64_t tau, std::size_t T) {
  const std::optional<double> radius =
      cfg.region.kind == FeasibleRegion::Kind::l2_ball ? std::optional(cfg.region.radius) : std::nullopt;
  const auto c = constants_for(cfg.loss, p.z_norm, radius);
  BoundInputs in;
  in.F = std::sqrt(cfg.region.diameter_squared());
  in.L = c.L;
  in.tau = static_cast<double>(tau);
  in.T = static_cast<double>(T);
  in.sigma = cfg.schedule.sigma;
  in.lambda = c.lambda;
  in.H = c.H;
  in.alpha = p.alpha;
  in.Phi = cfg.engine == EngineKind::mirror ? cfg.mirror.Phi : 1.0;
  return in;
}

// Bounds whose hypotheses match the run's schedule and engine; the others
// carry the reason they do not apply.
std::vector<std::pair<BoundId, std::string>> applicable_bounds(const ExperimentConfig& cfg, const BoundInputs& in) {
  std::vector<std::pair<BoundId, std::string>> out;
  const bool sqrt_shifted = cfg.schedule.kind == Schedule::Kind::inv_sqrt_shifted;
  const bool strong = cfg.schedule.kind == Schedule::Kind::inv_linear_strong;
  const std::string need_sqrt = "needs schedule inv_sqrt_shifted";
  const std::string need_strong = "needs schedule inv_linear_strong with lambda equal to the loss curvature";
  const bool strong_match = strong && std::abs(cfg.schedule.lambda - in.lambda) <= 1e-12 * std::max(1.0, in.lambda);
  const bool sigma_smooth = sqrt_shifted && in.L > 0.0 &&
                            std::abs(cfg.schedule.sigma - in.F / in.L) <= 1e-9 * std::max(1.0, in.F / in.L);
  out.emplace_back(BoundId::lipschitz, sqrt_shifted ? "" : need_sqrt);
  out.emplace_back(BoundId::alpha, sqrt_shifted ? "" : need_sqrt);
  out.emplace_back(BoundId::strong, strong_match ? "" : need_strong);
  out.emplace_back(BoundId::smooth, sigma_smooth ? "" : "needs schedule inv_sqrt_shifted with sigma = F / L");
  out.emplace_back(BoundId::smooth_strong, strong_match ? "" : need_strong);
  out.emplace_back(BoundId::bregman, cfg.engine == EngineKind::mirror && sqrt_shifted ? "" : "needs the mirror engine");
  if (!std::isfinite(in.F)) {
    for (auto& [id, reason] : out) {
      if (reason.empty()) reason = "needs a bounded region";
    }
  }
  return out;
}

RunResult run_engine(const ExperimentConfig& cfg, std::size_t dim, std::uint64_t tau,
                     std::span<const SparseExample> stream) {
  RunConfig rc;
  rc.tau = tau;
  rc.schedule = cfg.schedule;
  if (rc.schedule.shifted()) rc.schedule.tau = tau;
  rc.region = cfg.region;
  rc.loss = cfg.loss;
  rc.dimension = dim;
  rc.drain_tail = cfg.drain_tail;
  switch (cfg.engine) {
    case EngineKind::simulator: return run(rc, stream);
    case EngineKind::mirror: return run_mirror(rc, cfg.mirror, stream);
    case EngineKind::async: {
      AsyncConfig a{tau + 1, cfg.async_mode, cfg.async_max_delay, cfg.async_read};
      return run_async(a, rc, stream);
    }
    case EngineKind::pipeline: {
      const auto plan = plan_shards(dim, std::min(cfg.shards, dim));
      PipelineOptions opts;
      opts.window_cap = cfg.window_cap;
      return run_pipeline(plan, rc, tau + 1, stream, opts).run;
    }
  }
  throw ContractViolation("unknown engine");
}

std::string engine_label(EngineKind e) {
  switch (e) {
    case EngineKind::simulator: return "simulator";
    case EngineKind::mirror: return "mirror";
    case EngineKind::async: return "async";
    case EngineKind::pipeline: return "pipeline";
  }
  return "unknown";
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* log) {
  const Prepared prepared = prepare(cfg, true);
  ExperimentOutcome outcome;
  outcome.output_dir = resolve_output_dir(cfg);
  std::error_code ec;
  std::filesystem::create_directories(outcome.output_dir, ec);
  if (ec) throw InputError("cannot create output directory " + outcome.output_dir.string() + ": " + ec.message());

  std::string timing = "tau,rep,examples,seconds,examples_per_sec\n";
  for (const auto tau : cfg.delays) {
    DelaySummary summary;
    summary.tau = tau;
    DelayHistogram pooled;
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      const auto& data = prepared.repeats[r];
      if (cfg.timing) (void)run_engine(cfg, prepared.dimension, tau, data.examples);
      const auto start = std::chrono::steady_clock::now();
      RunResult result = run_engine(cfg, prepared.dimension, tau, data.examples);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!result.ledger.valid()) {
        throw EngineAbort(engine_label(cfg.engine) + " run at tau=" + std::to_string(tau) + " aborted: " +
                          result.ledger.invalid_reason());
      }
      if (!data.comparator_losses.empty()) result.ledger.set_comparator(data.comparator_losses);
      write_file(outcome.output_dir / ("curve_tau" + std::to_string(tau) + "_rep" + std::to_string(r) + ".csv"),
                 curve_csv(result.ledger));
      if (cfg.delay_histograms) {
        write_file(outcome.output_dir / ("delays_tau" + std::to_string(tau) + "_rep" + std::to_string(r) + ".csv"),
                   result.delays.to_csv());
      }
      if (cfg.timing) {
        const double n = static_cast<double>(data.examples.size());
        timing += std::to_string(tau) + "," + std::to_string(r) + "," + std::to_string(data.examples.size()) + "," +
                  format_double(seconds) + "," + format_double(seconds > 0.0 ? n / seconds : 0.0) + "\n";
      }
      for (const auto& [d, count] : result.delays.counts()) {
        for (std::uint64_t k = 0; k < count; ++k) pooled.add(d);
      }
      summary.final_errors.push_back(result.ledger.final_progressive_error());
      summary.regrets.push_back(result.ledger.has_comparator() ? result.ledger.regret() : std::nan(""));
      summary.average_losses.push_back(result.ledger.average_loss());

      if (r == 0) {
        const auto in = inputs_for(cfg, prepared, tau, data.examples.size());
        for (const auto& [id, reason] : applicable_bounds(cfg, in)) {
          BoundReport rep;
          if (reason.empty()) {
            rep = compare_to_bound(result.ledger, in, id);
          } else {
            rep.bound = id;
            rep.skipped = true;
            rep.reason = reason;
          }
          outcome.bounds.emplace_back(tau, rep);
        }
      }
      if (log != nullptr) {
        *log << "tau=" << tau << " rep=" << r << " err=" << format_double(result.ledger.final_progressive_error())
             << "\n";
      }
    }
    summary.median_delay = pooled.total() > 0 ? pooled.median() : 0;
    outcome.delays.push_back(std::move(summary));
  }

  std::string s = "tau,repeats,err_mean,err_std,regret_mean,regret_std,avg_loss_mean,median_delay\n";
  for (const auto& d : outcome.delays) {
    const bool has_regret = !std::isnan(d.regrets.front());
    s += std::to_string(d.tau) + "," + std::to_string(d.final_errors.size()) + "," + format_double(mean_of(d.final_errors)) +
         "," + format_double(stddev_of(d.final_errors)) + "," + (has_regret ? format_double(mean_of(d.regrets)) : "") +
         "," + (has_regret ? format_double(stddev_of(d.regrets)) : "") + "," + format_double(mean_of(d.average_losses)) +
         "," + std::to_string(d.median_delay) + "\n";
  }
  write_file(outcome.output_dir / "summary.csv", s);

  std::string b = "tau,bound,empirical,value,ratio,pass,note\n";
  for (const auto& [tau, rep] : outcome.bounds) {
    b += std::to_string(tau) + "," + std::string(bound_name(rep.bound)) + ",";
    if (rep.skipped) {
      b += ",,,skipped,\"" + rep.reason + "\"\n";
    } else {
      b += format_double(rep.empirical) + "," + format_double(rep.value) + "," + format_double(rep.ratio) + "," +
           (rep.pass ? "true" : "false") + ",\n";
    }
  }
  write_file(outcome.output_dir / "bounds.csv", b);
  if (cfg.timing) write_file(outcome.output_dir / "timing.csv", timing);
  return outcome;
}

std::string bound_table(const ExperimentConfig& cfg) {
  const Prepared prepared = prepare(cfg, false);
  const std::size_t T = prepared.repeats.front().examples.size();
  std::string out = "tau,bound,value,note\n";
  for (const auto tau : cfg.delays) {
    const auto in = inputs_for(cfg, prepared, tau, T);
    for (const auto& [id, reason] : applicable_bounds(cfg, in)) {
      out += std::to_string(tau) + "," + std::string(bound_name(id)) + ",";
      if (!reason.empty()) {
        out += ",\"" + reason + "\"\n";
        continue;
      }
      try {
        out += format_double(evaluate_bound(in, id, false)) + ",\n";
      } catch (const DomainError& e) {
        out += ",\"" + std::string(e.what()) + "\"\n";
      }
    }
  }
  return out;
}

}  // namespace dsgd
