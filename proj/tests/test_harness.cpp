#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsgd/harness.hpp"
#include "oracles.hpp"

using namespace dsgd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dsgd_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

ExperimentConfig margin_config(const fs::path& out) {
  return parse_config(
      "engine = simulator\n"
      "delays = 0, 3\n"
      "repeats = 2\n"
      "seed = 5\n"
      "output = " + out.string() + "\n"
      "synthetic.kind = linear_margin_iid\n"
      "synthetic.dim = 20\n"
      "synthetic.count = 300\n"
      "loss.kind = logistic\n"
      "region = ball\n"
      "region.radius = 2\n"
      "schedule.kind = inv_sqrt_shifted\n"
      "schedule.sigma = 0.5\n");
}

// per-repeat seed derivation used by the harness (splitmix64 finaliser)
std::uint64_t repeat_seed(std::uint64_t base, std::size_t rep) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (rep + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DSGD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(
      "# comment\n"
      "engine = async   # trailing comment\n"
      "delays = 0, 10,100\n"
      "\n"
      "schedule.sigma = 0.25\n"
      "async.mode = free\n"
      "hash.bits = 12\n");
  CHECK(cfg.engine == EngineKind::async);
  CHECK(cfg.delays == std::vector<std::uint64_t>{0, 10, 100});
  CHECK(cfg.schedule.sigma == 0.25);
  CHECK(cfg.async_mode == AsyncConfig::Mode::free_running);
  CHECK(cfg.hash.bits == 12);
  CHECK_THROWS_AS(parse_config("nonsense = 1\n"), InputError);
  CHECK_THROWS_AS(parse_config("engine\n"), InputError);
  CHECK_THROWS_AS(parse_config("engine = gpu\n"), InputError);
  CHECK_THROWS_AS(parse_config("delays = 1, x\n"), InputError);
  CHECK_THROWS_AS(parse_config("schedule.sigma = nan\n"), InputError);
  CHECK_THROWS_AS(parse_config("repeats = -1\n"), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent/dsgd.conf"), InputError);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config("repeats = 0\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("delays = \n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("data.source = corpus\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("loss.kind = centered_quadratic\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("synthetic.kind = quadratic_iid\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("engine = pipeline\nregion = ball\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("engine = pipeline\ndelays = 100\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("engine = async\ndelays = 200\n").validate(), InputError);
  CHECK_THROWS_AS(parse_config("engine = mirror\nmirror.map = entropy\nloss.l2 = 0.1\n").validate(), InputError);
  CHECK_NOTHROW(parse_config("engine = pipeline\ndelays = 99\n").validate());
}

TEST_CASE("format_double round trips") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e300, 5e-324}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
}

TEST_CASE("experiment writes curves, summary and bounds") {
  const auto dir = scratch("basic");
  const auto cfg = margin_config(dir);
  const auto outcome = run_experiment(cfg);
  CHECK(outcome.output_dir == dir);
  for (int tau : {0, 3}) {
    for (int rep : {0, 1}) {
      const auto rows = read_csv(dir / ("curve_tau" + std::to_string(tau) + "_rep" + std::to_string(rep) + ".csv"));
      REQUIRE(rows.size() == 301);
      CHECK(rows[0] == std::vector<std::string>{"t", "loss", "cumloss", "err", "regret"});
      CHECK(rows[300][0] == "300");
    }
  }
  const auto summary = read_csv(dir / "summary.csv");
  REQUIRE(summary.size() == 3);
  CHECK(summary[0][0] == "tau");
  CHECK(summary[1][0] == "0");
  CHECK(summary[2][0] == "3");
  CHECK(summary[1][1] == "2");
  const auto bounds = read_csv(dir / "bounds.csv");
  CHECK(bounds.size() == 1 + 2 * 6);
  bool lipschitz_pass = false;
  for (const auto& row : bounds) {
    if (row[1] == "lipschitz" && row[5] == "true") lipschitz_pass = true;
  }
  CHECK(lipschitz_pass);
  const auto content = slurp(dir / "summary.csv");
  CHECK(content.find('\r') == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("regret column is cumloss minus the comparator prefix") {
  const auto dir = scratch("regret");
  auto cfg = margin_config(dir);
  cfg.repeats = 1;
  cfg.delays = {2};
  run_experiment(cfg);
  const auto rows = read_csv(dir / "curve_tau2_rep0.csv");
  const auto stream = synthetic_stream(cfg.data.synthetic, repeat_seed(cfg.seed, 0));
  const auto x = batch_comparator(cfg.loss, cfg.region, 20, stream, cfg.comparator_options);
  const auto star = per_example_losses(cfg.loss, x, stream);
  REQUIRE(rows.size() == stream.size() + 1);
  double cum = 0.0;
  double star_cum = 0.0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    cum += std::stod(rows[r][1]);
    star_cum += star[r - 1];
    const double cumloss = std::stod(rows[r][2]);
    CHECK(std::abs(cumloss - cum) <= 1e-9 * std::max(1.0, cum));
    CHECK(std::abs(std::stod(rows[r][4]) - (cumloss - star_cum)) <= 1e-9 * std::max(1.0, cum));
  }
  fs::remove_all(dir);
}

TEST_CASE("sequential quadratic run matches the closed-form recursion") {
  const auto dir = scratch("quadratic");
  auto cfg = parse_config(
      "delays = 0\n"
      "seed = 3\n"
      "synthetic.kind = quadratic_iid\n"
      "synthetic.dim = 3\n"
      "synthetic.count = 400\n"
      "synthetic.radius = 1\n"
      "loss.kind = centered_quadratic\n"
      "region = ball\n"
      "region.radius = 3\n"
      "schedule.kind = inv_sqrt_shifted\n"
      "schedule.sigma = 0.7\n");
  cfg.outputs = dir;
  run_experiment(cfg);
  // regenerate the same stream and unroll x_{t+1} = x_t - eta_t (x_t - c_t)
  const auto stream = synthetic_stream(cfg.data.synthetic, repeat_seed(3, 0));
  std::vector<double> mean(3, 0.0);
  for (const auto& ex : stream) {
    for (const auto& e : ex.features.entries()) mean[e.index] += e.value / static_cast<double>(stream.size());
  }
  oracle::Config oc;
  oc.loss = oracle::Loss::centered_quadratic;
  oc.radius = 3.0;
  oc.eta = [](std::uint64_t t) { return 0.7 / std::sqrt(static_cast<double>(t)); };
  const auto tr = oracle::projected_sgd(oc, 3, stream);
  const auto rows = read_csv(dir / "curve_tau0_rep0.csv");
  REQUIRE(rows.size() == stream.size() + 1);
  double regret = 0.0;
  for (std::size_t t = 0; t < stream.size(); ++t) {
    double star = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      double c = 0.0;
      for (const auto& e : stream[t].features.entries()) {
        if (e.index == i) c = e.value;
      }
      star += 0.5 * (mean[i] - c) * (mean[i] - c);
    }
    regret += tr.losses[t] - star;
    CHECK(std::stod(rows[t + 1][1]) == tr.losses[t]);
    CHECK(std::abs(std::stod(rows[t + 1][4]) - regret) <= 1e-9 * std::max(1.0, std::abs(regret)));
  }
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte identical") {
  for (const char* engine : {"simulator", "mirror", "async"}) {
    CAPTURE(engine);
    const auto a = scratch(std::string("rerun_a_") + engine);
    const auto b = scratch(std::string("rerun_b_") + engine);
    auto cfg = margin_config(a);
    cfg.engine = parse_config(std::string("engine = ") + engine + "\n").engine;
    run_experiment(cfg);
    cfg.outputs = b;
    run_experiment(cfg);
    for (const auto& entry : fs::directory_iterator(a)) {
      CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("output directory comes from the environment when set") {
  const auto dir = scratch("env");
  const auto other = scratch("env_config");
  auto cfg = margin_config(other);
  cfg.delays = {0};
  cfg.repeats = 1;
  ::setenv(kOutputDirEnv, dir.c_str(), 1);
  const auto outcome = run_experiment(cfg);
  ::unsetenv(kOutputDirEnv);
  CHECK(outcome.output_dir == dir);
  CHECK(fs::exists(dir / "summary.csv"));
  CHECK_FALSE(fs::exists(other));
  fs::remove_all(dir);
}

TEST_CASE("engines run through the harness") {
  for (const char* engine : {"async", "pipeline", "mirror"}) {
    CAPTURE(engine);
    const auto dir = scratch(std::string("engine_") + engine);
    auto cfg = margin_config(dir);
    cfg.engine = parse_config(std::string("engine = ") + engine + "\n").engine;
    if (cfg.engine == EngineKind::pipeline) cfg.region = FeasibleRegion::unbounded();
    cfg.shards = 3;
    cfg.delay_histograms = true;
    const auto outcome = run_experiment(cfg);
    REQUIRE(outcome.delays.size() == 2);
    CHECK(outcome.delays[1].median_delay == 3);
    // the pipeline measures delay from the dot-product read, so its first
    // examples see fewer pending updates
    const char* expected = "delay,count\n3,300\n";
    if (cfg.engine == EngineKind::mirror) expected = "delay,count\n3,297\n";
    if (cfg.engine == EngineKind::pipeline) expected = "delay,count\n0,1\n1,1\n2,1\n3,297\n";
    CHECK(slurp(dir / "delays_tau3_rep0.csv") == expected);
    fs::remove_all(dir);
  }
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  CHECK(run_cli("version") == 0);
  CHECK(run_cli("hash-selftest") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run") == 2);
  CHECK(run_cli("run --config " + (dir / "absent.conf").string()) == 2);

  const auto out = dir / "out";
  {
    std::ofstream conf(dir / "missing_data.conf");
    conf << "data.source = corpus\ndata.path = " << (dir / "no_such_corpus.tsv").string() << "\noutput = " << out.string()
         << "\n";
  }
  CHECK(run_cli("run -q --config " + (dir / "missing_data.conf").string()) == 2);
  CHECK_FALSE(fs::exists(out));

  {
    std::ofstream conf(dir / "bad_key.conf");
    conf << "delay = 1\n";
  }
  CHECK(run_cli("run --config " + (dir / "bad_key.conf").string()) == 2);

  {
    std::ofstream corpus(dir / "corpus.tsv");
    for (int i = 0; i < 50; ++i) corpus << (i % 2 ? "1\tgood words here\n" : "-1\tbad words there\n");
    std::ofstream conf(dir / "ok.conf");
    conf << "data.source = corpus\ndata.path = " << (dir / "corpus.tsv").string() << "\nhash.bits = 10\n"
         << "delays = 0, 1\noutput = " << out.string() << "\n";
  }
  CHECK(run_cli("run -q --config " + (dir / "ok.conf").string()) == 0);
  CHECK(fs::exists(out / "summary.csv"));
  CHECK(run_cli("bounds --config " + (dir / "ok.conf").string()) == 0);
  fs::remove_all(dir);
}
