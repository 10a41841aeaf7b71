#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "dsgd/delayed_engine.hpp"
#include "dsgd/random.hpp"
#include "dsgd/streams.hpp"
#include "oracles.hpp"

using namespace dsgd;

namespace {

std::vector<SparseExample> margin_stream(std::uint64_t seed, std::size_t d, std::size_t T) {
  SyntheticParams p;
  p.kind = SyntheticParams::Kind::linear_margin_iid;
  p.dim = d;
  p.count = T;
  p.nnz = std::min<std::size_t>(3, d);
  p.z_norm = 1.5;
  p.label_noise = 0.1;
  return synthetic_stream(p, seed);
}

oracle::Loss to_oracle(LossKind k) {
  switch (k) {
    case LossKind::smoothed_margin: return oracle::Loss::smoothed_margin;
    case LossKind::logistic: return oracle::Loss::logistic;
    case LossKind::squared: return oracle::Loss::squared;
    default: return oracle::Loss::centered_quadratic;
  }
}

}  // namespace

TEST_CASE("delay buffer") {
  DelayBuffer pass(0);
  auto out = pass.push({SparseVector({{0, 1.0}}), 1});
  REQUIRE(out);
  CHECK(out->birth_step == 1);
  CHECK(pass.size() == 0);

  DelayBuffer buf(2);
  CHECK_FALSE(buf.push({{}, 1}));
  CHECK_FALSE(buf.push({{}, 2}));
  for (std::uint64_t t = 3; t < 10; ++t) {
    auto g = buf.push({{}, t});
    REQUIRE(g);
    CHECK(g->birth_step == t - 2);
    CHECK(buf.size() == 2);
  }
}

TEST_CASE("hand-unrolled scalar recursion with tau = 1") {
  // f(x) = 1/2 (x - 1)^2, eta = 0.5: x_{t+1} = x_t - 0.5 (x_{t-1} - 1)
  const LossSpec loss{LossKind::squared, 0.0};
  const SparseExample ex{1.0, SparseVector({{0, 1.0}})};
  ScaledVector x(1);
  DelayBuffer buf(1);
  std::vector<double> iterates{x.coord(0)};
  for (std::uint64_t t = 1; t <= 4; ++t) {
    auto g = buf.push({evaluate_example(loss, x, ex).gradient, t});
    if (g) apply_step(x, g->gradient, 0.5, loss, FeasibleRegion::unbounded());
    iterates.push_back(x.coord(0));
  }
  // independent unroll
  std::vector<double> expect{0.0, 0.0};
  for (int t = 2; t <= 4; ++t) expect.push_back(expect[t - 1] - 0.5 * (expect[t - 2] - 1.0));
  CHECK(expect == std::vector<double>{0.0, 0.0, 0.5, 1.0, 1.25});
  CHECK(iterates == expect);
}

TEST_CASE("update at t = tau + 1 uses the first gradient") {
  RunConfig cfg;
  cfg.tau = 2;
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 1.0, 1.0, 2};
  cfg.loss = {LossKind::squared, 0.0};
  cfg.dimension = 1;
  cfg.record_trajectory = true;
  std::vector<SparseExample> stream(5, SparseExample{1.0, SparseVector({{0, 1.0}})});
  const auto r = run(cfg, stream);
  CHECK(r.trajectory.applied_birth_steps == std::vector<std::uint64_t>{1, 2, 3});
  REQUIRE(r.trajectory.iterates.size() == 6);
  CHECK(r.trajectory.iterates[1][0] == 0.0);
  CHECK(r.trajectory.iterates[2][0] == 0.0);
  // g_1 = -(1 - 0) at x_1 = 0, eta_3 = 1 / sqrt(1)
  CHECK(r.trajectory.iterates[3][0] == 1.0);
  CHECK(r.delays.counts().size() == 1);
  CHECK(r.delays.counts().at(2) == 3);
}

TEST_CASE("step examples and contract") {
  RunConfig cfg;
  cfg.tau = 0;
  cfg.schedule = {Schedule::Kind::inv_sqrt_plain};
  cfg.dimension = 2;
  DelayedState st{&cfg, ScaledVector(2)};
  st.x.add(SparseVector({{0, 1.0}}), 1.0);
  apply_step(st.x, SparseVector({{0, 1.0}}), 0.1, {}, FeasibleRegion::unbounded());
  CHECK(st.x.coord(0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(st.x.coord(1) == 0.0);
  apply_step(st.x, SparseVector(), 0.1, {LossKind::smoothed_margin, 1.0}, FeasibleRegion::unbounded());
  CHECK(st.x.coord(0) == doctest::Approx(0.81).epsilon(1e-15));

  RunConfig delayed = cfg;
  delayed.tau = 3;
  DelayedState st2{&delayed, ScaledVector(2)};
  CHECK_THROWS_AS(step(st2, SparseVector(), 3), ContractViolation);
  CHECK_NOTHROW(step(st2, SparseVector(), 4));
}

TEST_CASE("run errors and degenerate cases") {
  RunConfig cfg;
  cfg.dimension = 4;
  CHECK_THROWS_AS(run(cfg, {}), DomainError);
  const auto stream = margin_stream(1, 4, 5);
  cfg.tau = 2;
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 1.0, 1.0, 1};
  CHECK_THROWS_AS(run(cfg, stream), DomainError);
  cfg.schedule.tau = 2;
  cfg.dimension = 0;
  CHECK_THROWS_AS(run(cfg, stream), DomainError);
  cfg.dimension = 2;
  CHECK_THROWS_AS(run(cfg, stream), StructuralError);
}

TEST_CASE("tau >= T warns and applies nothing") {
  RunConfig cfg;
  cfg.dimension = 4;
  cfg.tau = 10;
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 1.0, 1.0, 10};
  const auto stream = margin_stream(1, 4, 5);
  const auto r = run(cfg, stream);
  CHECK(r.trajectory.updates_applied == 0);
  CHECK(r.trajectory.warnings.size() == 1);
  CHECK(r.ledger.size() == 5);
  CHECK(r.trajectory.final_iterate == ParameterVector(4));
}

TEST_CASE("ledger accounting") {
  RunConfig cfg;
  cfg.dimension = 10;
  cfg.tau = 3;
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.5, 1.0, 3};
  const auto stream = margin_stream(2, 10, 500);
  const auto r = run(cfg, stream);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.ledger.size(); ++i) {
    sum += r.ledger.loss(i);
    CHECK(std::abs(r.ledger.cumulative_loss(i) - sum) <= 1e-12 * std::max(1.0, sum));
    if (i > 0) CHECK(r.ledger.cumulative_loss(i) >= r.ledger.cumulative_loss(i - 1));
  }
  CHECK(r.trajectory.updates_applied == 497);
  CHECK(r.delays.total() == 497);
}

TEST_CASE("drain_tail applies the queued gradients") {
  RunConfig cfg;
  cfg.dimension = 6;
  cfg.tau = 4;
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.5, 1.0, 4};
  cfg.drain_tail = true;
  cfg.record_trajectory = true;
  const auto stream = margin_stream(3, 6, 50);
  const auto r = run(cfg, stream);
  CHECK(r.trajectory.updates_applied == 50);
  CHECK(r.trajectory.iterates.size() == 55);
  CHECK(r.delays.counts().at(4) == 50);
}

TEST_CASE("delayed runs match the plain projected SGD oracle bit for bit") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + uniform_below(rng, 20);
    const std::size_t T = 1 + uniform_below(rng, 400);
    RunConfig cfg;
    cfg.dimension = d;
    cfg.tau = uniform_below(rng, 6);
    cfg.loss = {std::array{LossKind::smoothed_margin, LossKind::logistic, LossKind::squared}[uniform_below(rng, 3)], 0.0};
    cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.1 + uniform01(rng), 1.0, cfg.tau};
    if (uniform01(rng) < 0.5) cfg.region = FeasibleRegion::l2_ball(0.5 + uniform01(rng));
    cfg.record_trajectory = true;
    const auto stream = margin_stream(trial, d, T);
    const auto r = run(cfg, stream);

    oracle::Config oc;
    oc.loss = to_oracle(cfg.loss.kind);
    oc.tau = cfg.tau;
    oc.radius = cfg.region.kind == FeasibleRegion::Kind::l2_ball ? cfg.region.radius : 0.0;
    const double sigma = cfg.schedule.sigma;
    const auto tau = cfg.tau;
    oc.eta = [=](std::uint64_t t) { return sigma / std::sqrt(static_cast<double>(t - tau)); };
    const auto o = oracle::projected_sgd(oc, d, stream);
    REQUIRE(r.trajectory.iterates.size() == o.iterates.size());
    for (std::size_t t = 0; t < o.iterates.size(); ++t) {
      const auto& a = r.trajectory.iterates[t];
      for (std::size_t i = 0; i < d; ++i) REQUIRE(a[i] == o.iterates[t][i]);
    }
    for (std::size_t t = 0; t < T; ++t) CHECK(r.ledger.loss(t) == o.losses[t]);
  }
}

TEST_CASE("lazy L2 agrees with dense shrinkage to rounding") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + uniform_below(rng, 10);
    RunConfig cfg;
    cfg.dimension = d;
    cfg.tau = uniform_below(rng, 4);
    cfg.loss = {LossKind::logistic, 0.05 + 0.2 * uniform01(rng)};
    cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.5, 1.0, cfg.tau};
    const auto stream = margin_stream(100 + trial, d, 300);
    const auto r = run(cfg, stream);

    std::vector<double> x(d, 0.0);
    std::vector<std::vector<double>> grads;
    for (std::size_t t = 1; t <= stream.size(); ++t) {
      const auto& ex = stream[t - 1];
      const double chi = ex.label * oracle::dense_dot(x, ex.features);
      std::vector<double> g(d, 0.0);
      for (const auto& e : ex.features.entries()) g[e.index] = ex.label * oracle::loss_slope(oracle::Loss::logistic, chi) * e.value;
      grads.push_back(g);
      if (t > cfg.tau) {
        const double eta = cfg.schedule.eta(t);
        for (std::size_t i = 0; i < d; ++i) x[i] = (1.0 - eta * cfg.loss.l2_reg) * x[i] - eta * grads[t - 1 - cfg.tau][i];
      }
    }
    for (std::size_t i = 0; i < d; ++i) CHECK(r.trajectory.final_iterate[i] == doctest::Approx(x[i]).epsilon(1e-10));
  }
}

TEST_CASE("runs are reproducible") {
  RunConfig cfg;
  cfg.dimension = 12;
  cfg.tau = 5;
  cfg.loss = {LossKind::smoothed_margin, 0.01};
  cfg.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.3, 1.0, 5};
  const auto stream = margin_stream(8, 12, 2000);
  const auto a = run(cfg, stream);
  const auto b = run(cfg, stream);
  CHECK(a.trajectory.final_iterate == b.trajectory.final_iterate);
  for (std::size_t i = 0; i < a.ledger.size(); ++i) CHECK(a.ledger.loss(i) == b.ledger.loss(i));
}
