#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "dsgd/async_engine.hpp"
#include "dsgd/streams.hpp"

using namespace dsgd;

namespace {

std::vector<SparseExample> margin_stream(std::uint64_t seed, std::size_t d, std::size_t T) {
  SyntheticParams p;
  p.dim = d;
  p.count = T;
  p.nnz = std::min<std::size_t>(4, d);
  p.label_noise = 0.05;
  return synthetic_stream(p, seed);
}

RunConfig base(std::size_t d) {
  RunConfig rc;
  rc.dimension = d;
  rc.loss = {LossKind::smoothed_margin, 0.0};
  rc.schedule = {Schedule::Kind::inv_sqrt_shifted, 0.5, 1.0, 0};
  return rc;
}

AsyncConfig strict(std::size_t n) {
  AsyncConfig a;
  a.workers = n;
  return a;
}

void require_same(const RunResult& a, const RunResult& b) {
  REQUIRE(a.ledger.size() == b.ledger.size());
  for (std::size_t t = 0; t < a.ledger.size(); ++t) REQUIRE(a.ledger.loss(t) == b.ledger.loss(t));
  CHECK(a.ledger.mistakes() == b.ledger.mistakes());
  CHECK(a.trajectory.final_iterate == b.trajectory.final_iterate);
}

}  // namespace

TEST_CASE("one worker equals the simulator without delay") {
  const auto stream = margin_stream(1, 30, 1500);
  auto rc = base(30);
  rc.region = FeasibleRegion::l2_ball(2.0);
  const auto sim = run(rc, stream);
  const auto asy = run_async(strict(1), rc, stream);
  require_same(sim, asy);
  CHECK(asy.ledger.valid());
}

TEST_CASE("strict round robin reproduces the simulator at tau = n - 1") {
  for (std::size_t n : {1u, 2u, 3u, 4u, 8u}) {
    CAPTURE(n);
    for (LossKind kind : {LossKind::smoothed_margin, LossKind::logistic}) {
      for (double l2 : {0.0, 0.01}) {
        const auto stream = margin_stream(10 + n, 25, 1200);
        auto rc = base(25);
        rc.loss = {kind, l2};
        rc.region = FeasibleRegion::l2_ball(3.0);
        rc.tau = n - 1;
        rc.schedule.tau = n - 1;
        rc.drain_tail = true;
        const auto sim = run(rc, stream);
        // the async engine sets tau itself; a mismatched input tau is overridden
        auto arc = rc;
        arc.tau = 0;
        arc.schedule.tau = 0;
        arc.drain_tail = false;
        const auto asy = run_async(strict(n), arc, stream);
        require_same(sim, asy);
        CHECK(asy.trajectory.updates_applied == stream.size());
      }
    }
  }
}

TEST_CASE("strict mode delays are exactly n - 1") {
  const auto stream = margin_stream(3, 20, 600);
  const auto r = run_async(strict(3), base(20), stream);
  REQUIRE(r.delays.counts().size() == 1);
  CHECK(r.delays.counts().begin()->first == 2);
  CHECK(r.delays.total() == 600);
}

TEST_CASE("more workers than examples") {
  const auto stream = margin_stream(4, 10, 3);
  const auto r = run_async(strict(8), base(10), stream);
  CHECK(r.trajectory.updates_applied == 3);
  CHECK(r.ledger.size() == 3);
  CHECK(r.ledger.valid());
}

TEST_CASE("free running keeps every update within max_delay") {
  const auto stream = margin_stream(5, 40, 4000);
  for (auto read : {AsyncConfig::ReadConsistency::snapshot, AsyncConfig::ReadConsistency::relaxed}) {
    AsyncConfig a;
    a.workers = 4;
    a.mode = AsyncConfig::Mode::free_running;
    a.max_delay = 6;
    a.read_consistency = read;
    const auto r = run_async(a, base(40), stream);
    CHECK(r.ledger.valid());
    CHECK(r.trajectory.updates_applied == stream.size());
    CHECK(r.ledger.size() == stream.size());
    CHECK(r.delays.total() == stream.size());
    CHECK(r.delays.max() <= 6);
    CHECK(r.delays.mean() >= 0.0);
  }
}

TEST_CASE("free running loss is close to the simulator at the median delay") {
  const auto stream = margin_stream(6, 60, 20000);
  AsyncConfig a;
  a.workers = 4;
  a.mode = AsyncConfig::Mode::free_running;
  // unshifted schedule, so the engine's own tau does not enter the step sizes
  auto rc = base(60);
  rc.schedule = {Schedule::Kind::inv_sqrt_plain, 0.5, 1.0, 0};
  const auto r = run_async(a, rc, stream);
  rc.tau = r.delays.median();
  const auto sim = run(rc, stream);
  CHECK(r.ledger.average_loss() == doctest::Approx(sim.ledger.average_loss()).epsilon(0.02));
}

TEST_CASE("apply_update requires the token") {
  SharedState s(3);
  const LossSpec loss;
  CHECK_THROWS_AS(s.apply_update(SparseVector({{0, 1.0}}), 0.1, loss, FeasibleRegion::unbounded()), ContractViolation);
  CHECK(s.counter() == 0);
  {
    UpdateGuard guard(s);
    s.apply_update(SparseVector({{0, 1.0}}), 0.1, loss, FeasibleRegion::unbounded());
    s.apply_update(SparseVector({{1, 2.0}}), 0.1, loss, FeasibleRegion::unbounded());
  }
  CHECK(s.counter() == 2);
  CHECK(s.vector().coord(0) == -0.1);
  CHECK(s.vector().coord(1) == -0.2);
  {
    UpdateGuard guard(s);
    s.apply_update(SparseVector(), 0.1, loss, FeasibleRegion::unbounded());
  }
  CHECK(s.counter() == 3);
  CHECK_THROWS_AS(s.apply_update(SparseVector(), 0.1, loss, FeasibleRegion::unbounded()), ContractViolation);
}

TEST_CASE("apply_update matches the simulator step") {
  SharedState s(2);
  ScaledVector x(2);
  const LossSpec reg{LossKind::smoothed_margin, 1.0};
  const SparseVector g({{0, -1.0}});
  UpdateGuard guard(s);
  s.apply_update(g, 0.1, {}, FeasibleRegion::unbounded());
  apply_step(x, g, 0.1, {}, FeasibleRegion::unbounded());
  CHECK(s.vector().coord(0) == x.coord(0));
  s.apply_update(SparseVector(), 0.1, reg, FeasibleRegion::unbounded());
  apply_step(x, SparseVector(), 0.1, reg, FeasibleRegion::unbounded());
  CHECK(s.vector().coord(0) == x.coord(0));
  s.apply_update(SparseVector({{0, 5.0}, {1, 5.0}}), 1.0, {}, FeasibleRegion::l2_ball(1.0));
  apply_step(x, SparseVector({{0, 5.0}, {1, 5.0}}), 1.0, {}, FeasibleRegion::l2_ball(1.0));
  CHECK(s.vector().coord(0) == x.coord(0));
  CHECK(s.vector().coord(1) == x.coord(1));
}

TEST_CASE("config validation") {
  AsyncConfig a;
  a.workers = 0;
  CHECK_THROWS_AS(run_async(a, base(4), margin_stream(1, 4, 4)), DomainError);
  a.workers = 10;
  a.max_delay = 5;
  CHECK_THROWS_AS(run_async(a, base(4), margin_stream(1, 4, 4)), DomainError);
  CHECK_THROWS_AS(run_async(strict(2), base(4), {}), DomainError);
}

TEST_CASE("cancellation leaves a consistent prefix") {
  const auto stream = margin_stream(7, 50, 200000);
  std::atomic<bool> cancel{false};
  std::thread stopper([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    cancel = true;
  });
  const auto r = run_async(strict(4), base(50), stream, &cancel);
  stopper.join();
  CHECK(r.ledger.size() == r.trajectory.updates_applied);
  if (r.trajectory.updates_applied < stream.size()) CHECK_FALSE(r.ledger.valid());
  double sum = 0.0;
  for (std::size_t i = 0; i < r.ledger.size(); ++i) sum += r.ledger.loss(i);
  CHECK(r.ledger.total_loss() == doctest::Approx(sum).epsilon(1e-12));
}
