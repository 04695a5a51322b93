#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sliceforge/fixed_point.hpp"
#include "sliceforge/sim.hpp"

using namespace sliceforge;

namespace {

NetworkModel single_erlang(double cap, double nu) {
  return NetworkModel({{"p", {"u"}, cap}}, {{"L", {"p"}, LossSpec::erlang_b()}},
                      {{"f", nu, {{"L", 1}}}});
}

NetworkModel reference() {
  const auto eb = LossSpec::erlang_b();
  return NetworkModel({{"p1", {"u"}, 10}, {"p2", {"u"}, 10}},
                      {{"L1", {"p1"}, eb}, {"L2", {"p2"}, eb}},
                      {{"local1", 3, {{"L1", 1}}},
                       {"local2", 3, {{"L2", 1}}},
                       {"transit", 2, {{"L1", 1}, {"L2", 1}}}});
}

}  // namespace

TEST(CounterRng, DeterministicAndStreamSeparated) {
  CounterRng a(7, 0), b(7, 0), c(7, 1);
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  EXPECT_EQ(a.counter(), 100u);
}

TEST(CounterRng, UniformMoments) {
  CounterRng r(3, 5);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 0.005);
}

TEST(Simulate, ErlangOneServer) {
  SimConfig cfg;
  cfg.seed = 11;
  const auto r = simulate(single_erlang(1, 1), {{1}}, cfg);
  EXPECT_NEAR(r.blocking_per_flow[0].mean, 0.5, 0.02);
  EXPECT_NEAR(r.carried_per_flow[0].mean, 0.5, 0.02);
  EXPECT_EQ(r.generator, "splitmix64-counter");
}

TEST(Simulate, ErlangTenServers) {
  SimConfig cfg;
  cfg.seed = 12;
  const auto r = simulate(single_erlang(10, 5), {{10}}, cfg);
  EXPECT_NEAR(r.blocking_per_flow[0].mean, 0.018385, 0.004);
}

TEST(Simulate, AmpleCapacityRarelyBlocks) {
  SimConfig cfg;
  cfg.horizon = 2e4;
  const auto r = simulate(single_erlang(30, 2), {{30}}, cfg);
  EXPECT_LE(r.blocking_per_flow[0].mean, 0.001);
}

TEST(Simulate, SameSeedSameResult) {
  SimConfig cfg;
  cfg.horizon = 5e3;
  cfg.seed = 99;
  const auto a = simulate(reference(), {{6, 6}}, cfg);
  const auto b = simulate(reference(), {{6, 6}}, cfg);
  EXPECT_EQ(a.arrivals, b.arrivals);
  EXPECT_EQ(a.admitted, b.admitted);
  EXPECT_EQ(a.events, b.events);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.carried_per_flow[r].mean, b.carried_per_flow[r].mean);
  }
  cfg.seed = 100;
  EXPECT_NE(simulate(reference(), {{6, 6}}, cfg).arrivals, a.arrivals);
}

TEST(Simulate, CountsConserveAndCapacityHolds) {
  SimConfig cfg;
  cfg.horizon = 5e3;
  cfg.check_capacity = true;
  const auto r = simulate(reference(), {{4, 3}}, cfg);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.arrivals[k], r.admitted[k] + r.blocked[k]);
    EXPECT_GT(r.arrivals[k], 0u);
    EXPECT_GE(r.blocking_per_flow[k].mean, 0.0);
    EXPECT_LE(r.blocking_per_flow[k].mean, 1.0);
    EXPECT_GE(r.carried_per_flow[k].stderr_, 0.0);
  }
}

TEST(Simulate, Preconditions) {
  const auto m = single_erlang(10, 1);
  SimConfig cfg;
  EXPECT_THROW(simulate(m, {{1.5}}, cfg), DomainError);
  EXPECT_THROW(simulate(m, {{1, 2}}, cfg), DimensionError);
  SimConfig bad = cfg;
  bad.warmup = bad.horizon;
  EXPECT_THROW(simulate(m, {{1}}, bad), DomainError);
  bad = cfg;
  bad.batches = 1;
  EXPECT_THROW(simulate(m, {{1}}, bad), DomainError);
  bad = cfg;
  bad.horizon = 1100;
  EXPECT_THROW(simulate(m, {{1}}, bad), DomainError);
  const NetworkModel lin({{"p", {"u"}, 10}}, {{"L", {"p"}, LossSpec::linear_clip()}},
                         {{"f", 1, {{"L", 1}}}});
  EXPECT_THROW(simulate(lin, {{1}}, cfg), DomainError);
}

TEST(Simulate, ReferenceInstanceCloseToFixedPoint) {
  const auto m = reference();
  const CapacityAllocation c{{6, 6}};
  const double t = carried_total(m, solve_fixed_point(m, c));
  SimConfig cfg;
  cfg.seed = 2024;
  cfg.horizon = 2e5;
  const auto r = simulate(m, c, cfg);
  double sim = 0.0;
  for (const auto& e : r.carried_per_flow) sim += e.mean;
  EXPECT_LE(std::abs(sim - t) / t, 0.05);
}

TEST(BatchEstimate, KnownValues) {
  const auto e = detail::batch_estimate({1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.stderr_, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(detail::batch_estimate({}).mean, 0.0);
}
