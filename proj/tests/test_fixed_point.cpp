#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sliceforge/fixed_point.hpp"

using namespace sliceforge;

namespace {

NetworkModel single(const LossSpec& spec, double nu, int a) {
  return NetworkModel({{"p", {"u"}, 1e6}}, {{"L", {"p"}, spec}}, {{"f", nu, {{"L", a}}}});
}

const std::vector<LossSpec> kKinds{LossSpec::erlang_b(), LossSpec::linear_clip(),
                                   LossSpec::exp_overflow()};

// max_i |rho_i - G_i(rho)| / (1 + rho_i), recomputed from scratch.
double residual(const NetworkModel& m, const CapacityAllocation& c, const LoadState& s) {
  std::vector<double> pass(m.logical_count());
  for (std::size_t i = 0; i < pass.size(); ++i) {
    pass[i] = 1.0 - loss(m.loss_of(i), s.rho[i], c[i]);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < pass.size(); ++i) {
    double rhs = 0.0;
    for (std::size_t r = 0; r < m.flow_count(); ++r) {
      double carried = m.flows()[r].offered;
      for (std::size_t j = 0; j < pass.size(); ++j) carried *= std::pow(pass[j], m.demand(j, r));
      rhs += m.demand(i, r) * carried;
    }
    rhs /= pass[i];
    worst = std::max(worst, std::abs(s.rho[i] - rhs) / (1.0 + s.rho[i]));
  }
  return worst;
}

}  // namespace

TEST(FixedPoint, SingleEntityUnitDemandGivesOfferedLoad) {
  for (const auto& k : kKinds) {
    for (double c : {0.0, 0.7, 3.0, 50.0}) {
      const auto s = solve_fixed_point(single(k, 4.0, 1), {{c}});
      EXPECT_TRUE(s.converged);
      EXPECT_NEAR(s.rho[0], 4.0, 1e-12) << k.name() << " " << c;
    }
  }
}

TEST(FixedPoint, LinearClipDoubleDemand) {
  const auto m = single(LossSpec::linear_clip(), 1.0, 2);
  const auto s = solve_fixed_point(m, {{1.0}});
  ASSERT_TRUE(s.converged);
  EXPECT_NEAR(s.rho[0], std::sqrt(2.0), 1e-8);
  EXPECT_NEAR(carried_total(m, s), 0.5, 1e-8);
}

TEST(FixedPoint, ZeroFlows) {
  const NetworkModel m({{"p", {"u"}, 3}}, {{"L", {"p"}, LossSpec::erlang_b()}}, {});
  const auto s = solve_fixed_point(m, {{2.0}});
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.iterations, 1);
  EXPECT_EQ(s.rho[0], 0.0);
  EXPECT_EQ(carried_total(m, s), 0.0);
}

TEST(FixedPoint, AmpleCapacityCarriesEverything) {
  const NetworkModel m({{"p", {"u"}, 1e6}},
                       {{"A", {"p"}, LossSpec::linear_clip()}, {"B", {"p"}, LossSpec::linear_clip()}},
                       {{"f", 2, {{"A", 1}}}, {"g", 3, {{"A", 1}, {"B", 2}}}});
  const auto s = solve_fixed_point(m, {{100, 100}});
  EXPECT_DOUBLE_EQ(carried_total(m, s), 5.0);
}

TEST(FixedPoint, ZeroCapacityOnSharedEntityBlocksEverything) {
  const NetworkModel m({{"p", {"u"}, 10}, {"q", {"u"}, 10}},
                       {{"core", {"p"}, LossSpec::erlang_b()}, {"edge", {"q"}, LossSpec::erlang_b()}},
                       {{"f", 2, {{"core", 1}}}, {"g", 3, {{"core", 1}, {"edge", 1}}}});
  const auto s = solve_fixed_point(m, {{0, 5}});
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(carried_total(m, s), 0.0);
  ASSERT_EQ(s.fully_blocked.size(), 1u);
  EXPECT_EQ(s.fully_blocked[0], 0u);
  EXPECT_EQ(s.blocking[0], 1.0);
}

TEST(FixedPoint, NonConvergenceIsReportedNotThrown) {
  const NetworkModel m({{"p", {"u"}, 10}},
                       {{"A", {"p"}, LossSpec::erlang_b()}, {"B", {"p"}, LossSpec::erlang_b()}},
                       {{"f", 6, {{"A", 1}, {"B", 1}}}, {"g", 4, {{"A", 2}}}});
  FixedPointOptions o;
  o.max_iters = 1;
  const auto s = solve_fixed_point(m, {{3, 3}}, o);
  EXPECT_FALSE(s.converged);
  EXPECT_EQ(s.iterations, 1);
}

TEST(FixedPoint, DimensionAndDomainChecks) {
  const auto m = single(LossSpec::erlang_b(), 1, 1);
  EXPECT_THROW(solve_fixed_point(m, {{1, 2}}), DimensionError);
  EXPECT_THROW(solve_fixed_point(m, {{-1}}), DomainError);
}

TEST(FixedPoint, RandomInstanceInvariants) {
  std::mt19937_64 rng(123);
  for (int k = 0; k < 150; ++k) {
    const auto m = oracle::random_model(rng, 1 + k % 5, 1 + k % 3, 1 + k % 6, kKinds);
    const auto c = oracle::random_feasible(rng, m);
    const auto s = solve_fixed_point(m, c);
    ASSERT_TRUE(s.converged) << k;
    EXPECT_LE(residual(m, c, s), 1e-9 * 1.01);
    double total = 0.0, offered = 0.0;
    for (std::size_t r = 0; r < m.flow_count(); ++r) {
      EXPECT_LE(s.carried_per_flow[r], m.flows()[r].offered * (1 + 1e-15));
      total += s.carried_per_flow[r];
      offered += m.flows()[r].offered;
    }
    EXPECT_DOUBLE_EQ(carried_total(m, s), total);
    EXPECT_LE(total, offered);
    for (std::size_t i = 0; i < m.logical_count(); ++i) {
      EXPECT_EQ(s.blocking[i], loss(m.loss_of(i), s.rho[i], c[i]));
    }
  }
}

TEST(FixedPoint, CarriedLoadMonotoneInCapacity) {
  // Fixed points need not be unique; decreases larger than the solver
  // tolerance are recorded rather than failed.
  std::mt19937_64 rng(321);
  int decreases = 0, trials = 0;
  for (int k = 0; k < 80; ++k) {
    const auto m = oracle::random_model(rng, 1 + k % 4, 1 + k % 3, 1 + k % 5, kKinds);
    auto c = oracle::random_feasible(rng, m, 0.3);
    const double before = carried_total(m, solve_fixed_point(m, c));
    c[k % m.logical_count()] *= 1.2;
    const double after = carried_total(m, solve_fixed_point(m, c));
    ++trials;
    if (after < before - 1e-9 * (1.0 + before)) ++decreases;
  }
  RecordProperty("monotonicity_exceptions", decreases);
  EXPECT_LE(decreases, trials / 10);
}

TEST(Diagnostics, ZeroFlows) {
  const NetworkModel m({{"p", {"u"}, 3}}, {{"L", {"p"}, LossSpec::erlang_b()}}, {});
  const auto s = solve_fixed_point(m, {{2.0}});
  const auto d = diagnostics(m, {{2.0}}, s);
  EXPECT_EQ(d.T, 0.0);
  EXPECT_EQ(d.Q, 0.0);
  EXPECT_EQ(d.eps, 0.0);
}

TEST(Diagnostics, LinearClipClosedForm) {
  const auto m = single(LossSpec::linear_clip(), 2.0, 1);
  const auto s = solve_fixed_point(m, {{1.0}});
  const auto d = diagnostics(m, {{1.0}}, s);
  EXPECT_NEAR(d.T, 1.0, 1e-12);
  EXPECT_NEAR(s.blocking[0], 0.5, 1e-12);
  EXPECT_NEAR(d.eps, std::log(2.0), 1e-6);
  EXPECT_NEAR(d.Q, 1.0 + std::log(2.0), 1e-6);
  EXPECT_NEAR(d.eps_bound, 1.0, 1e-12);
  EXPECT_GE(d.eps_bound, d.eps);
  EXPECT_EQ(d.L, 1.0);
}

TEST(Diagnostics, FourHopInstanceStaysClose) {
  const auto eb = LossSpec::erlang_b();
  std::vector<PhysicalEntity> phys;
  std::vector<LogicalEntity> logs;
  for (int k = 1; k <= 4; ++k) {
    phys.push_back({"h" + std::to_string(k), {"c"}, 40});
    logs.push_back({"L" + std::to_string(k), {"h" + std::to_string(k)}, eb});
  }
  const NetworkModel m(phys, logs,
                       {{"e2e", 12, {{"L1", 1}, {"L2", 1}, {"L3", 1}, {"L4", 1}}},
                        {"a", 6, {{"L1", 1}, {"L2", 1}}},
                        {"b", 6, {{"L3", 1}, {"L4", 1}}}});
  const CapacityAllocation c{{35, 35, 35, 35}};
  const auto d = diagnostics(m, c, solve_fixed_point(m, c));
  EXPECT_LT(d.B_max, 0.005);
  EXPECT_EQ(d.L, 4.0);
  EXPECT_LE(d.T, d.Q);
  EXPECT_LT(d.Q, 1.02 * d.T);
  // Tw weights each flow by its length.
  EXPECT_GT(d.Tw, 2.0 * d.T);
}

TEST(Diagnostics, UtilizationCorrectionBoundedByBlockedLoad) {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 100; ++k) {
    const auto m = oracle::random_model(rng, 1 + k % 5, 1 + k % 3, 1 + k % 6, kKinds);
    const auto c = oracle::random_feasible(rng, m);
    const auto s = solve_fixed_point(m, c);
    const auto d = diagnostics(m, c, s);
    EXPECT_GE(d.eps, 0.0);
    EXPECT_LE(d.eps, d.eps_bound + 1e-9 * (1.0 + d.eps_bound));
    EXPECT_LE(d.T, d.Q);
    // The bound that does follow from eps <= sum rho B.
    if (d.T > 0.0) {
      EXPECT_LE(d.Q, (1.0 + d.L * d.B_max / (1.0 - d.B_max)) * d.T * (1.0 + 1e-9));
    }
  }
}

TEST(Diagnostics, MultiUnitRouteLength) {
  const NetworkModel m({{"p", {"u"}, 10}, {"q", {"u"}, 10}},
                       {{"A", {"p"}, LossSpec::erlang_b()}, {"B", {"q"}, LossSpec::erlang_b()}},
                       {{"f", 1, {{"A", 2}, {"B", 3}}}});
  const auto d = diagnostics(m, {{50, 50}}, solve_fixed_point(m, {{50, 50}}));
  EXPECT_EQ(d.L, 5.0);
}
