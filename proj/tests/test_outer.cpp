#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sliceforge/outer.hpp"

using namespace sliceforge;

namespace {

Polytope make_poly(std::vector<std::vector<double>> rows, std::vector<double> b) {
  Dense<double> a(rows.size(), rows.empty() ? 0 : rows[0].size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) a(i, j) = rows[i][j];
  }
  return Polytope(std::move(a), std::move(b));
}

// Best vertex of a 2-D polytope by enumerating pairwise intersections of
// the constraint lines (including the axes).
double best_vertex_2d(const Polytope& p, const std::vector<double>& c) {
  std::vector<std::array<double, 3>> lines;
  for (std::size_t i = 0; i < p.rows(); ++i) lines.push_back({p.a()(i, 0), p.a()(i, 1), p.b()[i]});
  lines.push_back({1, 0, 0});
  lines.push_back({0, 1, 0});
  double best = -INFINITY;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t k = i + 1; k < lines.size(); ++k) {
      const auto& u = lines[i];
      const auto& v = lines[k];
      const double det = u[0] * v[1] - u[1] * v[0];
      if (std::abs(det) < 1e-12) continue;
      const std::vector<double> x{(u[2] * v[1] - u[1] * v[2]) / det, (u[0] * v[2] - u[2] * v[0]) / det};
      if (p.contains(x, 1e-9)) best = std::max(best, c[0] * x[0] + c[1] * x[1]);
    }
  }
  return best;
}

NetworkModel single_linear(double cap, double nu) {
  return NetworkModel({{"p", {"u"}, cap}}, {{"L", {"p"}, LossSpec::linear_clip()}},
                      {{"f", nu, {{"L", 1}}}});
}

NetworkModel two_slices(double nu1, double nu2) {
  return NetworkModel({{"link", {"u"}, 10}},
                      {{"a", {"link"}, LossSpec::erlang_b()}, {"b", {"link"}, LossSpec::erlang_b()}},
                      {{"fa", nu1, {{"a", 1}}}, {"fb", nu2, {{"b", 1}}}});
}

}  // namespace

TEST(Lp, SimplexCorner) {
  const auto p = make_poly({{1, 1}}, {1});
  const auto r = lp_solve(std::vector<double>{1, 0}, p);
  EXPECT_DOUBLE_EQ(r.x[0], 1.0);
  EXPECT_DOUBLE_EQ(r.x[1], 0.0);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
}

TEST(Lp, TwoRows) {
  const auto p = make_poly({{1, 0}, {1, 1}}, {3, 5});
  const auto r = lp_solve(std::vector<double>{1, 0}, p);
  EXPECT_DOUBLE_EQ(r.x[0], 3.0);
  EXPECT_DOUBLE_EQ(r.x[1], 0.0);
}

TEST(Lp, ZeroObjectiveReturnsOrigin) {
  const auto p = make_poly({{1, 2}, {3, 1}}, {4, 6});
  const auto r = lp_solve(std::vector<double>{0, 0}, p);
  EXPECT_EQ(r.x, (std::vector<double>{0, 0}));
  EXPECT_EQ(r.pivots, 0);
}

TEST(Lp, PolytopeValidation) {
  EXPECT_THROW(make_poly({{1, 0}}, {1}), DomainError);  // x2 unbounded
  EXPECT_THROW(make_poly({{1, 1}}, {-1}), DomainError);
  EXPECT_THROW(Polytope(Dense<double>(2, 2, 1.0), {1.0}), DimensionError);
}

TEST(Lp, RandomInstancesMatchVertexEnumeration) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ua(0.0, 3.0), ub(0.5, 10.0), uc(-1.0, 2.0);
  for (int k = 0; k < 300; ++k) {
    const int rows = 1 + k % 4;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (int i = 0; i < rows; ++i) {
      a.push_back({ua(rng), ua(rng)});
      b.push_back(ub(rng));
    }
    a[0][0] = std::max(a[0][0], 0.1);
    a[0][1] = std::max(a[0][1], 0.1);
    const auto p = make_poly(a, b);
    const std::vector<double> c{uc(rng), uc(rng)};
    const auto r = lp_solve(c, p);
    EXPECT_TRUE(p.contains(r.x, 1e-9));
    EXPECT_NEAR(r.value, best_vertex_2d(p, c), 1e-9 * (1.0 + std::abs(r.value)));
    EXPECT_GE(p.tight_count(r.x, 1e-9), 2u);
  }
}

TEST(Lp, CapacityPolytopeVertexIsTight) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const auto m = oracle::random_model(rng, 1 + k % 5, 1 + k % 4, 2, {LossSpec::erlang_b()});
    const auto p = capacity_polytope(m);
    std::vector<double> c(m.logical_count());
    for (auto& v : c) v = uc(rng);
    const auto r = lp_solve(c, p);
    EXPECT_TRUE(check_feasible(m, {r.x}).ok);
    EXPECT_GE(p.tight_count(r.x, 1e-9), m.logical_count());
  }
}

TEST(Supergradient, LinearClipClosedForm) {
  // d/dC [C + C log(nu/C)] = log(nu/C) for C < nu.
  const auto m = single_linear(10, 2.0);
  const CapacityAllocation c{{1.0}};
  const auto s = phi(m, c);
  EXPECT_NEAR(supergradient_C(m, c, s.y)[0], std::log(2.0), 1e-6);
}

TEST(Supergradient, ZeroAboveOfferedLoad) {
  const auto m = single_linear(10, 2.0);
  for (double cap : {2.5, 5.0}) {
    const CapacityAllocation c{{cap}};
    EXPECT_NEAR(supergradient_C(m, c, phi(m, c).y)[0], 0.0, 1e-9);
  }
}

TEST(Supergradient, MatchesFiniteDifferenceOfPhi) {
  const NetworkModel m({{"p", {"u"}, 40}},
                       {{"A", {"p"}, LossSpec::erlang_b()}, {"B", {"p"}, LossSpec::exp_overflow()}},
                       {{"f", 6, {{"A", 1}}}, {"g", 4, {{"A", 1}, {"B", 1}}}});
  for (const auto& cv : std::vector<std::vector<double>>{{3, 2}, {7, 5}, {5.5, 1.2}}) {
    const CapacityAllocation c{cv};
    const auto s = phi(m, c);
    OuterOptions o;
    o.threads = 2;
    const auto g = supergradient_C(m, c, s.y, o);
    for (std::size_t j = 0; j < 2; ++j) {
      const double h = 1e-3;
      auto up = cv, dn = cv;
      up[j] += h;
      dn[j] -= h;
      const double fd = (phi(m, {up}).phi - phi(m, {dn}).phi) / (2 * h);
      EXPECT_NEAR(g[j], fd, 1e-3 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Supergradient, ThreadCountDoesNotChangeResult) {
  const NetworkModel m({{"p", {"u"}, 40}},
                       {{"A", {"p"}, LossSpec::erlang_b()}, {"B", {"p"}, LossSpec::erlang_b()},
                        {"C", {"p"}, LossSpec::linear_clip()}},
                       {{"f", 6, {{"A", 1}}}, {"g", 4, {{"B", 1}, {"C", 1}}}});
  const CapacityAllocation c{{4, 3, 2}};
  const auto y = phi(m, c).y;
  OuterOptions one, many;
  many.threads = 0;
  EXPECT_EQ(supergradient_C(m, c, y, one), supergradient_C(m, c, y, many));
}

TEST(MaximizePhi, SingleLinearEntityFillsCapacity) {
  const auto t = maximize_phi(single_linear(10, 20));
  EXPECT_EQ(t.status, SolveStatus::converged);
  EXPECT_NEAR(t.C[0], 10.0, 1e-6);
}

TEST(MaximizePhi, SymmetricSlicesSplitEvenly) {
  const auto t = maximize_phi(two_slices(8, 8));
  EXPECT_EQ(t.status, SolveStatus::converged);
  EXPECT_NEAR(t.C[0], 5.0, 1e-2);
  EXPECT_NEAR(t.C[1], 5.0, 1e-2);
  EXPECT_LE(t.gap, 1e-5 * (1.0 + std::abs(t.phi)));
}

TEST(MaximizePhi, IdleSliceGetsAlmostNothing) {
  const auto m = two_slices(8, 0);
  const auto t = maximize_phi(m);
  double best = -INFINITY;
  for (double a = 0.0; a <= 10.0; a += 0.1) best = std::max(best, phi(m, {{a, 10.0 - a}}).phi);
  EXPECT_GE(t.phi, best * 0.99);
  EXPECT_GT(t.C[0], 9.0);
}

TEST(MaximizePhi, IteratesFeasibleAndPhiNondecreasing) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 8; ++k) {
    const auto m = oracle::random_model(rng, 1 + k % 3, 1 + k % 2, 1 + k % 4,
                                        {LossSpec::erlang_b(), LossSpec::linear_clip()});
    OuterOptions o;
    o.max_iters = 60;
    const auto t = maximize_phi(m, o);
    EXPECT_TRUE(check_feasible(m, t.C).ok);
    for (std::size_t s = 1; s < t.steps.size(); ++s) {
      EXPECT_GE(t.steps[s].phi, t.steps[s - 1].phi - 1e-9 * (1.0 + std::abs(t.steps[s].phi)));
    }
    EXPECT_GE(t.gap, -1e-9);
    // Any feasible point stays below phi + gap, up to supergradient error.
    for (int q = 0; q < 5; ++q) {
      const auto c = oracle::random_feasible(rng, m, 0.0);
      EXPECT_LE(phi(m, c).phi, t.phi + t.gap + 1e-4 * (1.0 + t.phi));
    }
  }
}

TEST(MaximizePhi, FixedStepVariantStillFeasible) {
  OuterOptions o;
  o.line_search = false;
  o.max_iters = 40;
  const auto m = two_slices(8, 8);
  const auto t = maximize_phi(m, o);
  EXPECT_TRUE(check_feasible(m, t.C).ok);
  EXPECT_EQ(t.iterations, static_cast<int>(t.steps.size()));
}

TEST(Reconfig, FullBudgetSwitchesEverythingOn) {
  const NetworkModel m({{"s1", {"u"}, 1}, {"s2", {"u"}, 1}, {"s3", {"u"}, 1}},
                       {{"L1", {"s1"}, LossSpec::erlang_b()}, {"L2", {"s2"}, LossSpec::erlang_b()},
                        {"L3", {"s3"}, LossSpec::erlang_b()}},
                       {{"f1", 3, {{"L1", 1}}}, {"f2", 1, {{"L2", 1}}}, {"f3", 1, {{"L3", 1}}}});
  const auto r = solve_reconfig({m, 3.0});
  EXPECT_EQ(r.C_phys, (std::vector<double>{1, 1, 1}));
  EXPECT_LE(r.phi_after_rounding, r.phi_before_rounding + 1e-6);
  const auto one = solve_reconfig({m, 1.0});
  EXPECT_EQ(one.C_phys, (std::vector<double>{1, 0, 0}));
  EXPECT_LE(one.phi_after_rounding, one.phi_before_rounding + 1e-6);
}

TEST(Reconfig, NoLoadPicksLowestIndex) {
  const NetworkModel m({{"s1", {"u"}, 1}, {"s2", {"u"}, 1}, {"s3", {"u"}, 1}},
                       {{"L1", {"s1"}, LossSpec::erlang_b()}, {"L2", {"s2"}, LossSpec::erlang_b()},
                        {"L3", {"s3"}, LossSpec::erlang_b()}},
                       {});
  const auto r = solve_reconfig({m, 1.0});
  EXPECT_EQ(r.C_phys, (std::vector<double>{1, 0, 0}));
}

TEST(Reconfig, Validation) {
  const auto m = single_linear(2.0, 1.0);
  EXPECT_THROW(solve_reconfig({m, 1.0}), ValidationError);
  const auto unit = single_linear(1.0, 1.0);
  EXPECT_THROW(solve_reconfig({unit, 0.0}), ValidationError);
  EXPECT_THROW(solve_reconfig({unit, 2.0}), ValidationError);
  EXPECT_NO_THROW(solve_reconfig({unit, 1.0}));
}
