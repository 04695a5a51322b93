#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "sliceforge/error.hpp"
#include "sliceforge/inner.hpp"
#include "sliceforge/loss.hpp"
#include "sliceforge/model.hpp"
#include "sliceforge/simplex.hpp"

namespace sliceforge {

struct OuterOptions {
  int max_iters = 500;
  /// Stop once the Frank-Wolfe gap is <= gap_tol * (1 + |phi|).
  double gap_tol = 1e-5;
  /// Golden-section search along each direction; otherwise step 2/(k+2).
  bool line_search = true;
  int line_search_evals = 40;
  double line_search_tol = 1e-6;
  InnerOptions inner{};
  /// Worker threads for the supergradient; 0 means hardware concurrency.
  unsigned threads = 1;
};

enum class SolveStatus { converged, max_iters, stalled };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::stalled: return "stalled";
  }
  return "unknown";
}

struct TraceStep {
  double phi = 0.0;
  double gap = 0.0;
  double step = 0.0;
};

struct SolveTrace {
  std::vector<TraceStep> steps;
  CapacityAllocation C;
  double phi = 0.0;
  /// Frank-Wolfe gap at C. For concave phi it bounds phi* - phi(C) from
  /// above, up to supergradient error.
  double gap = 0.0;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  /// Every inner solve reported convergence.
  bool inner_converged = true;
  /// Minimizing y at C, for reuse by callers.
  std::vector<double> y;
  /// Coordinates beyond C (C_phys in the reconfigurable relaxation).
  std::vector<double> aux;
};

/// {C : S^T C <= C_phys, C >= 0}; one row per physical entity.
inline Polytope capacity_polytope(const NetworkModel& model) {
  const auto& s = model.incidence();
  Dense<double> a(model.physical_count(), model.logical_count(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t k = 0; k < s.cols(); ++k) a(k, i) = s(i, k);
  }
  return Polytope(std::move(a), model.physical_capacities());
}

namespace detail {

inline unsigned resolve_threads(unsigned requested, std::size_t work) {
  unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency())
                              : requested;
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(1, work)));
}

template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  threads = resolve_threads(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Estimate of dphi/dC_j from differences of int_0^{y_j} U(z, C_j) dz with
/// y held at the inner minimizer; the flow term does not depend on C, and
/// the change of the minimizer only enters at second order.
///
/// Central differences with h_j = max(1e-4, 1e-6 C_j); forward differences
/// when C_j < h_j. y_j is clamped to the box of the perturbed capacity.
inline std::vector<double> supergradient_C(const NetworkModel& model,
                                           const CapacityAllocation& alloc,
                                           std::span<const double> y,
                                           const OuterOptions& opts = {}) {
  detail::require_alloc(model, alloc);
  detail::require_y(model, y);
  QuadratureOptions quad;
  quad.abs_tol = 1e-13;
  quad.rel_tol = 1e-12;
  quad.max_depth = 50;

  const std::size_t m = model.logical_count();
  std::vector<double> grad(m, 0.0);
  detail::parallel_for(m, opts.threads, [&](std::size_t j) {
    const LossSpec& spec = model.loss_of(j);
    const double c = alloc[j];
    const double h = std::max(1e-4, 1e-6 * c);
    auto integral = [&](double cap) {
      const double yj = std::min(y[j], inner_upper_bound(spec, cap, opts.inner.y_max));
      return utilization_integral(spec, yj, cap, quad);
    };
    if (c < h) {
      grad[j] = (integral(c + h) - integral(c)) / h;
    } else {
      grad[j] = (integral(c + h) - integral(c - h)) / (2.0 * h);
    }
    grad[j] = std::max(0.0, grad[j]);
  });
  return grad;
}

namespace detail {

struct PhiEval {
  double phi = 0.0;
  std::vector<double> y;
  bool converged = true;
};

// Frank-Wolfe over `poly`, where phi depends only on the first m
// coordinates of x.
inline SolveTrace frank_wolfe(const NetworkModel& model, const Polytope& poly,
                              const OuterOptions& opts) {
  const std::size_t m = model.logical_count();
  const std::size_t d = poly.dimension();

  auto alloc_of = [&](const std::vector<double>& x) {
    CapacityAllocation a;
    a.values.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
    for (double& v : a.values) v = std::max(0.0, v);
    return a;
  };
  SolveTrace trace;
  auto evaluate = [&](const std::vector<double>& x, std::span<const double> warm) {
    const auto sol = phi(model, alloc_of(x), opts.inner, warm);
    if (!sol.converged) trace.inner_converged = false;
    return PhiEval{sol.phi, sol.y, sol.converged};
  };

  std::vector<double> x(d, 0.0);
  PhiEval current = evaluate(x, {});
  trace.status = SolveStatus::max_iters;

  for (int k = 0; k < opts.max_iters; ++k) {
    trace.iterations = k + 1;
    const auto alloc = alloc_of(x);
    std::vector<double> g(d, 0.0);
    const auto gc = supergradient_C(model, alloc, current.y, opts);
    std::copy(gc.begin(), gc.end(), g.begin());

    const auto vertex = lp_solve(g, poly);
    std::vector<double> dir(d);
    double gap = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dir[i] = vertex.x[i] - x[i];
      gap += g[i] * dir[i];
    }
    trace.gap = std::max(0.0, gap);
    if (trace.gap <= opts.gap_tol * (1.0 + std::abs(current.phi))) {
      trace.status = SolveStatus::converged;
      trace.steps.push_back({current.phi, trace.gap, 0.0});
      break;
    }

    auto point = [&](double gamma) {
      std::vector<double> out(d);
      for (std::size_t i = 0; i < d; ++i) {
        out[i] = gamma == 1.0 ? vertex.x[i] : x[i] + gamma * dir[i];
      }
      return out;
    };

    double gamma = 0.0;
    PhiEval next = current;
    if (opts.line_search) {
      // Golden-section maximization on [0, 1], keeping the best point seen
      // (including the far end) so the ascent is monotone.
      auto consider = [&](double t, const PhiEval& e) {
        if (e.phi > next.phi) {
          next = e;
          gamma = t;
        }
      };
      const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
      int evals = 0;
      auto f = [&](double t) {
        ++evals;
        auto e = evaluate(point(t), current.y);
        consider(t, e);
        return e.phi;
      };
      f(1.0);
      double a = 0.0, b = 1.0;
      double c = b - ratio * (b - a), e = a + ratio * (b - a);
      double fc = f(c), fe = f(e);
      while (evals < opts.line_search_evals && b - a > opts.line_search_tol) {
        if (fc >= fe) {
          b = e;
          e = c;
          fe = fc;
          c = b - ratio * (b - a);
          fc = f(c);
        } else {
          a = c;
          c = e;
          fc = fe;
          e = a + ratio * (b - a);
          fe = f(e);
        }
      }
    } else {
      gamma = 2.0 / (k + 2.0);
      next = evaluate(point(gamma), current.y);
    }

    trace.steps.push_back({current.phi, trace.gap, gamma});
    if (gamma == 0.0) {
      trace.status = SolveStatus::stalled;
      break;
    }
    x = point(gamma);
    current = std::move(next);
  }

  trace.C = alloc_of(x);
  trace.phi = current.phi;
  trace.y = current.y;
  trace.aux = std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(m), x.end());
  return trace;
}

}  // namespace detail

/// Maximizes phi(C) subject to S^T C <= C_phys, C >= 0 by Frank-Wolfe from
/// the origin. Iterates are convex combinations of LP vertices, so every one
/// is feasible.
inline SolveTrace maximize_phi(const NetworkModel& model, const OuterOptions& opts = {}) {
  return detail::frank_wolfe(model, capacity_polytope(model), opts);
}

struct ReconfigProblem {
  /// Logical entities and flows over N potential physical entities, each
  /// of capacity 1.
  NetworkModel model;
  /// Number of potentials that may be switched on; floored for rounding.
  double budget = 1.0;
};

struct ReconfigResult {
  CapacityAllocation C;
  /// Selected potentials, exactly 0 or 1.
  std::vector<double> C_phys;
  /// Joint relaxation over (C, C_phys) before rounding.
  SolveTrace relaxed;
  std::vector<double> relaxed_C_phys;
  /// maximize_phi restricted to the selected potentials.
  SolveTrace rounded;
  double phi_before_rounding = 0.0;
  double phi_after_rounding = 0.0;
};

/// Joint polytope over x = (C, C_phys):
///   S^T C - C_phys <= 0,  C_phys <= 1,  sum C_phys <= budget,  x >= 0.
inline Polytope reconfig_polytope(const NetworkModel& model, double budget) {
  const std::size_t m = model.logical_count();
  const std::size_t n = model.physical_count();
  const auto& s = model.incidence();
  Dense<double> a(2 * n + 1, m + n, 0.0);
  std::vector<double> b(2 * n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < m; ++i) a(k, i) = s(i, k);
    a(k, m + k) = -1.0;
    a(n + k, m + k) = 1.0;
    b[n + k] = 1.0;
    a(2 * n, m + k) = 1.0;
  }
  b[2 * n] = budget;
  return Polytope(std::move(a), std::move(b));
}

inline ReconfigResult solve_reconfig(const ReconfigProblem& problem,
                                     const OuterOptions& opts = {}) {
  const auto& model = problem.model;
  const std::size_t n = model.physical_count();
  for (const auto& p : model.physicals()) {
    if (p.capacity != 1.0) {
      throw ValidationError("solve_reconfig: potential physical '" + p.id +
                            "' must have unit capacity");
    }
  }
  if (!(std::isfinite(problem.budget) && problem.budget > 0.0 &&
        problem.budget <= static_cast<double>(n))) {
    throw ValidationError("solve_reconfig: budget must satisfy 0 < budget <= " +
                          std::to_string(n));
  }

  ReconfigResult result;
  result.relaxed = detail::frank_wolfe(model, reconfig_polytope(model, problem.budget), opts);
  result.relaxed_C_phys = result.relaxed.aux;
  result.phi_before_rounding = result.relaxed.phi;

  // Keep the floor(budget) potentials carrying the most logical capacity;
  // stable sort breaks ties by lowest index.
  const auto load = physical_load(model, result.relaxed.C.values);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return load[a] > load[b]; });
  const auto keep = static_cast<std::size_t>(std::floor(problem.budget));
  result.C_phys.assign(n, 0.0);
  for (std::size_t i = 0; i < keep; ++i) result.C_phys[order[i]] = 1.0;

  result.rounded = maximize_phi(model.with_physical_capacities(result.C_phys), opts);
  result.C = result.rounded.C;
  result.phi_after_rounding = result.rounded.phi;
  return result;
}

}  // namespace sliceforge
