#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sliceforge/error.hpp"
#include "sliceforge/fixed_point.hpp"
#include "sliceforge/loss.hpp"
#include "sliceforge/model.hpp"
#include "sliceforge/quadrature.hpp"

namespace sliceforge {

struct InnerOptions {
  /// Exit when the projected-gradient norm is <= tol * (1 + |G|).
  double tol = 1e-8;
  int max_iters = 5000;
  /// Box guard on every coordinate of y.
  double y_max = 50.0;
  /// Accuracy of the final objective value.
  QuadratureOptions quad{};
};

struct InnerSolution {
  std::vector<double> y;
  double phi = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// rho(y*_j): offered load at which entity j loses 1 - e^{-y*_j}.
  std::vector<double> offered;
};

/// Upper end of the box for y_j: y_max, tightened so that rho(y) stays
/// well inside the inversion bracket at this capacity.
inline double inner_upper_bound(const LossSpec& spec, double cap, double y_max) {
  const double limit = 0.25 * kInversionBracketCap * std::max(1.0, cap);
  return std::min(y_max, log_loss(spec, limit, cap));
}

namespace detail {

inline void require_y(const NetworkModel& model, std::span<const double> y) {
  if (y.size() != model.logical_count()) {
    throw DimensionError("y has " + std::to_string(y.size()) +
                         " entries, model has " +
                         std::to_string(model.logical_count()) +
                         " logical entities");
  }
  for (double v : y) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      throw DomainError("y entries must be finite and >= 0");
    }
  }
}

/// nu_r exp(-sum_j y_j A_jr) for every flow.
inline std::vector<double> flow_survival(const NetworkModel& model,
                                         std::span<const double> y) {
  std::vector<double> out(model.flow_count());
  for (std::size_t r = 0; r < model.flow_count(); ++r) {
    double exponent = 0.0;
    for (std::size_t j = 0; j < model.logical_count(); ++j) {
      exponent += y[j] * model.demand(j, r);
    }
    out[r] = model.flows()[r].offered * std::exp(-exponent);
  }
  return out;
}

inline double sum_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace detail

/// G(y) = sum_r nu_r e^{-sum_j y_j A_jr} + sum_j int_0^{y_j} U(z, C_j) dz.
inline double inner_objective(const NetworkModel& model,
                              const CapacityAllocation& alloc,
                              std::span<const double> y,
                              const QuadratureOptions& quad = {}) {
  detail::require_alloc(model, alloc);
  detail::require_y(model, y);
  double value = detail::sum_of(detail::flow_survival(model, y));
  for (std::size_t j = 0; j < model.logical_count(); ++j) {
    value += utilization_integral(model.loss_of(j), y[j], alloc[j], quad);
  }
  return value;
}

/// dG/dy_j = -sum_r A_jr nu_r e^{-sum_k y_k A_kr} + U(y_j, C_j).
inline std::vector<double> inner_gradient(const NetworkModel& model,
                                          const CapacityAllocation& alloc,
                                          std::span<const double> y) {
  detail::require_alloc(model, alloc);
  detail::require_y(model, y);
  const auto survival = detail::flow_survival(model, y);
  std::vector<double> grad(model.logical_count());
  for (std::size_t j = 0; j < model.logical_count(); ++j) {
    double g = utilization(model.loss_of(j), y[j], alloc[j]);
    for (std::size_t r = 0; r < model.flow_count(); ++r) {
      g -= model.demand(j, r) * survival[r];
    }
    grad[j] = g;
  }
  return grad;
}

namespace detail {

// A point y together with rho(y_j) and the gradient there.
struct InnerPoint {
  std::vector<double> y;
  std::vector<double> rho;
  std::vector<double> survival;
  std::vector<double> grad;
};

class InnerProblem {
 public:
  InnerProblem(const NetworkModel& model, const CapacityAllocation& alloc,
               const InnerOptions& opts)
      : model_(model), alloc_(alloc), opts_(opts) {
    const std::size_t m = model.logical_count();
    upper_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      upper_[j] = inner_upper_bound(model.loss_of(j), alloc[j], opts.y_max);
    }
  }

  const std::vector<double>& upper() const { return upper_; }

  InnerPoint at(std::vector<double> y) const {
    InnerPoint p;
    p.y = std::move(y);
    const std::size_t m = model_.logical_count();
    p.rho.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      p.rho[j] = offered_for_log_loss(model_.loss_of(j), p.y[j], alloc_[j]);
    }
    p.survival = flow_survival(model_, p.y);
    p.grad.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      double g = p.rho[j] * std::exp(-p.y[j]);
      for (std::size_t r = 0; r < model_.flow_count(); ++r) {
        g -= model_.demand(j, r) * p.survival[r];
      }
      p.grad[j] = g;
    }
    return p;
  }

  double value(const InnerPoint& p) const {
    double value = sum_of(p.survival);
    for (std::size_t j = 0; j < model_.logical_count(); ++j) {
      const auto& spec = model_.loss_of(j);
      value += utilization_between(spec, alloc_[j], 0.0,
                                   offered_for_log_loss(spec, 0.0, alloc_[j]),
                                   p.y[j], p.rho[j], opts_.quad);
    }
    return value;
  }

  double projected_norm(const InnerPoint& p) const {
    double sq = 0.0;
    for (std::size_t j = 0; j < p.y.size(); ++j) {
      double g = p.grad[j];
      if (p.y[j] <= 0.0 && g > 0.0) g = 0.0;
      if (p.y[j] >= upper_[j] && g < 0.0) g = 0.0;
      sq += g * g;
    }
    return std::sqrt(sq);
  }

 private:
  const NetworkModel& model_;
  const CapacityAllocation& alloc_;
  const InnerOptions& opts_;
  std::vector<double> upper_;
};

// Exact minimization of G along coordinate j with the others fixed.
//
// dG/dy_j = U(y_j) - sum_r A_jr E_r e^{-A_jr y_j}, with E_r the flow terms
// that do not involve j. Writing e^{-y_j} = 1 - F(rho) turns the stationarity
// condition into h(rho) = rho (1-F) - sum_r A_jr E_r (1-F)^A_jr = 0, where h
// is nondecreasing. Solving in rho resolves regions where U rises steeply
// in y (Erlang-B at large capacity), which defeat step-based descent.
inline double minimize_coordinate(const NetworkModel& model,
                                  const CapacityAllocation& alloc,
                                  std::span<const double> y, std::size_t j,
                                  double upper, double rho_hint) {
  const LossSpec& spec = model.loss_of(j);
  const LossFamily& family = spec.family();
  const double cap = alloc[j];

  std::vector<std::pair<int, double>> terms;
  for (std::size_t r = 0; r < model.flow_count(); ++r) {
    const int a = model.demand(j, r);
    if (a == 0) continue;
    double exponent = 0.0;
    for (std::size_t k = 0; k < model.logical_count(); ++k) {
      if (k != j) exponent += y[k] * model.demand(k, r);
    }
    terms.emplace_back(a, model.flows()[r].offered * std::exp(-exponent));
  }
  if (terms.empty()) return 0.0;

  auto h = [&](double rho) {
    const double pass = family.evaluate(rho, cap).passing;
    double demand = 0.0;
    for (const auto& [a, e] : terms) demand += a * e * std::pow(pass, a);
    return rho * pass - demand;
  };
  auto level = [&](double rho) {
    return detail::log_loss_of(family.evaluate(rho, cap));
  };

  const double limit = 0.25 * kInversionBracketCap * std::max(1.0, cap);
  double lo = 0.0;
  double hi = rho_hint > 0.0 && std::isfinite(rho_hint) ? rho_hint
                                                         : std::max(1.0, cap);
  if (h(hi) <= 0.0) {
    do {
      if (level(hi) >= upper) return upper;
      lo = hi;
      hi *= 2.0;
      if (hi > limit) return upper;
    } while (h(hi) <= 0.0);
  } else {
    while (hi > 1e-300) {
      const double next = 0.5 * hi;
      if (h(next) <= 0.0) {
        lo = next;
        break;
      }
      hi = next;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::min(upper, level(0.5 * (lo + hi)));
}

}  // namespace detail

/// phi(C) = min_{y >= 0} G(y).
///
/// G is convex in y; it is minimized by cyclic exact coordinate
/// minimization over the box [0, upper_j], where upper_j is opts.y_max
/// tightened so that rho(y) stays inside the inversion bracket. Exits when
/// the projected-gradient norm is <= tol * (1 + |G|). `warm_y`, when
/// non-empty, is the starting point (clamped to the box).
inline InnerSolution phi(const NetworkModel& model,
                         const CapacityAllocation& alloc,
                         const InnerOptions& opts = {},
                         std::span<const double> warm_y = {}) {
  detail::require_alloc(model, alloc);
  const std::size_t m = model.logical_count();
  detail::InnerProblem problem(model, alloc, opts);
  const auto& upper = problem.upper();

  std::vector<double> y(m, 0.0);
  if (!warm_y.empty()) {
    if (warm_y.size() != m) throw DimensionError("phi: warm start has wrong size");
    for (std::size_t j = 0; j < m; ++j) {
      y[j] = std::clamp(std::isfinite(warm_y[j]) ? warm_y[j] : 0.0, 0.0, upper[j]);
    }
  }

  InnerSolution sol;
  auto point = problem.at(y);
  double value = problem.value(point);
  sol.grad_norm = problem.projected_norm(point);
  for (int sweep = 0; sweep < opts.max_iters; ++sweep) {
    if (sol.grad_norm <= opts.tol * (1.0 + std::abs(value))) {
      sol.converged = true;
      break;
    }
    sol.iterations = sweep + 1;
    for (std::size_t j = 0; j < m; ++j) {
      y[j] = detail::minimize_coordinate(model, alloc, y, j, upper[j], point.rho[j]);
    }
    if (y == point.y) break;  // no representable progress
    point = problem.at(y);
    value = problem.value(point);
    sol.grad_norm = problem.projected_norm(point);
  }
  if (!sol.converged && sol.grad_norm <= opts.tol * (1.0 + std::abs(value))) {
    sol.converged = true;
  }

  sol.phi = value;
  sol.y = std::move(point.y);
  sol.offered = std::move(point.rho);
  return sol;
}

}  // namespace sliceforge
