#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sliceforge/error.hpp"
#include "sliceforge/loss.hpp"
#include "sliceforge/model.hpp"
#include "sliceforge/quadrature.hpp"

namespace sliceforge {

struct FixedPointOptions {
  double tol = 1e-9;
  int max_iters = 10000;
  /// Weight of the new iterate in rho <- (1 - a) rho + a G(rho).
  double damping = 0.5;
};

/// Reduced offered loads and what follows from them.
struct LoadState {
  std::vector<double> rho;
  std::vector<double> blocking;
  std::vector<double> carried_per_flow;
  bool converged = false;
  int iterations = 0;
  /// max_i |rho_i - G_i(rho)| / (1 + rho_i) at the returned point.
  double residual = 0.0;
  /// Entities whose passing probability underflowed below 1e-300; their
  /// load is pinned to the no-blocking value.
  std::vector<std::size_t> fully_blocked;
};

/// Smallest passing probability treated as nonzero.
inline constexpr double kFullyBlocked = 1e-300;

namespace detail {

inline void require_alloc(const NetworkModel& model,
                          const CapacityAllocation& alloc) {
  if (alloc.size() != model.logical_count()) {
    throw DimensionError("allocation has " + std::to_string(alloc.size()) +
                         " entries, model has " +
                         std::to_string(model.logical_count()) +
                         " logical entities");
  }
  for (double c : alloc.values) {
    if (!(std::isfinite(c) && c >= 0.0)) {
      throw DomainError("allocation entries must be finite and >= 0");
    }
  }
}

/// Offered load on each entity if nothing were lost: sum_r A_ir nu_r.
inline std::vector<double> unblocked_load(const NetworkModel& model) {
  std::vector<double> load(model.logical_count(), 0.0);
  for (std::size_t i = 0; i < model.logical_count(); ++i) {
    for (std::size_t r = 0; r < model.flow_count(); ++r) {
      load[i] += model.demand(i, r) * model.flows()[r].offered;
    }
  }
  return load;
}

/// nu_r * prod_j passing_j^{A_jr}, optionally leaving out one factor of
/// passing_skip.
inline double thinned_flow(const NetworkModel& model, std::size_t r,
                           const std::vector<double>& passing,
                           std::size_t skip = static_cast<std::size_t>(-1)) {
  double value = model.flows()[r].offered;
  for (std::size_t j = 0; j < model.logical_count(); ++j) {
    int power = model.demand(j, r);
    if (j == skip) --power;
    if (power > 0) value *= std::pow(passing[j], power);
  }
  return value;
}

}  // namespace detail

/// Solves rho_i = (1 - F_i)^-1 sum_r A_ir nu_r prod_j (1 - F_j)^A_jr by
/// damped synchronous substitution from the no-blocking load.
///
/// The (1 - F_i)^-1 factor is cancelled against one power of (1 - F_i) in
/// each product, so the update never divides. Returns converged == false
/// rather than throwing when max_iters is exhausted.
inline LoadState solve_fixed_point(const NetworkModel& model,
                                   const CapacityAllocation& alloc,
                                   const FixedPointOptions& opts = {}) {
  detail::require_alloc(model, alloc);
  const std::size_t m = model.logical_count();
  const std::size_t flows = model.flow_count();
  const auto start = detail::unblocked_load(model);

  LoadState state;
  state.rho = start;
  std::vector<double> passing(m), next(m);
  std::vector<char> blocked(m, 0);

  for (int it = 1; it <= std::max(1, opts.max_iters); ++it) {
    state.iterations = it;
    for (std::size_t i = 0; i < m; ++i) {
      passing[i] = evaluate_loss(model.loss_of(i), state.rho[i], alloc[i]).passing;
      blocked[i] = passing[i] < kFullyBlocked;
      if (blocked[i]) passing[i] = 0.0;
    }
    double residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (blocked[i]) {
        next[i] = start[i];
        continue;
      }
      double g = 0.0;
      for (std::size_t r = 0; r < flows; ++r) {
        const int a = model.demand(i, r);
        if (a > 0) g += a * detail::thinned_flow(model, r, passing, i);
      }
      next[i] = g;
      residual = std::max(residual, std::abs(state.rho[i] - g) / (1.0 + state.rho[i]));
    }
    state.residual = residual;
    if (residual <= opts.tol) {
      state.converged = true;
      for (std::size_t i = 0; i < m; ++i) {
        if (blocked[i]) state.rho[i] = start[i];
      }
      break;
    }
    for (std::size_t i = 0; i < m; ++i) {
      state.rho[i] = blocked[i] ? start[i]
                                : (1.0 - opts.damping) * state.rho[i] +
                                      opts.damping * next[i];
    }
  }

  state.blocking.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto v = evaluate_loss(model.loss_of(i), state.rho[i], alloc[i]);
    state.blocking[i] = v.blocking;
    passing[i] = v.passing;
    if (v.passing < kFullyBlocked) {
      passing[i] = 0.0;
      state.fully_blocked.push_back(i);
    }
  }
  state.carried_per_flow.resize(flows);
  for (std::size_t r = 0; r < flows; ++r) {
    state.carried_per_flow[r] = detail::thinned_flow(model, r, passing);
  }
  return state;
}

/// Total carried load T = sum_r nu_r prod_j (1 - B_j)^A_jr.
inline double carried_total(const NetworkModel& model, const LoadState& state) {
  (void)model;
  double total = 0.0;
  for (double c : state.carried_per_flow) total += c;
  return total;
}

struct Diagnostics {
  /// Total carried load.
  double T = 0.0;
  /// Carried load weighted by route length L_r = sum_j A_jr.
  double Tw = 0.0;
  /// Modified objective T + eps.
  double Q = 0.0;
  /// Longest route length.
  double L = 0.0;
  /// Utilization correction sum_j Ũ(B_j, C_j).
  double eps = 0.0;
  /// Blocked load sum_i rho_i B_i, an upper bound for eps.
  double eps_bound = 0.0;
  double B_max = 0.0;
  std::vector<double> utilization_measures;
};

/// Ũ(B, cap) read off a loss value; zero-capacity entities contribute
/// nothing even when fully blocked.
inline double entity_utilization_measure(const LossSpec& spec, double rho,
                                         double cap,
                                         const QuadratureOptions& quad = {}) {
  const double y = log_loss(spec, rho, cap);
  if (std::isinf(y)) {
    if (cap == 0.0) return 0.0;
    throw DomainError("utilization_measure: entity is fully blocked");
  }
  return utilization_integral(spec, y, cap, quad);
}

inline Diagnostics diagnostics(const NetworkModel& model,
                               const CapacityAllocation& alloc,
                               const LoadState& state,
                               const QuadratureOptions& quad = {}) {
  detail::require_alloc(model, alloc);
  Diagnostics d;
  d.T = carried_total(model, state);
  for (std::size_t r = 0; r < model.flow_count(); ++r) {
    const double len = model.route_length(r);
    d.Tw += state.carried_per_flow[r] * len;
    d.L = std::max(d.L, len);
  }
  d.utilization_measures.resize(model.logical_count());
  for (std::size_t j = 0; j < model.logical_count(); ++j) {
    d.utilization_measures[j] =
        entity_utilization_measure(model.loss_of(j), state.rho[j], alloc[j], quad);
    d.eps += d.utilization_measures[j];
    d.eps_bound += state.rho[j] * state.blocking[j];
    d.B_max = std::max(d.B_max, state.blocking[j]);
  }
  d.Q = d.T + d.eps;
  return d;
}

}  // namespace sliceforge
