#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sliceforge/error.hpp"
#include "sliceforge/matrix.hpp"

namespace sliceforge {

/// {x : A x <= b, x >= 0} with b >= 0, so the origin is always a vertex.
/// Construction rejects polytopes with a variable that no row bounds
/// (no positive coefficient in any row).
class Polytope {
 public:
  Polytope(Dense<double> a_ub, std::vector<double> b_ub)
      : a_(std::move(a_ub)), b_(std::move(b_ub)) {
    if (a_.rows() != b_.size()) {
      throw DimensionError("Polytope: A has " + std::to_string(a_.rows()) +
                           " rows but b has " + std::to_string(b_.size()));
    }
    for (double v : b_) {
      if (!(std::isfinite(v) && v >= 0.0)) {
        throw DomainError("Polytope: right-hand side must be finite and >= 0");
      }
    }
    for (std::size_t j = 0; j < a_.cols(); ++j) {
      bool bounded = false;
      for (std::size_t i = 0; i < a_.rows() && !bounded; ++i) {
        bounded = a_(i, j) > 0.0;
      }
      if (!bounded) {
        throw DomainError("Polytope: variable " + std::to_string(j) +
                          " has no positive coefficient in any row");
      }
    }
  }

  std::size_t dimension() const { return a_.cols(); }
  std::size_t rows() const { return a_.rows(); }
  const Dense<double>& a() const { return a_; }
  const std::vector<double>& b() const { return b_; }

  bool contains(std::span<const double> x, double tol) const {
    if (x.size() != dimension()) return false;
    for (double v : x) {
      if (v < -tol) return false;
    }
    for (std::size_t i = 0; i < rows(); ++i) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < dimension(); ++j) lhs += a_(i, j) * x[j];
      if (lhs > b_[i] + tol) return false;
    }
    return true;
  }

  /// Constraints (rows, then nonnegativity) that hold with equality.
  std::size_t tight_count(std::span<const double> x, double tol) const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows(); ++i) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < dimension(); ++j) lhs += a_(i, j) * x[j];
      if (std::abs(lhs - b_[i]) <= tol) ++count;
    }
    for (double v : x) {
      if (std::abs(v) <= tol) ++count;
    }
    return count;
  }

 private:
  Dense<double> a_;
  std::vector<double> b_;
};

struct LpResult {
  std::vector<double> x;
  double value = 0.0;
  int pivots = 0;
};

/// Maximizes objective . x over the polytope with a dense tableau simplex.
///
/// Bland's rule picks both the entering column (lowest index with positive
/// reduced cost) and the leaving row (lowest basic index among minimum
/// ratios), so the method cannot cycle. The result is a basic feasible
/// solution, i.e. a vertex.
inline LpResult lp_solve(std::span<const double> objective, const Polytope& poly) {
  const std::size_t d = poly.dimension();
  const std::size_t rows = poly.rows();
  if (objective.size() != d) {
    throw DimensionError("lp_solve: objective has " +
                         std::to_string(objective.size()) + " entries, polytope has " +
                         std::to_string(d) + " variables");
  }
  const std::size_t cols = d + rows;  // structural + slack; rhs kept apart

  double scale = 0.0;
  for (double c : objective) scale = std::max(scale, std::abs(c));
  const double cost_eps = 1e-12 * (1.0 + scale);
  constexpr double kPivotEps = 1e-12;

  Dense<double> tab(rows, cols, 0.0);
  std::vector<double> rhs = poly.b();
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) tab(i, j) = poly.a()(i, j);
    tab(i, d + i) = 1.0;
    basis[i] = d + i;
  }
  // Reduced costs c_j - c_B B^-1 a_j; the slack basis makes them start as c.
  std::vector<double> reduced(cols, 0.0);
  std::copy(objective.begin(), objective.end(), reduced.begin());

  LpResult result;
  const int max_pivots = 50 * static_cast<int>(cols + rows) + 1000;
  for (;;) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j < cols; ++j) {
      if (reduced[j] > cost_eps) {
        enter = j;
        break;
      }
    }
    if (enter == cols) break;

    std::size_t leave = rows;
    double best_ratio = INFINITY;
    for (std::size_t i = 0; i < rows; ++i) {
      const double a = tab(i, enter);
      if (a <= kPivotEps) continue;
      const double ratio = rhs[i] / a;
      if (leave == rows) {
        leave = i;
        best_ratio = ratio;
        continue;
      }
      const double slack = 1e-15 * (1.0 + best_ratio);
      if (ratio < best_ratio - slack ||
          (ratio <= best_ratio + slack && basis[i] < basis[leave])) {
        best_ratio = std::min(best_ratio, ratio);
        leave = i;
      }
    }
    if (leave == rows) throw SolverError("lp_solve: unbounded direction");
    const double pivot = tab(leave, enter);
    if (std::abs(pivot) < kPivotEps) throw SolverError("lp_solve: singular pivot");

    for (std::size_t j = 0; j < cols; ++j) tab(leave, j) /= pivot;
    rhs[leave] /= pivot;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == leave) continue;
      const double factor = tab(i, enter);
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) tab(i, j) -= factor * tab(leave, j);
      rhs[i] -= factor * rhs[leave];
      if (rhs[i] < 0.0 && rhs[i] > -1e-12) rhs[i] = 0.0;
    }
    const double factor = reduced[enter];
    for (std::size_t j = 0; j < cols; ++j) reduced[j] -= factor * tab(leave, j);
    basis[leave] = enter;

    if (++result.pivots > max_pivots) {
      throw SolverError("lp_solve: pivot limit exceeded");
    }
  }

  result.x.assign(d, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (basis[i] < d) result.x[basis[i]] = std::max(0.0, rhs[i]);
  }
  result.value = 0.0;
  for (std::size_t j = 0; j < d; ++j) result.value += objective[j] * result.x[j];
  return result;
}

}  // namespace sliceforge
