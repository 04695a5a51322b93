#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "sliceforge/error.hpp"

namespace sliceforge {

struct QuadratureOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  int max_depth = 40;
};

namespace detail {

template <typename F>
double simpson_step(F& f, double a, double fa, double m, double fm, double b,
                    double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Stop at the tolerance, at rounding level, or once the interval can no
  // longer be split.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                       (std::abs(left) + std::abs(right));
  if (depth <= 0 || std::abs(delta) <= std::max(15.0 * tol, noise) ||
      lm <= a || rm >= b) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with Richardson correction.
///
/// The error budget is max(abs_tol, rel_tol * |coarse estimate|), split in
/// half at every bisection. The coarse estimate uses five points so that an
/// integrand vanishing at the three Simpson nodes is not mistaken for zero.
template <typename F>
double adaptive_simpson(F&& f, double a, double b,
                        const QuadratureOptions& opts = {}) {
  if (!(std::isfinite(a) && std::isfinite(b))) {
    throw DomainError("adaptive_simpson: non-finite interval");
  }
  if (a == b) return 0.0;
  if (b < a) return -adaptive_simpson(f, b, a, opts);

  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double coarse = left + right;
  const double tol = std::max(opts.abs_tol, opts.rel_tol * std::abs(coarse));

  return detail::simpson_step(f, a, fa, lm, flm, m, fm, left, 0.5 * tol,
                              opts.max_depth - 1) +
         detail::simpson_step(f, m, fm, rm, frm, b, fb, right, 0.5 * tol,
                              opts.max_depth - 1);
}

}  // namespace sliceforge
