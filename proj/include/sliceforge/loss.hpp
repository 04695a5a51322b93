#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <string_view>

#include <boost/math/special_functions/gamma.hpp>

#include "sliceforge/error.hpp"
#include "sliceforge/quadrature.hpp"

namespace sliceforge {

/// Loss probability together with its complement. Families compute both
/// directly so that neither suffers cancellation when the other is tiny.
struct LossValue {
  double blocking = 0.0;
  double passing = 1.0;
};

/// Extension point for loss-function families.
///
/// An implementation must satisfy, for rho, cap >= 0:
///   - 0 <= blocking <= 1 and blocking + passing == 1 (up to rounding),
///   - continuity, blocking nondecreasing in rho and nonincreasing in cap,
///   - blocking(0, cap) == 0,
///   - saturation: blocking -> 1 as rho -> infinity for every cap.
/// Saturation is what makes the utilization function well defined.
class LossFamily {
 public:
  virtual ~LossFamily() = default;
  virtual std::string_view name() const = 0;
  virtual LossValue evaluate(double rho, double cap) const = 0;
};

namespace detail {

// Continuous Erlang-B:  1/B(rho, C) = rho * int_0^inf e^{-rho t} (1+t)^C dt.
// Integration by parts gives 1/B(x) = 1 + (x/rho) / B(x-1), so only the
// fractional base C - floor(C) needs the integral, which is the upper
// incomplete gamma function:  int_0^inf e^{-u} (1+u/rho)^f du
//                           = e^rho rho^-f Gamma(f+1, rho).
// Returns the integral minus one, which is what the passing probability
// needs without cancellation.
inline double erlang_base_excess(double rho, double f) {
  if (f == 0.0) return 0.0;
  if (rho >= 40.0) {
    // Asymptotic series sum_k f(f-1)...(f-k+1) / rho^k. It diverges, so
    // summation stops at the smallest term (near k = rho), which is of
    // order e^-rho relative to the sum.
    double term = 1.0;
    double sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      const double next = term * (f - (k - 1)) / rho;
      if (k > 1 && std::abs(next) >= std::abs(term)) break;
      term = next;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  const double integral =
      std::exp(rho) * std::pow(rho, -f) * boost::math::tgamma(f + 1.0, rho);
  return integral - 1.0;
}

class ErlangB final : public LossFamily {
 public:
  std::string_view name() const override { return "erlang_b"; }

  LossValue evaluate(double rho, double cap) const override {
    if (rho == 0.0) return {0.0, 1.0};
    if (cap == 0.0) return {1.0, 0.0};
    const double whole = std::floor(cap);
    const double frac = cap - whole;

    double blocking = 1.0;
    double passing = 0.0;
    if (frac > 0.0) {
      const double excess = erlang_base_excess(rho, frac);
      if (!std::isfinite(excess)) {
        blocking = 0.0;
        passing = 1.0;
      } else {
        blocking = 1.0 / (1.0 + excess);
        passing = excess / (1.0 + excess);
      }
    }
    const auto steps = static_cast<long long>(whole);
    for (long long k = 1; k <= steps && blocking > 0.0; ++k) {
      const double x = frac + static_cast<double>(k);
      const double t = rho * blocking;
      blocking = t / (x + t);
      passing = x / (x + t);
    }
    if (blocking == 0.0) passing = 1.0;
    return {blocking, passing};
  }
};

class LinearClip final : public LossFamily {
 public:
  std::string_view name() const override { return "linear_clip"; }

  LossValue evaluate(double rho, double cap) const override {
    if (rho == 0.0) return {0.0, 1.0};
    if (rho <= cap) return {0.0, 1.0};
    return {(rho - cap) / rho, cap / rho};
  }
};

class ExpOverflow final : public LossFamily {
 public:
  std::string_view name() const override { return "exp_overflow"; }

  LossValue evaluate(double rho, double cap) const override {
    if (rho == 0.0) return {0.0, 1.0};
    const double r = cap / rho;
    return {std::exp(-r), -std::expm1(-r)};
  }
};

}  // namespace detail

/// Value handle naming the loss function of a logical entity. Built-in
/// families are shared singletons; custom families can be wrapped directly.
class LossSpec {
 public:
  LossSpec() : LossSpec(erlang_b()) {}
  explicit LossSpec(std::shared_ptr<const LossFamily> family)
      : family_(std::move(family)) {
    if (!family_) throw DomainError("LossSpec: null loss family");
  }

  static LossSpec erlang_b() {
    static const auto family = std::make_shared<const detail::ErlangB>();
    return LossSpec(family);
  }
  static LossSpec linear_clip() {
    static const auto family = std::make_shared<const detail::LinearClip>();
    return LossSpec(family);
  }
  static LossSpec exp_overflow() {
    static const auto family = std::make_shared<const detail::ExpOverflow>();
    return LossSpec(family);
  }

  /// Throws DomainError for names other than the built-in families.
  static LossSpec from_name(std::string_view kind) {
    if (kind == "erlang_b") return erlang_b();
    if (kind == "linear_clip") return linear_clip();
    if (kind == "exp_overflow") return exp_overflow();
    throw DomainError("unknown loss kind '" + std::string(kind) + "'");
  }

  std::string_view name() const { return family_->name(); }
  const LossFamily& family() const { return *family_; }

  friend bool operator==(const LossSpec& a, const LossSpec& b) {
    return a.name() == b.name();
  }

 private:
  std::shared_ptr<const LossFamily> family_;
};

/// Largest offered load the generalized inverse will search, relative to
/// max(1, cap).
inline constexpr double kInversionBracketCap = 1e12;

namespace detail {

inline void require_load_domain(double rho, double cap) {
  if (!(std::isfinite(rho) && rho >= 0.0)) {
    throw DomainError("loss: offered load must be finite and >= 0");
  }
  if (!(std::isfinite(cap) && cap >= 0.0)) {
    throw DomainError("loss: capacity must be finite and >= 0");
  }
}

// -log(1 - F), evaluated from whichever of F, 1-F is accurate.
inline double log_loss_of(const LossValue& v) {
  if (v.blocking < 0.5) return -std::log1p(-v.blocking);
  if (v.passing <= 0.0) return INFINITY;
  return -std::log(v.passing);
}

}  // namespace detail

/// Both F(rho, cap) and 1 - F(rho, cap).
inline LossValue evaluate_loss(const LossSpec& spec, double rho, double cap) {
  detail::require_load_domain(rho, cap);
  return spec.family().evaluate(rho, cap);
}

/// Fraction of offered load lost, F(rho, cap).
inline double loss(const LossSpec& spec, double rho, double cap) {
  return evaluate_loss(spec, rho, cap).blocking;
}

/// Logarithmic loss measure y = -log(1 - F(rho, cap)); +inf when fully
/// blocked.
inline double log_loss(const LossSpec& spec, double rho, double cap) {
  return detail::log_loss_of(evaluate_loss(spec, rho, cap));
}

/// Generalized (upper) inverse of rho -> -log(1 - F(rho, cap)):
/// sup{rho : -log(1 - F(rho, cap)) <= y}. Plateaus of F resolve to their
/// upper end.
///
/// Doubles the bracket from max(1, cap), then bisects to relative width
/// 1e-15 (at most 200 halvings). Throws InversionError when the bracket
/// passes kInversionBracketCap * max(1, cap).
inline double offered_for_log_loss(const LossSpec& spec, double y, double cap) {
  if (!(std::isfinite(y) && y >= 0.0)) {
    throw DomainError("utilization: log-loss level must be finite and >= 0");
  }
  if (!(std::isfinite(cap) && cap >= 0.0)) {
    throw DomainError("utilization: capacity must be finite and >= 0");
  }
  const LossFamily& family = spec.family();
  auto within = [&](double rho) {
    return detail::log_loss_of(family.evaluate(rho, cap)) <= y;
  };

  const double scale = std::max(1.0, cap);
  const double limit = kInversionBracketCap * scale;
  double lo = 0.0;
  double hi = scale;
  while (within(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > limit) {
      throw InversionError(
          "non-saturating loss function: '" + std::string(spec.name()) +
          "' does not reach log-loss " + std::to_string(y) +
          " below offered load " + std::to_string(limit));
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (within(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Mean amount of capacity in use when the loss probability is 1 - e^-y:
/// U(y, cap) = rho(y) e^-y with rho(y) the generalized inverse above.
inline double utilization(const LossSpec& spec, double y, double cap) {
  return offered_for_log_loss(spec, y, cap) * std::exp(-y);
}

/// int_{y_lo}^{y_hi} U(z, cap) dz for y_lo <= y_hi, given rho_lo = rho(y_lo)
/// and rho_hi = rho(y_hi) from offered_for_log_loss.
///
/// Substituting b = 1 - e^-z turns the integral into the area under the
/// generalized inverse of F, which equals
///   rho_lo (e^-y_lo - e^-y_hi) + int_{rho_lo}^{rho_hi} (1 - F(rho) - e^-y_hi) d rho.
/// Only the endpoint inversions are needed. Offered loads above max(1, cap)
/// are integrated in log(rho), where the integrand stays bounded by cap.
/// The tolerance is relative to the increment itself, so short intervals
/// are resolved as accurately as long ones.
inline double utilization_between(const LossSpec& spec, double cap, double y_lo,
                                  double rho_lo, double y_hi, double rho_hi,
                                  const QuadratureOptions& opts = {}) {
  if (y_hi <= y_lo) return 0.0;
  const LossFamily& family = spec.family();
  const double floor_pass = std::exp(-y_hi);
  const double head = rho_lo * std::exp(-y_lo) * -std::expm1(-(y_hi - y_lo));
  if (rho_hi <= rho_lo) return head;
  auto excess = [&](double rho) {
    return family.evaluate(rho, cap).passing - floor_pass;
  };

  // The integrand is a difference of passing probabilities, each carrying
  // rounding error of order eps * e^-y_lo; asking for more than that only
  // makes the quadrature chase noise.
  QuadratureOptions q = opts;
  q.abs_tol = std::max(opts.abs_tol, 16.0 * std::numeric_limits<double>::epsilon() *
                                         std::exp(-y_lo) * (rho_hi - rho_lo));

  double body = 0.0;
  const double split = std::clamp(std::max(1.0, cap), rho_lo, rho_hi);
  if (split > rho_lo) body += adaptive_simpson(excess, rho_lo, split, q);
  if (rho_hi > split) {
    auto in_log = [&](double s) {
      const double rho = std::exp(s);
      return excess(rho) * rho;
    };
    body += adaptive_simpson(in_log, std::log(split), std::log(rho_hi), q);
  }
  return head + std::max(0.0, body);
}

/// int_0^y U(z, cap) dz.
inline double utilization_integral(const LossSpec& spec, double y, double cap,
                                   const QuadratureOptions& opts = {}) {
  if (y == 0.0) {
    offered_for_log_loss(spec, y, cap);  // domain checks
    return 0.0;
  }
  return utilization_between(spec, cap, 0.0, offered_for_log_loss(spec, 0.0, cap),
                             y, offered_for_log_loss(spec, y, cap), opts);
}

/// Utilization measure Ũ(B, cap) = int_0^{-log(1-B)} U(z, cap) dz.
inline double utilization_measure(const LossSpec& spec, double blocking,
                                  double cap,
                                  const QuadratureOptions& opts = {}) {
  if (!(blocking >= 0.0 && blocking < 1.0)) {
    throw DomainError("utilization_measure: blocking must lie in [0, 1)");
  }
  return utilization_integral(spec, -std::log1p(-blocking), cap, opts);
}

}  // namespace sliceforge
