#pragma once

// Scalar distribution functions used by the copula simulator.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace maxboot {

inline double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double standard_normal_quantile(double u) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

/// Regularized lower incomplete gamma P(shape, x): CDF of gamma(shape, 1).
inline double gamma_cdf(double x, double shape) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, x);
}

namespace detail {

inline void check_shape(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw std::invalid_argument("gamma shape must be positive and finite, got " +
                                std::to_string(shape));
  }
}

// Incomplete gamma for integer shape k via the Poisson sum
// Q(k, x) = e^{-x} sum_{j<k} x^j / j!. The lower tail uses the complementary
// series e^{-x} sum_{j>=k} x^j / j! when x < k so small P keeps its digits.
struct IntegerGamma {
  int k;
  double log_norm;  // log (k-1)!

  explicit IntegerGamma(int k_) : k(k_), log_norm(std::lgamma(static_cast<double>(k_))) {}

  [[nodiscard]] double upper(double x) const {
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < k; ++j) {
      term *= x / j;
      sum += term;
    }
    return std::exp(-x) * sum;
  }
  [[nodiscard]] double lower(double x) const {
    if (x >= k) return 1.0 - upper(x);
    double term = std::exp(k * std::log(x) - x - log_norm) / k;  // x^k e^{-x} / k!
    double sum = 0.0;
    for (int j = k + 1; j < k + 400; ++j) {
      sum += term;
      if (term <= sum * 1e-17) break;
      term *= x / j;
    }
    return sum;
  }
  [[nodiscard]] double density(double x) const { return std::exp((k - 1) * std::log(x) - x - log_norm); }
};

// Solves P(shape, x) = target (upper == false) or Q(shape, x) = target
// (upper == true). Halley from a Wilson-Hilferty start, safeguarded by a
// bracket; any step that leaves the bracket becomes a bisection step.
template <class Lower, class Upper, class Density>
double solve_gamma_tail(double target, double shape, bool upper, Lower&& p_fn, Upper&& q_fn, Density&& density_fn) {
  const double lower_prob = upper ? 1.0 - target : target;
  double x;
  {
    const double z = upper ? -standard_normal_quantile(target) : standard_normal_quantile(target);
    const double c = 1.0 / (9.0 * shape);
    const double t = 1.0 - c + z * std::sqrt(c);
    x = shape * t * t * t;
    if (!(x > 0.0) || shape < 1.0) {
      // P(a, x) ~ x^a / Gamma(a + 1) near zero.
      const double small = std::exp((std::log(lower_prob) + std::lgamma(shape + 1.0)) / shape);
      if (!(x > 0.0) || (lower_prob < 0.5 && small < x)) x = small;
    }
  }
  // residual > 0 means x lies beyond the root.
  auto residual = [&](double v) { return upper ? target - q_fn(v) : p_fn(v) - target; };

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 200; ++iter) {
    const double r = residual(x);
    if (r == 0.0) return x;
    if (r > 0.0) hi = x; else lo = x;
    const double density = density_fn(x);
    // Fallback when Newton/Halley leaves the bracket: grow while unbounded,
    // geometric bisection on wide brackets, plain bisection otherwise.
    auto fallback = [&] {
      if (!std::isfinite(hi)) return 4.0 * x + 1.0;
      if (lo > 0.0 && hi > 4.0 * lo) return std::sqrt(lo * hi);
      return 0.5 * (lo + hi);
    };
    double next;
    if (density > 0.0 && std::isfinite(density)) {
      const double step = r / density;
      // f'/f = (a - 1)/x - 1 for the gamma density.
      const double curv = (shape - 1.0) / x - 1.0;
      const double denom = 1.0 - 0.5 * step * curv;
      next = x - (denom > 0.5 && denom < 2.0 ? step / denom : step);
    } else {
      next = fallback();
    }
    if (!(next > lo && next < hi) || (!std::isfinite(hi) && next > 4.0 * x + 1.0)) next = fallback();
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x) return next;
    x = next;
    if (!std::isfinite(x)) throw std::runtime_error("gamma_quantile: iteration diverged");
    if (std::isfinite(hi) && hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return x;
  }
  return x;
}

inline bool small_integer_shape(double shape) { return shape == std::floor(shape) && shape <= 64.0; }

inline double solve_gamma_tail(double target, double shape, bool upper) {
  if (small_integer_shape(shape)) {
    const IntegerGamma g(static_cast<int>(shape));
    return solve_gamma_tail(
        target, shape, upper, [&](double v) { return g.lower(v); }, [&](double v) { return g.upper(v); },
        [&](double v) { return g.density(v); });
  }
  return solve_gamma_tail(
      target, shape, upper, [&](double v) { return boost::math::gamma_p(shape, v); },
      [&](double v) { return boost::math::gamma_q(shape, v); },
      [&](double v) { return boost::math::gamma_p_derivative(shape, v); });
}

}  // namespace detail

/// Quantile of gamma(shape, 1): x with P(shape, x) = u.
inline double gamma_quantile(double u, double shape) {
  if (!(u > 0.0 && u < 1.0)) {
    throw std::invalid_argument("gamma_quantile: probability must lie strictly inside (0, 1), got " +
                                std::to_string(u));
  }
  detail::check_shape(shape);
  if (shape == 1.0) return -std::log1p(-u);
  if (u > 0.5) return detail::solve_gamma_tail(1.0 - u, shape, true);
  return detail::solve_gamma_tail(u, shape, false);
}

/// F^{-1}(Phi(y)) for F = gamma(shape, 1), solved on whichever tail keeps
/// the probability away from 1 so large |y| keeps full relative accuracy.
inline double gamma_quantile_of_normal(double y, double shape) {
  if (y <= 0.0) {
    const double u = standard_normal_cdf(y);
    if (u <= 0.0) return 0.0;
    if (shape == 1.0) return -std::log1p(-u);
    return detail::solve_gamma_tail(u, shape, false);
  }
  // Phi(-37) is still a normal double; beyond it the tail would underflow.
  const double q = standard_normal_cdf(-std::min(y, 37.0));
  if (shape == 1.0) return -std::log(q);
  return detail::solve_gamma_tail(q, shape, true);
}

}  // namespace maxboot
