#pragma once

// Scalar statistics: the max statistic, its smooth surrogate, empirical laws
// and the distances/concentration functionals computed on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxboot/datagen.hpp"

namespace maxboot {

enum class MaxMode { OneSided, Absolute };

/// Sorted sample of a scalar statistic. Immutable once built.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> sample) : sample_(std::move(sample)) {
    if (sample_.empty()) throw std::invalid_argument("EmpiricalDistribution: empty sample");
    for (double v : sample_) {
      if (std::isnan(v)) throw std::invalid_argument("EmpiricalDistribution: NaN in sample");
    }
    std::sort(sample_.begin(), sample_.end());
  }

  [[nodiscard]] std::span<const double> sample() const { return sample_; }
  [[nodiscard]] std::size_t size() const { return sample_.size(); }

  /// #{x <= t} / size
  [[nodiscard]] double cdf(double t) const {
    const auto k = std::upper_bound(sample_.begin(), sample_.end(), t) - sample_.begin();
    return static_cast<double>(k) / static_cast<double>(sample_.size());
  }

  /// #{x < t} / size, the left limit of cdf at t.
  [[nodiscard]] double cdf_left(double t) const {
    const auto k = std::lower_bound(sample_.begin(), sample_.end(), t) - sample_.begin();
    return static_cast<double>(k) / static_cast<double>(sample_.size());
  }

  [[nodiscard]] double mean() const {
    double s = 0.0;
    for (double v : sample_) s += v;
    return s / static_cast<double>(sample_.size());
  }

  friend bool operator==(const EmpiricalDistribution&, const EmpiricalDistribution&) = default;

 private:
  std::vector<double> sample_;
};

namespace detail {

inline double reduce_max(std::span<const double> v, MaxMode mode) {
  double best = -std::numeric_limits<double>::infinity();
  if (mode == MaxMode::OneSided) {
    for (double x : v) best = std::max(best, x);
  } else {
    for (double x : v) best = std::max(best, std::abs(x));
  }
  return best;
}

inline void require_nonempty(std::span<const double> z, const char* who) {
  if (z.empty()) throw std::invalid_argument(std::string(who) + ": empty input");
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace detail

/// max_j sqrt(n) (Xbar_j - center_j), or its absolute-value variant.
inline double max_statistic(const DataMatrix& data, std::span<const double> center, MaxMode mode) {
  if (center.size() != data.p()) {
    throw std::invalid_argument("max_statistic: center has length " + std::to_string(center.size()) +
                                ", data has p = " + std::to_string(data.p()));
  }
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  std::vector<double> sum(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < p; ++j) sum[j] += r[j];
  }
  const double nn = static_cast<double>(n);
  const double root_n = std::sqrt(nn);
  for (std::size_t j = 0; j < p; ++j) sum[j] = root_n * (sum[j] / nn - center[j]);
  return detail::reduce_max(sum, mode);
}

/// F_beta(z) = beta^{-1} log sum_j exp(beta z_j), evaluated with a max shift.
inline double smooth_max(std::span<const double> z, double beta) {
  detail::require_nonempty(z, "smooth_max");
  detail::require_positive(beta, "smooth_max: beta");
  const double top = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(beta * (v - top));
  return top + std::log(s) / beta;
}

/// pi_j(z) = exp(beta z_j) / sum_k exp(beta z_k), the gradient of smooth_max.
inline std::vector<double> softmax_weights(std::span<const double> z, double beta) {
  detail::require_nonempty(z, "softmax_weights");
  detail::require_positive(beta, "softmax_weights: beta");
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> w(z.size());
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    w[j] = std::exp(beta * (z[j] - top));
    s += w[j];
  }
  for (double& v : w) v /= s;
  return w;
}

/// inf{t : #{x > t}/size <= alpha}, i.e. the ceil((1 - alpha) size)-th order statistic.
inline double upper_quantile(const EmpiricalDistribution& dist, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("upper_quantile: alpha must lie in (0, 1)");
  }
  const auto n = static_cast<double>(dist.size());
  // Smallest k with n - k <= alpha n; the slack absorbs representation error
  // in alpha * n (e.g. 0.05 * 20).
  auto k = static_cast<std::size_t>(std::ceil(n - alpha * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, dist.size());
  return dist.sample()[k - 1];
}

/// sup_t |F_a(t) - F_b(t)| over the pooled sample.
inline double two_sample_ks(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  const auto xa = a.sample();
  const auto xb = b.sample();
  const auto na = static_cast<double>(xa.size());
  const auto nb = static_cast<double>(xb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < xa.size() || j < xb.size()) {
    double t;
    if (i == xa.size()) t = xb[j];
    else if (j == xb.size()) t = xa[i];
    else t = std::min(xa[i], xb[j]);
    while (i < xa.size() && xa[i] <= t) ++i;
    while (j < xb.size() && xb[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// sup_t max[F_a(t - eps) - F_b(t-), F_b(t - eps) - F_a(t-), 0].
inline double levy_prokhorov_pre(const EmpiricalDistribution& a, const EmpiricalDistribution& b,
                                 double eps) {
  detail::require_positive(eps, "levy_prokhorov_pre: eps");
  std::vector<double> grid;
  grid.reserve(2 * (a.size() + b.size()));
  for (const auto* d : {&a, &b}) {
    for (double x : d->sample()) {
      grid.push_back(x);
      grid.push_back(x + eps);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto gap = [&](double t) {
    return std::max({a.cdf(t - eps) - b.cdf_left(t), b.cdf(t - eps) - a.cdf_left(t), 0.0});
  };
  double best = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    best = std::max(best, gap(grid[k]));
    if (k + 1 < grid.size()) best = std::max(best, gap(0.5 * (grid[k] + grid[k + 1])));
  }
  return best;
}

/// sup_t #{t - eps < x < t} / size: the largest mass of an open interval of length eps.
inline double concentration_fn(const EmpiricalDistribution& dist, double eps) {
  detail::require_positive(eps, "concentration_fn: eps");
  const auto x = dist.sample();
  std::size_t best = 0;
  // An open interval of length eps slid to start just below x[i] captures
  // exactly the points in [x[i], x[i] + eps).
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0 && x[i] == x[i - 1]) continue;
    const auto end = std::lower_bound(x.begin() + static_cast<std::ptrdiff_t>(i), x.end(), x[i] + eps);
    best = std::max(best, static_cast<std::size_t>(end - x.begin()) - i);
  }
  return static_cast<double>(best) / static_cast<double>(x.size());
}

}  // namespace maxboot
