#pragma once

// Numerical checks of the smooth-max and interpolation machinery behind the
// consistency theory: derivative tensors of F_beta and their l1 bounds,
// stability of the softmax weights under perturbation, the permutation
// averaging identity of the coherent Lindeberg swap, and the anti-
// concentration inequality for Gaussian maxima.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "maxboot/rng.hpp"
#include "maxboot/stat_core.hpp"
#include "maxboot/tensor.hpp"

namespace maxboot {

using DerivativeTensor = DenseTensor;

struct CheckReport {
  std::string name;
  bool passed = false;
  double max_violation = 0.0;
  std::size_t trials = 0;
  std::string details;
};

inline nlohmann::json to_json(const CheckReport& r) {
  return {{"name", r.name},
          {"passed", r.passed},
          {"max_violation", r.max_violation},
          {"trials", r.trials},
          {"details", r.details}};
}

namespace detail {

// Set partitions of {0, ..., m-1} as block labels (restricted growth strings).
inline std::vector<std::vector<int>> set_partitions(int m) {
  std::vector<std::vector<int>> out;
  std::vector<int> label(static_cast<std::size_t>(m), 0);
  auto rec = [&](auto&& self, int pos, int blocks) -> void {
    if (pos == m) {
      out.push_back(label);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      label[static_cast<std::size_t>(pos)] = b;
      self(self, pos + 1, std::max(blocks, b + 1));
    }
  };
  rec(rec, 0, 0);
  return out;
}

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

}  // namespace detail

/// beta^{1-m} F_beta^{(m)}(z): the order-m joint cumulant tensor of the
/// softmax law pi(z). Each set partition of the m axes with k blocks
/// contributes (-1)^{k-1} (k-1)! times the tensor that is pi_j on the block
/// diagonals and zero elsewhere; grouping partitions by block sizes gives
///   m=2: pi^(2) - pi^(1,1)
///   m=3: pi^(3) - 3 pi^(2,1) + 2 pi^(1,1,1)
///   m=4: pi^(4) - 4 pi^(3,1) - 3 pi^(2,2) + 12 pi^(2,1,1) - 6 pi^(1,1,1,1).
inline DerivativeTensor normalized_fbeta_derivative(std::span<const double> z, double beta, int order) {
  if (order < 1 || order > 4) throw std::invalid_argument("fbeta_derivative: order must be 1..4");
  if (z.size() > 16) {
    throw std::invalid_argument("fbeta_derivative: p = " + std::to_string(z.size()) + " exceeds the dense limit 16");
  }
  const std::vector<double> pi = softmax_weights(z, beta);
  const std::size_t p = pi.size();
  DerivativeTensor t(order, p);
  std::vector<std::size_t> idx(static_cast<std::size_t>(order));
  for (const auto& part : detail::set_partitions(order)) {
    const int k = *std::max_element(part.begin(), part.end()) + 1;
    const double coef = ((k - 1) % 2 == 0 ? 1.0 : -1.0) * detail::factorial(k - 1);
    // Enumerate one coordinate per block.
    std::vector<std::size_t> block_coord(static_cast<std::size_t>(k), 0);
    for (;;) {
      double prod = coef;
      for (std::size_t b = 0; b < block_coord.size(); ++b) prod *= pi[block_coord[b]];
      for (std::size_t a = 0; a < idx.size(); ++a) idx[a] = block_coord[static_cast<std::size_t>(part[a])];
      t.entries[t.offset(idx)] += prod;
      std::size_t b = 0;
      while (b < block_coord.size() && ++block_coord[b] == p) block_coord[b++] = 0;
      if (b == block_coord.size()) break;
    }
  }
  return t;
}

/// F_beta^{(m)}(z), m = 1..4, for p <= 16.
inline DerivativeTensor fbeta_derivative(std::span<const double> z, double beta, int order) {
  DerivativeTensor t = normalized_fbeta_derivative(z, beta, order);
  const double scale = std::pow(beta, order - 1);
  for (double& v : t.entries) v *= scale;
  return t;
}

/// l1 constants C_1..C_4 for ||beta^{1-m} F_beta^{(m)}||_1.
inline constexpr std::array<double, 4> kFbetaL1Bounds{1.0, 2.0, 6.0, 26.0};

inline CheckReport check_l1_bounds(std::size_t trials, std::size_t p_max, SeedSpec seed) {
  if (p_max < 1 || p_max > 16) throw std::invalid_argument("check_l1_bounds: p_max must be 1..16");
  constexpr double tol = 1e-12;
  CheckReport rep{"smoothmax_l1_bounds", true, 0.0, trials, {}};
  std::array<double, 4> worst_ratio{};
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(seed.substream(t));
    const std::size_t p = 1 + rng.bounded(p_max);
    const double beta = std::exp(std::log(0.05) + rng.uniform() * std::log(20.0 / 0.05));
    const double scale = std::exp(std::log(0.01) + rng.uniform() * std::log(1000.0));
    std::vector<double> z(p);
    const bool ties = rng.uniform() < 0.1;
    for (double& v : z) v = ties ? 0.25 : scale * rng.normal();
    for (int m = 1; m <= 4; ++m) {
      const double norm = normalized_fbeta_derivative(z, beta, m).l1_norm();
      const double bound = kFbetaL1Bounds[static_cast<std::size_t>(m - 1)];
      worst_ratio[static_cast<std::size_t>(m - 1)] = std::max(worst_ratio[static_cast<std::size_t>(m - 1)], norm / bound);
      rep.max_violation = std::max(rep.max_violation, norm - bound);
    }
  }
  rep.max_violation = std::max(rep.max_violation, 0.0);
  rep.passed = rep.max_violation <= tol;
  std::ostringstream os;
  os.precision(6);
  os << "max ||.||_1 / C_m for m=1..4: " << worst_ratio[0] << ' ' << worst_ratio[1] << ' ' << worst_ratio[2] << ' '
     << worst_ratio[3];
  rep.details = os.str();
  return rep;
}

/// 0 <= F_beta(z) - max_j z_j <= log(p) / beta over random z, beta, p.
inline CheckReport check_smooth_max_sandwich(std::size_t trials, std::size_t p_max, SeedSpec seed) {
  if (p_max < 1) throw std::invalid_argument("check_smooth_max_sandwich: p_max must be >= 1");
  constexpr double tol = 1e-12;
  CheckReport rep{"smoothmax_sandwich", true, 0.0, trials, {}};
  double worst_gap = 0.0;
  std::vector<double> z;
  for (std::size_t t = 0; t < trials; ++t) {
    Stream rng(seed.substream(t));
    const std::size_t p = 1 + rng.bounded(p_max);
    const double beta = std::exp(std::log(0.01) + rng.uniform() * std::log(1e4));
    const double scale = std::exp(std::log(0.01) + rng.uniform() * std::log(1e4));
    z.resize(p);
    for (double& v : z) v = scale * rng.normal();
    const double gap = smooth_max(z, beta) - *std::max_element(z.begin(), z.end());
    const double bound = std::log(static_cast<double>(p)) / beta;
    rep.max_violation = std::max({rep.max_violation, -gap, gap - bound});
    if (bound > 0.0) worst_gap = std::max(worst_gap, gap / bound);
  }
  rep.max_violation = std::max(rep.max_violation, 0.0);
  rep.passed = rep.max_violation <= tol;
  std::ostringstream os;
  os.precision(6);
  os << "max (F - max) / (log p / beta) = " << worst_gap;
  rep.details = os.str();
  return rep;
}

/// e^{-2||t||beta} pi_j(z) <= pi_j(z + t) <= e^{2||t||beta} pi_j(z), checked on
/// the log scale; the violation is the excess of |log pi_j(z+t) - log pi_j(z)|
/// over 2||t||_inf beta.
inline CheckReport check_softmax_stability(std::size_t trials, SeedSpec seed) {
  constexpr double tol = 1e-12;
  CheckReport rep{"softmax_stability", true, 0.0, trials, {}};
  double worst_ratio = 0.0;
  for (std::size_t tr = 0; tr < trials; ++tr) {
    Stream rng(seed.substream(tr));
    const std::size_t p = 1 + rng.bounded(50);
    const double beta = std::exp(std::log(0.05) + rng.uniform() * std::log(10.0 / 0.05));
    const double zscale = 5.0 * rng.uniform();
    const double tscale = rng.uniform();
    const bool constant_shift = rng.uniform() < 0.1;
    std::vector<double> z(p), zt(p);
    double tnorm = 0.0;
    const double shift = tscale * (2.0 * rng.uniform() - 1.0);
    for (std::size_t j = 0; j < p; ++j) {
      z[j] = zscale * rng.normal();
      const double t = constant_shift ? shift : tscale * (2.0 * rng.uniform() - 1.0);
      zt[j] = z[j] + t;
      tnorm = std::max(tnorm, std::abs(t));
    }
    const auto a = softmax_weights(z, beta);
    const auto b = softmax_weights(zt, beta);
    const double allowed = 2.0 * tnorm * beta;
    for (std::size_t j = 0; j < p; ++j) {
      const double dev = std::abs(std::log(b[j]) - std::log(a[j]));
      rep.max_violation = std::max(rep.max_violation, dev - allowed);
      if (allowed > 0.0) worst_ratio = std::max(worst_ratio, dev / allowed);
    }
  }
  rep.max_violation = std::max(rep.max_violation, 0.0);
  rep.passed = rep.max_violation <= tol;
  std::ostringstream os;
  os.precision(6);
  os << "max |log pi(z+t) - log pi(z)| / (2 ||t|| beta) = " << worst_ratio;
  rep.details = os.str();
  return rep;
}

enum class LindebergFunction {
  SmoothMaxOfSum,    // F_beta(sum_i x_i / sqrt(n)), beta = 1
  SquaredNormOfSum,  // (sum_i x_i)^T (sum_i x_i)
  Constant,          // 1
  FirstArgument,     // x_1[0]; not permutation invariant
};

inline std::string to_string(LindebergFunction f) {
  switch (f) {
    case LindebergFunction::SmoothMaxOfSum: return "smoothmax_sum";
    case LindebergFunction::SquaredNormOfSum: return "squared_norm_sum";
    case LindebergFunction::Constant: return "constant";
    case LindebergFunction::FirstArgument: return "first_argument";
  }
  return "?";
}

/// For each i, the average over all permutations sigma and positions k of
/// 1{sigma_k = i} f(U_{sigma,k}, zeta_{k,i}), where U_{sigma,k} holds
/// X_{sigma_1..sigma_{k-1}} and X*_{sigma_{k+1}..sigma_n}, and zeta_{k,i} is
/// X_i with probability k/(n+1) and X*_i otherwise (enumerated, not sampled).
/// The reported per-i value is n times that average: the conditional mean
/// given sigma_k = i, so a constant f reproduces the constant. The check
/// passes when every i gives the same value to 1e-12.
inline CheckReport check_lindeberg_permutation(std::size_t n, std::size_t p, LindebergFunction f, SeedSpec seed) {
  if (n < 2 || n > 6) throw std::invalid_argument("check_lindeberg_permutation: n must be 2..6");
  if (p < 1 || p > 3) throw std::invalid_argument("check_lindeberg_permutation: p must be 1..3");
  if (f == LindebergFunction::FirstArgument) {
    throw std::invalid_argument("check_lindeberg_permutation: test function is not permutation invariant");
  }
  constexpr double tol = 1e-12;

  // Fixed X (centred exponential, skewed) and X* (Gaussian).
  Stream rng(seed);
  std::vector<double> x(n * p), xs(n * p);
  for (double& v : x) v = -std::log(rng.uniform()) - 1.0;
  for (double& v : xs) v = rng.normal();

  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<const double*> args(n);
  std::vector<double> sum(p);
  auto evaluate = [&]() -> double {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (const double* a : args)
      for (std::size_t j = 0; j < p; ++j) sum[j] += a[j];
    switch (f) {
      case LindebergFunction::SmoothMaxOfSum: {
        for (double& v : sum) v /= root_n;
        return smooth_max(sum, 1.0);
      }
      case LindebergFunction::SquaredNormOfSum: {
        double s = 0.0;
        for (double v : sum) s += v * v;
        return s;
      }
      case LindebergFunction::Constant:
        return 1.0;
      case LindebergFunction::FirstArgument:
        break;
    }
    return 0.0;
  };

  std::vector<long double> acc(n, 0.0L);
  std::vector<std::size_t> sigma(n);
  std::iota(sigma.begin(), sigma.end(), 0);
  std::size_t perms = 0;
  const long double denom = static_cast<long double>(n + 1);
  do {
    ++perms;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = sigma[k];
      std::size_t slot = 0;
      for (std::size_t l = 0; l < k; ++l) args[slot++] = x.data() + sigma[l] * p;
      for (std::size_t l = k + 1; l < n; ++l) args[slot++] = xs.data() + sigma[l] * p;
      // 1-based position k + 1: zeta = X_i w.p. (k+1)/(n+1), X*_i otherwise.
      args[slot] = x.data() + i * p;
      const long double with_x = evaluate();
      args[slot] = xs.data() + i * p;
      const long double with_xs = evaluate();
      acc[i] += (static_cast<long double>(k + 1) * with_x + static_cast<long double>(n - k) * with_xs) / denom;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));

  // (1/n)(1/n!) sum, times n for the conditional mean.
  std::vector<double> value(n);
  for (std::size_t i = 0; i < n; ++i) value[i] = static_cast<double>(acc[i] / static_cast<long double>(perms));

  CheckReport rep{"lindeberg_permutation", true, 0.0, n, {}};
  for (std::size_t i = 1; i < n; ++i) rep.max_violation = std::max(rep.max_violation, std::abs(value[i] - value[0]));
  rep.passed = rep.max_violation <= tol;
  std::ostringstream os;
  os.precision(17);
  os << "n=" << n << " p=" << p << " f=" << to_string(f) << " value=" << value[0];
  rep.details = os.str();
  return rep;
}

/// (eps/sigma) {4 + sqrt(2 log(p sigma / eps))}, with the log clamped at 0.
inline double gaussian_anticoncentration_bound(std::size_t p, double sigma_lower, double eps) {
  const double arg = static_cast<double>(p) * sigma_lower / eps;
  return (eps / sigma_lower) * (4.0 + std::sqrt(2.0 * std::max(0.0, std::log(arg))));
}

/// Monte Carlo estimate of sup_a P{a < max_j xi_j <= a + eps} for independent
/// xi_j ~ N(mu_j, sigma_j^2) over a 512-point grid of a spanning
/// [mean(mu) - 4 max(sigma), mean(mu) + 4 max(sigma) + eps], compared with
/// the anti-concentration bound at sigma_lower. Defaults: mu = 0,
/// sigma_j = sigma_lower. Passes when estimate + 4 SE <= bound.
inline CheckReport check_gaussian_anticoncentration(std::size_t p, double sigma_lower, double eps,
                                                    std::size_t mc_reps, SeedSpec seed,
                                                    std::optional<std::vector<double>> means = std::nullopt,
                                                    std::optional<std::vector<double>> sigmas = std::nullopt) {
  if (p < 1) throw std::invalid_argument("check_gaussian_anticoncentration: p must be >= 1");
  if (!(sigma_lower > 0.0) || !(eps > 0.0)) {
    throw std::invalid_argument("check_gaussian_anticoncentration: sigma_lower and eps must be positive");
  }
  if (mc_reps < 10000) throw std::invalid_argument("check_gaussian_anticoncentration: mc_reps must be >= 10^4");
  const std::vector<double> mu = means.value_or(std::vector<double>(p, 0.0));
  const std::vector<double> sd = sigmas.value_or(std::vector<double>(p, sigma_lower));
  if (mu.size() != p || sd.size() != p) throw std::invalid_argument("check_gaussian_anticoncentration: length mismatch");
  for (double s : sd) {
    if (s < sigma_lower) throw std::invalid_argument("check_gaussian_anticoncentration: sigma_j below sigma_lower");
  }

  Stream rng(seed);
  std::vector<double> maxima(mc_reps);
  for (double& m : maxima) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p; ++j) best = std::max(best, mu[j] + sd[j] * rng.normal());
    m = best;
  }
  std::sort(maxima.begin(), maxima.end());

  const double mu_bar = std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(p);
  const double sd_bar = *std::max_element(sd.begin(), sd.end());
  const double lo = mu_bar - 4.0 * sd_bar;
  const double hi = mu_bar + 4.0 * sd_bar + eps;
  constexpr int kGrid = 512;
  std::size_t best_count = 0;
  double best_a = lo;
  for (int g = 0; g < kGrid; ++g) {
    const double a = lo + (hi - lo) * g / (kGrid - 1);
    const auto upper = std::upper_bound(maxima.begin(), maxima.end(), a + eps);
    const auto lower = std::upper_bound(maxima.begin(), maxima.end(), a);
    const auto count = static_cast<std::size_t>(upper - lower);
    if (count > best_count) {
      best_count = count;
      best_a = a;
    }
  }
  const double reps = static_cast<double>(mc_reps);
  const double q = static_cast<double>(best_count) / reps;
  const double se = std::sqrt(q * (1.0 - q) / reps);
  const double bound = gaussian_anticoncentration_bound(p, sigma_lower, eps);

  CheckReport rep{"gaussian_anticoncentration", true, 0.0, mc_reps, {}};
  rep.max_violation = std::max(0.0, q + 4.0 * se - bound);
  rep.passed = rep.max_violation == 0.0;
  std::ostringstream os;
  os.precision(6);
  os << "p=" << p << " eps=" << eps << " sup_prob=" << q << " se=" << se << " at a=" << best_a << " bound=" << bound;
  rep.details = os.str();
  return rep;
}

}  // namespace maxboot
