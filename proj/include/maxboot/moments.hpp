#pragma once

// Plug-in moment functionals, the truncation operator, moment-tensor
// differences between the data and a bootstrap law, and the constant-free
// consistency rates gamma*_n.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxboot/bootstrap.hpp"
#include "maxboot/datagen.hpp"
#include "maxboot/rng.hpp"
#include "maxboot/tensor.hpp"

namespace maxboot {

enum class Centering { KnownMean, SampleMean };

/// Plug-in estimates, all on the "m-th root" scale:
///   M_m     = max_j (avg_i |X_ij - c_j|^m)^{1/m}
///   sigma_lower = min_j (avg_i |X_ij - c_j|^2)^{1/2}
///   Mcal4   = (avg_i max_j |X_ij - c_j|^4)^{1/4}
/// Mcal_m1 pools the per-row expectations over rows and Mcal_m2 replaces the
/// outer expectation by the observed sample; with one dataset of identically
/// distributed rows both reduce to M_m.
struct MomentSummary {
  double M2 = 0.0;
  double M4 = 0.0;
  double M6 = 0.0;
  double sigma_lower = 0.0;
  double Mcal4 = 0.0;
  std::map<int, double> Mcal_m1;
  std::map<int, double> Mcal_m2;
  Centering centering = Centering::SampleMean;
};

namespace detail {

inline std::vector<double> centering_vector(const DataMatrix& data, Centering centering, const char* who) {
  if (centering == Centering::SampleMean) return data.column_means();
  if (!data.known_mean()) {
    throw std::invalid_argument(std::string(who) + ": KnownMean centering requires data with a known mean");
  }
  return *data.known_mean();
}

}  // namespace detail

inline MomentSummary estimate_moment_summary(const DataMatrix& data, Centering centering) {
  if (data.n() < 2) throw std::invalid_argument("estimate_moment_summary: need n >= 2");
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  const auto c = detail::centering_vector(data, centering, "estimate_moment_summary");

  std::vector<double> s2(p, 0.0), s4(p, 0.0), s6(p, 0.0);
  double row_max4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    double mx = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double d2 = (r[j] - c[j]) * (r[j] - c[j]);
      s2[j] += d2;
      s4[j] += d2 * d2;
      s6[j] += d2 * d2 * d2;
      mx = std::max(mx, d2 * d2);
    }
    row_max4 += mx;
  }
  const double nn = static_cast<double>(n);
  MomentSummary out;
  out.centering = centering;
  out.M2 = std::sqrt(*std::max_element(s2.begin(), s2.end()) / nn);
  out.M4 = std::pow(*std::max_element(s4.begin(), s4.end()) / nn, 0.25);
  out.M6 = std::pow(*std::max_element(s6.begin(), s6.end()) / nn, 1.0 / 6.0);
  out.sigma_lower = std::sqrt(*std::min_element(s2.begin(), s2.end()) / nn);
  out.Mcal4 = std::pow(row_max4 / nn, 0.25);
  out.Mcal_m1 = {{4, out.M4}, {6, out.M6}};
  out.Mcal_m2 = {{4, out.M4}, {6, out.M6}};
  return out;
}

enum class CertificateScheme { Empirical, Wild };
enum class RateBranch { TailBranch, MomentBranch };

struct RateCertificate {
  double gamma_star = 0.0;
  RateBranch branch = RateBranch::TailBranch;
  double tail_value = 0.0;
  double moment_value = 0.0;
  double kappa_n4 = 0.0;
  double b_n = 0.0;
  double M = 0.0;  // the smallest admissible tail constant
  std::size_t n = 0;
  std::size_t p = 0;
};

/// gamma*_n = min{ ((log p)^2 (log np)^3 / n)^{1/6} M / sigma,
///                 ((log np)^5 / n)^{1/6} (Mcal / sigma)^{2/3} },
/// with M = 2 (sigma/M4)^{1/3} M4 (empirical) or (sigma/M4)^{1/3} M4 (wild)
/// and Mcal = Mcal4 (empirical) or Mcal_{4,2} (wild).
///
/// kappa_{n,4} = b_n^4 (log p)^3 M4^4 / n. When b_n is not supplied it is
/// {n^{1/2} / (M4^2 sigma log p)}^{1/3} / t_n with t_n = (M/sigma)/(M4/sigma)^{2/3}.
inline RateCertificate rate_certificate(const MomentSummary& s, std::size_t n, std::size_t p,
                                        CertificateScheme scheme, std::optional<double> b_n = std::nullopt) {
  if (n < 2 || p < 2) throw std::invalid_argument("rate_certificate: need n >= 2 and p >= 2");
  if (!(s.sigma_lower > 0.0)) throw std::invalid_argument("rate_certificate: sigma_lower must be positive");
  const double sigma = s.sigma_lower;
  const double nn = static_cast<double>(n);
  const double log_p = std::log(static_cast<double>(p));
  const double log_np = std::log(nn * static_cast<double>(p));

  RateCertificate out;
  out.n = n;
  out.p = p;
  const double factor = scheme == CertificateScheme::Empirical ? 2.0 : 1.0;
  out.M = factor * std::cbrt(sigma / s.M4) * s.M4;

  double mcal = s.Mcal4;
  if (scheme == CertificateScheme::Wild) {
    const auto it = s.Mcal_m2.find(4);
    if (it == s.Mcal_m2.end()) throw std::invalid_argument("rate_certificate: summary lacks Mcal_m2[4]");
    mcal = it->second;
  }
  out.tail_value = std::pow(log_p * log_p * log_np * log_np * log_np / nn, 1.0 / 6.0) * out.M / sigma;
  out.moment_value = std::pow(std::pow(log_np, 5) / nn, 1.0 / 6.0) * std::pow(mcal / sigma, 2.0 / 3.0);
  if (out.tail_value <= out.moment_value) {
    out.gamma_star = out.tail_value;
    out.branch = RateBranch::TailBranch;
  } else {
    out.gamma_star = out.moment_value;
    out.branch = RateBranch::MomentBranch;
  }

  if (b_n) {
    if (!(*b_n > 0.0)) throw std::invalid_argument("rate_certificate: b_n must be positive");
    out.b_n = *b_n;
  } else {
    const double t_n = (out.M / sigma) / std::pow(s.M4 / sigma, 2.0 / 3.0);
    out.b_n = std::cbrt(std::sqrt(nn) / (s.M4 * s.M4 * sigma * log_p)) / t_n;
  }
  out.kappa_n4 = std::pow(out.b_n, 4) * log_p * log_p * log_p * std::pow(s.M4, 4) / nn;
  return out;
}

/// X_ij 1{|X_ij| <= a_n} - c_j. Under SampleMean, c_j is the mean of the
/// truncated column (output columns average to zero). Under KnownMean, c_j is
/// the known untruncated mean, which is the truncated mean whenever no entry
/// of the column is cut.
inline DataMatrix truncate_centered(const DataMatrix& data, double a_n, Centering centering) {
  if (!(a_n > 0.0)) throw std::invalid_argument("truncate_centered: a_n must be positive");
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  std::vector<double> out(n * p);
  const auto in = data.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(in[k]) <= a_n ? in[k] : 0.0;

  std::vector<double> c;
  if (centering == Centering::KnownMean) {
    c = detail::centering_vector(data, centering, "truncate_centered");
  } else {
    c.assign(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) c[j] += out[i * p + j];
    for (double& v : c) v /= static_cast<double>(n);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) out[i * p + j] -= c[j];
  return DataMatrix(n, p, std::move(out));
}

/// (1/n) sum_i (X_i - Xbar)^{(x)order}.
inline DenseTensor sample_moment_tensor(const DataMatrix& data, int order) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  const auto mean = data.column_means();
  DenseTensor t(order, p);
  std::vector<double> xc(p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < p; ++j) xc[j] = r[j] - mean[j];
    add_outer_power(t, xc, 1.0 / static_cast<double>(n));
  }
  return t;
}

struct TensorDiffReport {
  double exact = 0.0;                // ||mu - nu||_max with nu in closed form
  std::optional<double> monte_carlo;  // ||mu - nu_mc||_max, when b_reps_for_nu > 0
  DenseTensor mu;
  DenseTensor nu;
  std::optional<DenseTensor> nu_mc;
};

/// Compares the sample-centred average moment tensor mu of order 2..4 with
/// the conditional bootstrap average moment tensor nu. Wild schemes have
/// nu = E W^m mu exactly; the empirical bootstrap draws from the centred
/// points themselves so nu = mu. With b_reps_for_nu > 0 a Monte Carlo nu is
/// also formed from that many bootstrap samples of the n rows.
inline TensorDiffReport moment_tensor_diff_max(const DataMatrix& data, const BootstrapPlan& plan, int order,
                                               std::size_t b_reps_for_nu, SeedSpec seed) {
  if (order < 2 || order > 4) throw std::invalid_argument("moment_tensor_diff_max: order must be 2, 3 or 4");
  const std::size_t p = data.p();
  if ((order == 3 && p > 64) || (order == 4 && p > 16)) {
    throw std::invalid_argument("moment_tensor_diff_max: p = " + std::to_string(p) +
                                " exceeds the dense tensor limit for order " + std::to_string(order));
  }
  if (data.n() < 2) throw std::invalid_argument("moment_tensor_diff_max: need n >= 2");

  TensorDiffReport rep;
  rep.mu = sample_moment_tensor(data, order);
  rep.nu = rep.mu;
  if (plan.scheme != Scheme::Empirical) {
    const double ew = multiplier_moment(plan.multiplier, order);
    for (double& v : rep.nu.entries) v *= ew;
  }
  rep.exact = max_abs_diff(rep.mu, rep.nu);

  if (b_reps_for_nu > 0) {
    // nu_mc = (1/B) sum_b (1/n) sum_i (X*_{b,i})^{(x)m} collapses to a weighted
    // sum of the centred rows' outer powers: weight_i = average over b of
    // W_{b,i}^m (wild) or of the number of times row i was drawn (empirical).
    const std::size_t n = data.n();
    std::vector<double> weight(n, 0.0);
    const MixedCoefficients mix = plan.scheme == Scheme::MixedWild
                                      ? MixedCoefficients::for_p0(plan.multiplier.p0)
                                      : MixedCoefficients{0.0, 0.0};
    for (std::size_t b = 0; b < b_reps_for_nu; ++b) {
      Stream rng(seed.substream(b));
      for (std::size_t i = 0; i < n; ++i) {
        if (plan.scheme == Scheme::Empirical) {
          weight[rng.bounded(n)] += 1.0;
        } else {
          weight[i] += std::pow(detail::draw_one(plan.multiplier, rng, mix), order);
        }
      }
    }
    const auto mean = data.column_means();
    DenseTensor nu_mc(order, p);
    std::vector<double> xc(p);
    const double scale = 1.0 / (static_cast<double>(b_reps_for_nu) * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = data.row(i);
      for (std::size_t j = 0; j < p; ++j) xc[j] = r[j] - mean[j];
      add_outer_power(nu_mc, xc, weight[i] * scale);
    }
    rep.monte_carlo = max_abs_diff(rep.mu, nu_mc);
    rep.nu_mc = std::move(nu_mc);
  }
  return rep;
}

}  // namespace maxboot
