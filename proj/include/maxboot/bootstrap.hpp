#pragma once

// Resampling schemes for the max statistic: Efron's empirical bootstrap, the
// wild bootstrap with Gaussian / Rademacher / Mammen multipliers, and the
// mixed wild bootstrap whose multiplier mixes a Gaussian branch with a
// rescaled Mammen branch.

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxboot/datagen.hpp"
#include "maxboot/parallel.hpp"
#include "maxboot/rng.hpp"
#include "maxboot/stat_core.hpp"

namespace maxboot {

enum class MultiplierLaw { Gaussian, Rademacher, Mammen, Mixed };

struct MultiplierKind {
  MultiplierLaw law = MultiplierLaw::Gaussian;
  double p0 = 0.5;  // Gaussian-branch probability, Mixed only

  static constexpr MultiplierKind gaussian() { return {MultiplierLaw::Gaussian, 0.0}; }
  static constexpr MultiplierKind rademacher() { return {MultiplierLaw::Rademacher, 0.0}; }
  static constexpr MultiplierKind mammen() { return {MultiplierLaw::Mammen, 0.0}; }
  static MultiplierKind mixed(double p0) {
    if (!(p0 > 0.0 && p0 < 1.0)) {
      throw std::invalid_argument("mixed multiplier: p0 must lie in (0, 1), got " + std::to_string(p0));
    }
    return {MultiplierLaw::Mixed, p0};
  }
};

/// Two-point Mammen law: P{W = (1 +- sqrt5)/2} = (sqrt5 -+ 1)/(2 sqrt5).
struct MammenLaw {
  static constexpr double kSqrt5 = 2.23606797749978969640917366873128;
  static constexpr double high = (1.0 + kSqrt5) / 2.0;
  static constexpr double low = (1.0 - kSqrt5) / 2.0;
  static constexpr double prob_high = (kSqrt5 - 1.0) / (2.0 * kSqrt5);
  static constexpr double prob_low = (kSqrt5 + 1.0) / (2.0 * kSqrt5);

  static double draw(Stream& rng) { return rng.uniform() < prob_high ? high : low; }
};

/// a0, b0 fixed by E W^2 = E W^3 = 1 for W = a0 d Z + b0 (1 - d) W0.
struct MixedCoefficients {
  double a0;
  double b0;

  static MixedCoefficients for_p0(double p0) {
    const double c = std::cbrt(1.0 - p0);
    return {std::sqrt((1.0 - c) / p0), 1.0 / c};
  }
};

/// Exact E W^order, order in 1..4.
inline double multiplier_moment(MultiplierKind kind, int order) {
  if (order < 1 || order > 4) throw std::invalid_argument("multiplier_moment: order must be 1..4");
  constexpr std::array<double, 5> gaussian{1.0, 0.0, 1.0, 0.0, 3.0};
  auto mammen = [](int m) {
    return MammenLaw::prob_high * std::pow(MammenLaw::high, m) +
           MammenLaw::prob_low * std::pow(MammenLaw::low, m);
  };
  switch (kind.law) {
    case MultiplierLaw::Gaussian:
      return gaussian[static_cast<std::size_t>(order)];
    case MultiplierLaw::Rademacher:
      return order % 2 == 0 ? 1.0 : 0.0;
    case MultiplierLaw::Mammen:
      return mammen(order);
    case MultiplierLaw::Mixed: {
      const auto [a0, b0] = MixedCoefficients::for_p0(kind.p0);
      return kind.p0 * std::pow(a0, order) * gaussian[static_cast<std::size_t>(order)] +
             (1.0 - kind.p0) * std::pow(b0, order) * mammen(order);
    }
  }
  return 0.0;
}

struct MultiplierMoments {
  double m1;
  double m2;
  double m3;
};

inline MultiplierMoments multiplier_moments(MultiplierKind kind) {
  return {multiplier_moment(kind, 1), multiplier_moment(kind, 2), multiplier_moment(kind, 3)};
}

/// The independent pieces (delta_i, Z_i, W0_i) of a mixed multiplier sequence.
struct MixedComponents {
  std::vector<std::uint8_t> delta;
  std::vector<double> z;
  std::vector<double> w0;

  [[nodiscard]] std::vector<double> combine(double p0) const {
    const auto [a0, b0] = MixedCoefficients::for_p0(p0);
    std::vector<double> w(delta.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = delta[i] ? a0 * z[i] : b0 * w0[i];
    return w;
  }
};

namespace detail {

// One multiplier from `rng`. Mixed always consumes delta, Z and W0 so the
// stream layout does not depend on the branch taken.
inline double draw_one(MultiplierKind kind, Stream& rng, MixedCoefficients mix) {
  switch (kind.law) {
    case MultiplierLaw::Gaussian:
      return rng.normal();
    case MultiplierLaw::Rademacher:
      return (rng.next_u64() >> 63) ? 1.0 : -1.0;
    case MultiplierLaw::Mammen:
      return MammenLaw::draw(rng);
    case MultiplierLaw::Mixed: {
      const bool delta = rng.bernoulli(kind.p0);
      const double z = rng.normal();
      const double w0 = MammenLaw::draw(rng);
      return delta ? mix.a0 * z : mix.b0 * w0;
    }
  }
  return 0.0;
}

}  // namespace detail

inline MixedComponents draw_mixed_components(double p0, std::size_t n, SeedSpec seed) {
  const MultiplierKind kind = MultiplierKind::mixed(p0);
  Stream rng(seed);
  MixedComponents c;
  c.delta.resize(n);
  c.z.resize(n);
  c.w0.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.delta[i] = rng.bernoulli(kind.p0) ? 1 : 0;
    c.z[i] = rng.normal();
    c.w0[i] = MammenLaw::draw(rng);
  }
  return c;
}

inline std::vector<double> draw_multipliers(MultiplierKind kind, std::size_t n, SeedSpec seed) {
  if (n < 1) throw std::invalid_argument("draw_multipliers: n must be >= 1");
  if (kind.law == MultiplierLaw::Mixed) return draw_mixed_components(kind.p0, n, seed).combine(kind.p0);
  Stream rng(seed);
  std::vector<double> w(n);
  for (double& v : w) v = detail::draw_one(kind, rng, {});
  return w;
}

enum class Scheme { Empirical, Wild, MixedWild };

struct BootstrapPlan {
  Scheme scheme = Scheme::Empirical;
  MultiplierKind multiplier{};
  std::size_t b_reps = 500;
  bool center_by_sample_mean = true;

  static BootstrapPlan empirical(std::size_t b_reps = 500) {
    return make({Scheme::Empirical, MultiplierKind::gaussian(), b_reps, true});
  }
  static BootstrapPlan wild(MultiplierKind kind, std::size_t b_reps = 500) {
    if (kind.law == MultiplierLaw::Mixed) return mixed_wild(kind.p0, b_reps);
    return make({Scheme::Wild, kind, b_reps, true});
  }
  static BootstrapPlan mixed_wild(double p0, std::size_t b_reps = 500) {
    return make({Scheme::MixedWild, MultiplierKind::mixed(p0), b_reps, false});
  }

  /// Short label used in result tables.
  [[nodiscard]] std::string name() const {
    switch (scheme) {
      case Scheme::Empirical:
        return "Empirical";
      case Scheme::MixedWild:
        return "Mixed";
      case Scheme::Wild:
        switch (multiplier.law) {
          case MultiplierLaw::Gaussian: return "Gaussian";
          case MultiplierLaw::Rademacher: return "Rademacher";
          case MultiplierLaw::Mammen: return "Mammen";
          case MultiplierLaw::Mixed: return "Mixed";
        }
    }
    return "?";
  }

 private:
  static BootstrapPlan make(BootstrapPlan plan) {
    if (plan.b_reps < 1) throw std::invalid_argument("BootstrapPlan: b_reps must be >= 1");
    return plan;
  }
};

/// Centred data plus the resampling kernel for one plan. Building it once and
/// calling `draw` per replicate avoids re-centring the data B times.
class BootstrapEngine {
 public:
  BootstrapEngine(const DataMatrix& data, const BootstrapPlan& plan, MaxMode mode)
      : n_(data.n()), p_(data.p()), plan_(plan), mode_(mode),
        mix_(plan.scheme == Scheme::MixedWild ? MixedCoefficients::for_p0(plan.multiplier.p0)
                                              : MixedCoefficients{0.0, 0.0}) {
    if (n_ < 2) throw std::invalid_argument("bootstrap: need n >= 2 rows");
    std::vector<double> center;
    if (plan.scheme == Scheme::MixedWild && data.known_mean()) {
      center = *data.known_mean();
    } else {
      center = data.column_means();
      if (plan.scheme == Scheme::MixedWild) {
        sample_mean_fallback_ = true;
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true)) {
          std::cerr << "maxboot: mixed wild bootstrap without a known mean; centring by the sample mean\n";
        }
      }
    }
    centered_.resize(n_ * p_);
    for (std::size_t i = 0; i < n_; ++i) {
      const auto r = data.row(i);
      for (std::size_t j = 0; j < p_; ++j) centered_[i * p_ + j] = r[j] - center[j];
    }
  }

  /// One draw of T*_n from the replicate stream `seed`.
  [[nodiscard]] double draw(SeedSpec seed) const {
    Stream rng(seed);
    std::vector<double> z(p_, 0.0);
    if (plan_.scheme == Scheme::Empirical) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double* src = centered_.data() + rng.bounded(n_) * p_;
        for (std::size_t j = 0; j < p_; ++j) z[j] += src[j];
      }
    } else {
      for (std::size_t i = 0; i < n_; ++i) {
        const double w = detail::draw_one(plan_.multiplier, rng, mix_);
        const double* src = centered_.data() + i * p_;
        for (std::size_t j = 0; j < p_; ++j) z[j] += w * src[j];
      }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    for (double& v : z) v *= scale;
    return detail::reduce_max(z, mode_);
  }

  /// True when a mixed plan had no known mean and fell back to the sample mean.
  [[nodiscard]] bool sample_mean_fallback() const { return sample_mean_fallback_; }

 private:
  std::size_t n_;
  std::size_t p_;
  BootstrapPlan plan_;
  MaxMode mode_;
  MixedCoefficients mix_;
  std::vector<double> centered_;
  bool sample_mean_fallback_ = false;
};

inline double bootstrap_stat_once(const DataMatrix& data, const BootstrapPlan& plan, MaxMode mode,
                                  SeedSpec seed) {
  return BootstrapEngine(data, plan, mode).draw(seed);
}

/// b_reps conditionally independent draws of T*_n; replicate b uses
/// seed.substream(b), so the result does not depend on `threads`.
inline EmpiricalDistribution bootstrap_distribution(const DataMatrix& data, const BootstrapPlan& plan,
                                                    MaxMode mode, SeedSpec seed, unsigned threads = 1) {
  const BootstrapEngine engine(data, plan, mode);
  std::vector<double> stats(plan.b_reps);
  parallel_for(plan.b_reps, threads, [&](std::size_t b) { stats[b] = engine.draw(seed.substream(b)); });
  return EmpiricalDistribution(std::move(stats));
}

}  // namespace maxboot
