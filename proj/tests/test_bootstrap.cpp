#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "maxboot/bootstrap.hpp"
#include "maxboot/rng.hpp"

using namespace maxboot;

namespace {

DataMatrix make_data(std::size_t n, std::size_t p, std::uint64_t seed, bool skewed = true) {
  Stream rng(SeedSpec{seed, 0});
  std::vector<double> v(n * p);
  for (double& x : v) x = skewed ? -std::log(rng.uniform()) : rng.normal();
  return DataMatrix(n, p, v);
}

// Two-point law by hand, independent of MammenLaw.
double mammen_moment_by_hand(int m) {
  const double s5 = std::sqrt(5.0);
  const double hi = (1 + s5) / 2, lo = (1 - s5) / 2;
  const double phi = (s5 - 1) / (2 * s5), plo = (s5 + 1) / (2 * s5);
  return phi * std::pow(hi, m) + plo * std::pow(lo, m);
}

}  // namespace

TEST(Multiplier, ExactMoments) {
  const auto g = multiplier_moments(MultiplierKind::gaussian());
  EXPECT_EQ(g.m1, 0.0);
  EXPECT_EQ(g.m2, 1.0);
  EXPECT_EQ(g.m3, 0.0);
  const auto r = multiplier_moments(MultiplierKind::rademacher());
  EXPECT_EQ(r.m1, 0.0);
  EXPECT_EQ(r.m2, 1.0);
  EXPECT_EQ(r.m3, 0.0);
  const auto m = multiplier_moments(MultiplierKind::mammen());
  EXPECT_NEAR(m.m1, 0.0, 1e-15);
  EXPECT_NEAR(m.m2, 1.0, 1e-15);
  EXPECT_NEAR(m.m3, 1.0, 1e-15);
  EXPECT_NEAR(MammenLaw::prob_high, 0.27639, 1e-5);
  EXPECT_NEAR(MammenLaw::prob_low, 0.72361, 1e-5);
  EXPECT_NEAR(MammenLaw::high, 1.61803, 1e-5);
  EXPECT_NEAR(MammenLaw::low, -0.61803, 1e-5);
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(multiplier_moment(MultiplierKind::mammen(), k), mammen_moment_by_hand(k), 1e-14);
  EXPECT_NEAR(multiplier_moment(MultiplierKind::mammen(), 4), 2.0, 1e-14);

  const auto x = multiplier_moments(MultiplierKind::mixed(0.5));
  EXPECT_NEAR(x.m1, 0.0, 1e-15);
  EXPECT_NEAR(x.m2, 1.0, 1e-15);
  EXPECT_NEAR(x.m3, 1.0, 1e-15);
  const auto c = MixedCoefficients::for_p0(0.5);
  EXPECT_NEAR(c.a0, 0.6423387, 1e-6);
  EXPECT_NEAR(c.b0, 1.259921, 1e-6);
}

TEST(Multiplier, MixedMomentsForOtherP0) {
  for (double p0 : {0.05, 0.3, 0.9}) {
    const auto [a0, b0] = MixedCoefficients::for_p0(p0);
    // Independent evaluation of E W^2 and E W^3 from the branch moments.
    const double m2 = p0 * a0 * a0 + (1 - p0) * b0 * b0 * mammen_moment_by_hand(2);
    const double m3 = (1 - p0) * b0 * b0 * b0 * mammen_moment_by_hand(3);
    EXPECT_NEAR(m2, 1.0, 1e-14);
    EXPECT_NEAR(m3, 1.0, 1e-14);
    EXPECT_NEAR(multiplier_moment(MultiplierKind::mixed(p0), 2), 1.0, 1e-14);
    EXPECT_NEAR(multiplier_moment(MultiplierKind::mixed(p0), 3), 1.0, 1e-14);
  }
  EXPECT_THROW(MultiplierKind::mixed(0.0), std::invalid_argument);
  EXPECT_THROW(MultiplierKind::mixed(1.0), std::invalid_argument);
  EXPECT_THROW(multiplier_moment(MultiplierKind::gaussian(), 5), std::invalid_argument);
}

TEST(Multiplier, RademacherDraws) {
  const std::size_t n = 1000000;
  const auto w = draw_multipliers(MultiplierKind::rademacher(), n, SeedSpec{1, 0});
  double s = 0, s2 = 0;
  for (double v : w) {
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(double(n)));
  EXPECT_EQ(s2 / n, 1.0);
}

TEST(Multiplier, MammenThirdMoment) {
  const std::size_t n = 1000000;
  const auto w = draw_multipliers(MultiplierKind::mammen(), n, SeedSpec{2, 0});
  double s3 = 0;
  for (double v : w) s3 += v * v * v;
  const double var_w3 = mammen_moment_by_hand(6) - 1.0;
  EXPECT_NEAR(s3 / n, 1.0, 4.0 * std::sqrt(var_w3 / n));
}

TEST(Multiplier, MixedBranchFractionAndCombine) {
  const std::size_t n = 1000000;
  const auto c = draw_mixed_components(0.5, n, SeedSpec{3, 0});
  double frac = 0;
  for (auto d : c.delta) frac += d;
  frac /= n;
  EXPECT_NEAR(frac, 0.5, 4.0 * std::sqrt(0.25 / n) * 2);
  const auto w = draw_multipliers(MultiplierKind::mixed(0.5), n, SeedSpec{3, 0});
  EXPECT_EQ(w, c.combine(0.5));
}

TEST(Multiplier, SampledMomentsWithinFourSe) {
  const std::size_t n = 1000000;
  for (auto kind : {MultiplierKind::gaussian(), MultiplierKind::mammen(), MultiplierKind::rademacher(),
                    MultiplierKind::mixed(0.5)}) {
    const auto w = draw_multipliers(kind, n, SeedSpec{4, static_cast<std::uint64_t>(kind.law)});
    for (int k = 1; k <= 3; ++k) {
      double s = 0;
      for (double v : w) s += std::pow(v, k);
      const double mean = s / n;
      double ss = 0;
      for (double v : w) ss += (std::pow(v, k) - mean) * (std::pow(v, k) - mean);
      const double se = std::sqrt(ss / (n - 1) / n);
      EXPECT_NEAR(mean, multiplier_moment(kind, k), 4.0 * se + 1e-15) << int(kind.law) << " order " << k;
    }
  }
}

TEST(BootstrapPlan, CenteringFlags) {
  EXPECT_TRUE(BootstrapPlan::empirical().center_by_sample_mean);
  EXPECT_TRUE(BootstrapPlan::wild(MultiplierKind::mammen()).center_by_sample_mean);
  EXPECT_FALSE(BootstrapPlan::mixed_wild(0.5).center_by_sample_mean);
  EXPECT_EQ(BootstrapPlan::empirical().b_reps, 500u);
  EXPECT_THROW(BootstrapPlan::empirical(0), std::invalid_argument);
  EXPECT_EQ(BootstrapPlan::wild(MultiplierKind::rademacher()).name(), "Rademacher");
}

TEST(Bootstrap, IdenticalRowsEmpiricalIsZero) {
  const DataMatrix data(6, 3, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  for (std::uint64_t s = 0; s < 20; ++s) {
    EXPECT_EQ(bootstrap_stat_once(data, BootstrapPlan::empirical(), MaxMode::OneSided, SeedSpec{s, 0}), 0.0);
  }
  const auto d = bootstrap_distribution(data, BootstrapPlan::empirical(37), MaxMode::Absolute, SeedSpec{1, 1});
  EXPECT_EQ(d.size(), 37u);
  for (double v : d.sample()) EXPECT_EQ(v, 0.0);
}

TEST(Bootstrap, RademacherTriangleBound) {
  const DataMatrix data(5, 1, {1.0, -2.0, 0.5, 3.0, -2.5});  // mean zero
  double bound = 0;
  for (double v : data.values()) bound += std::abs(v);
  bound /= std::sqrt(5.0);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const double t = bootstrap_stat_once(data, BootstrapPlan::wild(MultiplierKind::rademacher()), MaxMode::Absolute,
                                         SeedSpec{s, 3});
    EXPECT_LE(t, bound + 1e-12);
  }
}

TEST(Bootstrap, EmpiricalTwoPointEnumeration) {
  const DataMatrix data(2, 1, {0.0, 2.0});
  // Resamples of centred {-1, 1}: sums -2, 0, 0, 2 over sqrt 2.
  std::map<double, int> counts;
  const std::size_t b = 40000;
  const auto d = bootstrap_distribution(data, BootstrapPlan::empirical(b), MaxMode::OneSided, SeedSpec{5, 0});
  double mean = 0;
  for (double v : d.sample()) {
    mean += v;
    const double rounded = std::round(v / std::sqrt(2.0));
    EXPECT_NEAR(v, rounded * std::sqrt(2.0), 1e-14);
    ++counts[rounded];
  }
  ASSERT_EQ(counts.size(), 3u);
  EXPECT_NEAR(counts[-1.0] / double(b), 0.25, 4 * std::sqrt(0.25 * 0.75 / b));
  EXPECT_NEAR(counts[0.0] / double(b), 0.5, 4 * std::sqrt(0.25 / b));
  EXPECT_NEAR(counts[1.0] / double(b), 0.25, 4 * std::sqrt(0.25 * 0.75 / b));
  EXPECT_NEAR(mean / b, 0.0, 4 * 1.0 / std::sqrt(double(b)));
}

// Exact conditional mean over the 2^5 two-point multiplier patterns.
TEST(Bootstrap, TwoPointConditionalMeanByEnumeration) {
  const DataMatrix data(5, 2, {1.0, 0.2, -0.4, 1.5, 2.2, -0.3, 0.1, 0.9, -1.7, 0.6});
  const auto mean = data.column_means();
  const double s5 = std::sqrt(5.0);
  struct Law {
    MultiplierKind kind;
    double hi, lo, p_hi;
  };
  for (const Law& law : {Law{MultiplierKind::rademacher(), 1.0, -1.0, 0.5},
                         Law{MultiplierKind::mammen(), (1 + s5) / 2, (1 - s5) / 2, (s5 - 1) / (2 * s5)}}) {
    double exact = 0;
    for (int mask = 0; mask < 32; ++mask) {
      double z0 = 0, z1 = 0, prob = 1;
      for (int i = 0; i < 5; ++i) {
        const bool up = (mask >> i) & 1;
        const double w = up ? law.hi : law.lo;
        prob *= up ? law.p_hi : 1 - law.p_hi;
        z0 += w * (data(i, 0) - mean[0]);
        z1 += w * (data(i, 1) - mean[1]);
      }
      exact += prob * std::max(z0, z1) / std::sqrt(5.0);
    }
    const std::size_t b = 100000;
    const auto d = bootstrap_distribution(data, BootstrapPlan::wild(law.kind, b), MaxMode::OneSided, SeedSpec{6, 0});
    double s = 0, ss = 0;
    for (double v : d.sample()) s += v;
    const double m = s / b;
    for (double v : d.sample()) ss += (v - m) * (v - m);
    EXPECT_NEAR(m, exact, 4.0 * std::sqrt(ss / (b - 1) / b)) << int(law.kind.law);
  }
}

TEST(Bootstrap, SingleRepMatchesRepZero) {
  const auto data = make_data(20, 4, 7);
  const SeedSpec seed{8, 2};
  for (auto plan : {BootstrapPlan::empirical(1), BootstrapPlan::wild(MultiplierKind::mammen(), 1),
                    BootstrapPlan::mixed_wild(0.5, 1)}) {
    const auto d = bootstrap_distribution(data, plan, MaxMode::OneSided, seed);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d.sample()[0], bootstrap_stat_once(data, plan, MaxMode::OneSided, seed.substream(0)));
  }
}

TEST(Bootstrap, EmpiricalSumHasMeanZero) {
  const auto data = make_data(30, 1, 9);
  const std::size_t b = 50000;
  // p = 1 and OneSided: the statistic is the scaled resampled sum itself.
  const auto d = bootstrap_distribution(data, BootstrapPlan::empirical(b), MaxMode::OneSided, SeedSpec{10, 0});
  double s = 0, ss = 0;
  for (double v : d.sample()) s += v;
  const double m = s / b;
  for (double v : d.sample()) ss += (v - m) * (v - m);
  EXPECT_NEAR(m, 0.0, 4.0 * std::sqrt(ss / (b - 1) / b));
}

TEST(Bootstrap, WildMatchesManualComputation) {
  const auto data = make_data(12, 3, 11);
  const auto mean = data.column_means();
  const SeedSpec seed{12, 0};
  for (auto kind : {MultiplierKind::gaussian(), MultiplierKind::mammen(), MultiplierKind::rademacher()}) {
    const auto w = draw_multipliers(kind, 12, seed);
    double best = -INFINITY;
    for (std::size_t j = 0; j < 3; ++j) {
      double z = 0;
      for (std::size_t i = 0; i < 12; ++i) z += w[i] * (data(i, j) - mean[j]);
      best = std::max(best, z / std::sqrt(12.0));
    }
    EXPECT_NEAR(bootstrap_stat_once(data, BootstrapPlan::wild(kind), MaxMode::OneSided, seed), best, 1e-12);
  }
}

TEST(Bootstrap, MixedUsesKnownMean) {
  Stream rng(SeedSpec{13, 0});
  std::vector<double> v(10 * 2);
  for (double& x : v) x = 2.0 + rng.normal();
  const DataMatrix data(10, 2, v, std::vector<double>{2.0, 2.0});
  const SeedSpec seed{14, 0};
  const auto w = draw_multipliers(MultiplierKind::mixed(0.5), 10, seed);
  double best = -INFINITY;
  for (std::size_t j = 0; j < 2; ++j) {
    double z = 0;
    for (std::size_t i = 0; i < 10; ++i) z += w[i] * (data(i, j) - 2.0);
    best = std::max(best, z / std::sqrt(10.0));
  }
  const BootstrapEngine engine(data, BootstrapPlan::mixed_wild(0.5), MaxMode::OneSided);
  EXPECT_FALSE(engine.sample_mean_fallback());
  EXPECT_NEAR(engine.draw(seed), best, 1e-12);

  const DataMatrix unknown(10, 2, v);
  const BootstrapEngine fallback(unknown, BootstrapPlan::mixed_wild(0.5), MaxMode::OneSided);
  EXPECT_TRUE(fallback.sample_mean_fallback());
}

// With every delta_i = 1 the mixed statistic coordinate is a0 sum Z_i X_ij / sqrt n:
// Gaussian with variance a0^2 avg_i X_ij^2.
TEST(Bootstrap, MixedGaussianBranchVariance) {
  const auto data = make_data(8, 2, 15);
  const auto [a0, b0] = MixedCoefficients::for_p0(0.5);
  const std::size_t b = 100000;
  std::vector<double> sums(2, 0.0), sq(2, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    auto c = draw_mixed_components(0.5, 8, SeedSpec{16, r});
    std::fill(c.delta.begin(), c.delta.end(), 1);
    const auto w = c.combine(0.5);
    for (std::size_t j = 0; j < 2; ++j) {
      double z = 0;
      for (std::size_t i = 0; i < 8; ++i) z += w[i] * data(i, j);
      z /= std::sqrt(8.0);
      sums[j] += z;
      sq[j] += z * z;
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    double s2 = 0;
    for (std::size_t i = 0; i < 8; ++i) s2 += data(i, j) * data(i, j);
    const double target = a0 * a0 * s2 / 8.0;
    EXPECT_NEAR(sq[j] / b, target, 4.0 * target * std::sqrt(2.0 / b));
    EXPECT_NEAR(sums[j] / b, 0.0, 4.0 * std::sqrt(target / b));
  }
}

TEST(Bootstrap, ThirdMomentMatchMonteCarlo) {
  // n = 4, p = 2 centred data; E* of the average third-order tensor of W_i x_i
  // is E W^3 times the data tensor.
  const DataMatrix raw(4, 2, {0.3, 1.2, -1.1, 0.4, 2.0, -0.9, -0.2, 2.5});
  const auto mean = raw.column_means();
  std::vector<double> xc(8);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) xc[i * 2 + j] = raw(i, j) - mean[j];
  for (auto kind : {MultiplierKind::mammen(), MultiplierKind::gaussian()}) {
    for (int m : {2, 3}) {
      // Entry (0, 1, [1]) of the tensor.
      double exact = 0;
      for (std::size_t i = 0; i < 4; ++i) exact += xc[i * 2] * std::pow(xc[i * 2 + 1], m - 1) / 4.0;
      exact *= multiplier_moment(kind, m);
      const std::size_t b = 100000;
      double s = 0, ss = 0;
      for (std::size_t r = 0; r < b; ++r) {
        const auto w = draw_multipliers(kind, 4, SeedSpec{17, r});
        double v = 0;
        for (std::size_t i = 0; i < 4; ++i) v += std::pow(w[i], m) * xc[i * 2] * std::pow(xc[i * 2 + 1], m - 1) / 4.0;
        s += v;
        ss += v * v;
      }
      const double mc = s / b;
      const double se = std::sqrt((ss / b - mc * mc) / b);
      EXPECT_NEAR(mc, exact, 4.0 * se) << int(kind.law) << " m " << m;
    }
  }
}

TEST(Bootstrap, DeterministicAcrossThreads) {
  const auto data = make_data(40, 25, 18);
  for (auto plan : {BootstrapPlan::empirical(300), BootstrapPlan::wild(MultiplierKind::gaussian(), 300),
                    BootstrapPlan::mixed_wild(0.5, 300)}) {
    const auto a = bootstrap_distribution(data, plan, MaxMode::OneSided, SeedSpec{19, 0}, 1);
    const auto b = bootstrap_distribution(data, plan, MaxMode::OneSided, SeedSpec{19, 0}, 4);
    const auto c = bootstrap_distribution(data, plan, MaxMode::OneSided, SeedSpec{19, 0}, 8);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
  }
}

TEST(Bootstrap, RejectsSingleRow) {
  const DataMatrix one(1, 2, {1.0, 2.0});
  EXPECT_THROW(bootstrap_stat_once(one, BootstrapPlan::empirical(), MaxMode::OneSided, SeedSpec{}), std::invalid_argument);
}
