#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "maxboot/rng.hpp"
#include "maxboot/stat_core.hpp"

using namespace maxboot;

namespace {

EmpiricalDistribution dist(std::vector<double> v) { return EmpiricalDistribution(std::move(v)); }

std::vector<double> iota_sample(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

// Naive counting CDFs for the oracles below.
double count_le(const std::vector<double>& v, double t) {
  return double(std::count_if(v.begin(), v.end(), [&](double x) { return x <= t; })) / v.size();
}
double count_lt(const std::vector<double>& v, double t) {
  return double(std::count_if(v.begin(), v.end(), [&](double x) { return x < t; })) / v.size();
}

std::vector<double> random_sample(Stream& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  for (double& x : v) x = ties ? double(rng.bounded(6)) : rng.normal();
  return v;
}

}  // namespace

TEST(EmpiricalDistribution, SortsAndRejects) {
  const auto d = dist({3, 1, 2});
  EXPECT_EQ(std::vector<double>(d.sample().begin(), d.sample().end()), (std::vector<double>{1, 2, 3}));
  EXPECT_DOUBLE_EQ(d.cdf(2.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.cdf_left(2.0), 1.0 / 3.0);
  EXPECT_THROW(dist({}), std::invalid_argument);
  EXPECT_THROW(dist({1.0, NAN}), std::invalid_argument);
}

TEST(MaxStatistic, HandCases) {
  const DataMatrix zeros(3, 2, std::vector<double>(6, 0.0));
  const std::vector<double> c0{0.0, 0.0};
  EXPECT_EQ(max_statistic(zeros, c0, MaxMode::OneSided), 0.0);
  EXPECT_EQ(max_statistic(zeros, c0, MaxMode::Absolute), 0.0);
  const DataMatrix one(1, 2, {3.0, -5.0});
  EXPECT_EQ(max_statistic(one, c0, MaxMode::OneSided), 3.0);
  EXPECT_EQ(max_statistic(one, c0, MaxMode::Absolute), 5.0);
  EXPECT_THROW(max_statistic(one, std::vector<double>{0.0}, MaxMode::OneSided), std::invalid_argument);
}

TEST(MaxStatistic, CenteringIdentity) {
  Stream rng(SeedSpec{3, 0});
  std::vector<double> v(40 * 5);
  for (double& x : v) x = rng.normal() * 3 + 1;
  const DataMatrix data(40, 5, v);
  const auto means = data.column_means();
  std::vector<double> centered(v.size());
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 5; ++j) centered[i * 5 + j] = v[i * 5 + j] - means[j];
  const DataMatrix cdata(40, 5, centered);
  const std::vector<double> zero(5, 0.0);
  for (auto mode : {MaxMode::OneSided, MaxMode::Absolute}) {
    EXPECT_NEAR(max_statistic(data, means, mode), max_statistic(cdata, zero, mode), 1e-12);
  }
}

TEST(SmoothMax, Examples) {
  const std::vector<double> one{2.5};
  EXPECT_EQ(smooth_max(one, 3.0), 2.5);
  const std::vector<double> eq(7, 1.25);
  EXPECT_NEAR(smooth_max(eq, 2.0), 1.25 + std::log(7.0) / 2.0, 1e-15);
  const std::vector<double> dom{0.0, -1000.0};
  const double f = smooth_max(dom, 1.0);
  EXPECT_TRUE(std::isfinite(f));
  EXPECT_NEAR(f, 0.0, 1e-12);
  const std::vector<double> big{1000.0, 999.0};
  EXPECT_NEAR(smooth_max(big, 1.0), 1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_THROW(smooth_max(std::vector<double>{}, 1.0), std::invalid_argument);
  EXPECT_THROW(smooth_max(one, 0.0), std::invalid_argument);
}

TEST(SmoothMax, SandwichProperty) {
  Stream rng(SeedSpec{4, 0});
  for (int t = 0; t < 10000; ++t) {
    const std::size_t p = 1 + rng.bounded(1000);
    const double beta = std::exp(-4.0 + 8.0 * rng.uniform());
    std::vector<double> z(p);
    for (double& v : z) v = 10.0 * rng.normal();
    const double gap = smooth_max(z, beta) - *std::max_element(z.begin(), z.end());
    ASSERT_GE(gap, -1e-12);
    ASSERT_LE(gap, std::log(double(p)) / beta + 1e-12);
  }
}

TEST(Softmax, Examples) {
  const auto w = softmax_weights(std::vector<double>(4, 0.3), 2.0);
  for (double v : w) EXPECT_NEAR(v, 0.25, 1e-16);
  const auto w2 = softmax_weights(std::vector<double>{1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(w2[0], e / (e + 1), 1e-15);
  EXPECT_NEAR(w2[1], 1 / (e + 1), 1e-15);
  EXPECT_NEAR(w2[0], 0.73106, 1e-5);
}

TEST(Softmax, SumsToOneAndIsGradient) {
  Stream rng(SeedSpec{5, 0});
  for (int t = 0; t < 200; ++t) {
    const std::size_t p = 1 + rng.bounded(60);
    std::vector<double> z(p);
    for (double& v : z) v = 5.0 * rng.normal();
    const auto w = softmax_weights(z, 0.7);
    double s = 0;
    for (double v : w) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
  std::vector<double> z(5);
  for (double& v : z) v = rng.normal();
  const auto w = softmax_weights(z, 2.0);
  const double h = 1e-6;
  for (std::size_t j = 0; j < 5; ++j) {
    auto up = z, dn = z;
    up[j] += h;
    dn[j] -= h;
    EXPECT_NEAR((smooth_max(up, 2.0) - smooth_max(dn, 2.0)) / (2 * h), w[j], 1e-6);
  }
}

TEST(UpperQuantile, Enumeration) {
  const auto d = dist(iota_sample(20));
  EXPECT_EQ(upper_quantile(d, 0.05), 19.0);
  EXPECT_EQ(upper_quantile(d, 0.5), 10.0);
  EXPECT_EQ(upper_quantile(dist({4.2}), 0.3), 4.2);
  EXPECT_THROW(upper_quantile(d, 0.0), std::invalid_argument);
  EXPECT_THROW(upper_quantile(d, 1.0), std::invalid_argument);
}

// The infimum definition evaluated by brute force over the sample values.
TEST(UpperQuantile, MatchesInfimumDefinition) {
  Stream rng(SeedSpec{6, 0});
  for (int t = 0; t < 200; ++t) {
    auto v = random_sample(rng, 1 + rng.bounded(50), t % 2 == 0);
    const auto d = dist(v);
    for (double alpha : {0.01, 0.05, 0.1, 0.25, 0.5, 0.9, 0.99}) {
      double best = INFINITY;
      for (double x : v) {
        const double exceed = double(std::count_if(v.begin(), v.end(), [&](double y) { return y > x; })) / v.size();
        if (exceed <= alpha + 1e-12) best = std::min(best, x);
      }
      ASSERT_EQ(upper_quantile(d, alpha), best) << "alpha " << alpha << " size " << v.size();
    }
  }
}

TEST(UpperQuantile, NonincreasingInAlpha) {
  Stream rng(SeedSpec{7, 0});
  const auto d = dist(random_sample(rng, 137, false));
  double prev = INFINITY;
  for (int k = 1; k <= 99; ++k) {
    const double q = upper_quantile(d, k / 100.0);
    EXPECT_LE(q, prev);
    prev = q;
  }
}

TEST(TwoSampleKs, Examples) {
  EXPECT_EQ(two_sample_ks(dist({1, 2, 3}), dist({3, 2, 1})), 0.0);
  EXPECT_EQ(two_sample_ks(dist({0, 0}), dist({1, 1})), 1.0);
  EXPECT_EQ(two_sample_ks(dist({1, 3}), dist({2, 4})), 0.5);
}

TEST(TwoSampleKs, MatchesBruteForceAndIsSymmetric) {
  Stream rng(SeedSpec{8, 0});
  for (int t = 0; t < 300; ++t) {
    const bool ties = t % 3 == 0;
    auto a = random_sample(rng, 1 + rng.bounded(40), ties);
    auto b = random_sample(rng, 1 + rng.bounded(40), ties);
    double ref = 0;
    for (const auto* s : {&a, &b})
      for (double x : *s) {
        ref = std::max(ref, std::abs(count_le(a, x) - count_le(b, x)));
        ref = std::max(ref, std::abs(count_lt(a, x) - count_lt(b, x)));
      }
    const double ks = two_sample_ks(dist(a), dist(b));
    ASSERT_NEAR(ks, ref, 1e-15);
    ASSERT_EQ(ks, two_sample_ks(dist(b), dist(a)));
    ASSERT_GE(ks, 0.0);
    ASSERT_LE(ks, 1.0);
  }
}

TEST(LevyProkhorov, Examples) {
  EXPECT_EQ(levy_prokhorov_pre(dist({0}), dist({0}), 0.1), 0.0);
  EXPECT_EQ(levy_prokhorov_pre(dist({0}), dist({1}), 0.5), 1.0);
  EXPECT_THROW(levy_prokhorov_pre(dist({0}), dist({1}), 0.0), std::invalid_argument);
}

TEST(LevyProkhorov, MatchesDenseScanBoundedByKsAndMonotone) {
  Stream rng(SeedSpec{9, 0});
  for (int t = 0; t < 100; ++t) {
    // Values on a 1/8 grid with eps a multiple of 1/16 keep the dense scan exact.
    auto a = std::vector<double>(1 + rng.bounded(15));
    auto b = std::vector<double>(1 + rng.bounded(15));
    for (double& x : a) x = double(rng.bounded(24)) / 8.0;
    for (double& x : b) x = double(rng.bounded(24)) / 8.0;
    const double eps = double(1 + rng.bounded(16)) / 16.0;
    double ref = 0;
    for (int k = -64; k <= 4 * 16 * 8; ++k) {
      const double s = k / 64.0;
      ref = std::max({ref, count_le(a, s - eps) - count_lt(b, s), count_le(b, s - eps) - count_lt(a, s)});
    }
    const auto da = dist(a), db = dist(b);
    const double lp = levy_prokhorov_pre(da, db, eps);
    ASSERT_NEAR(lp, ref, 1e-15);
    ASSERT_LE(lp, two_sample_ks(da, db) + 1e-15);
    ASSERT_LE(levy_prokhorov_pre(da, db, eps + 0.25), lp + 1e-15);
  }
}

TEST(Concentration, Examples) {
  EXPECT_EQ(concentration_fn(dist({0}), 0.3), 1.0);
  EXPECT_DOUBLE_EQ(concentration_fn(dist(iota_sample(100)), 0.5), 0.01);
  // Grid of spacing 1, eps = 2.5: (-0.25, 2.25) holds 0, 1 and 2.
  std::vector<double> grid(40);
  for (int k = 0; k < 40; ++k) grid[static_cast<std::size_t>(k)] = k;
  EXPECT_DOUBLE_EQ(concentration_fn(dist(grid), 2.5), 3.0 / 40.0);
  EXPECT_THROW(concentration_fn(dist({0}), -1.0), std::invalid_argument);
}

TEST(Concentration, MatchesOpenIntervalScan) {
  Stream rng(SeedSpec{10, 0});
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.bounded(30));
    for (double& x : v) x = double(rng.bounded(40)) / 8.0;
    const double eps = double(1 + rng.bounded(24)) / 16.0;
    double ref = 0;
    // Right endpoints on a 1/128 grid hit every distinct open-interval count.
    for (int k = 0; k <= 128 * 8; ++k) {
      const double right = k / 128.0 + 1.0 / 256.0;
      const double c = double(std::count_if(v.begin(), v.end(), [&](double x) { return right - eps < x && x < right; }));
      ref = std::max(ref, c / v.size());
    }
    ASSERT_DOUBLE_EQ(concentration_fn(dist(v), eps), ref) << "eps " << eps;
  }
}
