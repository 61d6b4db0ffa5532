#include <mzc/random.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

TEST(Random, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 0; stream < 8; ++stream)
    for (std::uint64_t i = 0; i < 256; ++i) seen.insert(mzc::derive_seed(42, stream, i));
  EXPECT_EQ(seen.size(), 8u * 256u);
  EXPECT_EQ(mzc::derive_seed(42, 3, 7), mzc::derive_seed(42, 3, 7));
  EXPECT_NE(mzc::derive_seed(42, 3, 7), mzc::derive_seed(43, 3, 7));
}

TEST(Random, UniformStaysInsideOpenInterval) {
  mzc::Rng rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Random, ExponentialMeanMatchesRate) {
  mzc::Rng rng(2);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.exponential(4.0);
  EXPECT_NEAR(sum / n, 0.25, 5.0 * 0.25 / std::sqrt(n));
}

TEST(Random, OrnsteinUhlenbeckHasRequestedSpreadAndCorrelation) {
  const double sigma = 0.01, tau = 1.0, dt = 0.1;
  const auto x = mzc::ou_series(200000, dt, sigma, tau, 9);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    var += (x[i] - mean) * (x[i] - mean);
    if (i > 0) cov += (x[i] - mean) * (x[i - 1] - mean);
  }
  var /= x.size();
  cov /= x.size() - 1;
  EXPECT_NEAR(std::sqrt(var), sigma, 0.05 * sigma);
  EXPECT_NEAR(cov / var, std::exp(-dt / tau), 0.02);
}

TEST(Random, OrnsteinUhlenbeckWithZeroSpreadIsZero) {
  for (double v : mzc::ou_series(100, 0.1, 0.0, 1.0, 3)) EXPECT_EQ(v, 0.0);
}
