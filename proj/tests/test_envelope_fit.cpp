#include <mzc/envelope_fit.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

constexpr double pi = std::numbers::pi;

std::vector<double> grid(std::size_t n = 2000, double lo = 0.0, double hi = 150.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / n;
  return v;
}

std::vector<double> sample(const oracle::SyntheticFringe &f, const std::vector<double> &v) {
  std::vector<double> y;
  for (double x : v) y.push_back(f(x));
  return y;
}

} // namespace

TEST(EnvelopeFit, RecoversNoiselessParameters) {
  const auto v = grid();
  for (double phase : {0.0, 0.7, -2.0, pi}) {
    for (auto ch : {mzc::Channel::d1, mzc::Channel::d2}) {
      oracle::SyntheticFringe f;
      f.phase = phase;
      f.sign = mzc::channel_sign(ch);
      const auto r = mzc::fit_envelope(v, sample(f, v), ch);
      ASSERT_TRUE(r.converged) << r.message;
      EXPECT_NEAR(r.sigma, f.sigma, 1e-3 * f.sigma);
      EXPECT_NEAR(r.omega, f.omega, 1e-3 * f.omega);
      EXPECT_NEAR(r.max_visibility, f.visibility, 1e-3 * f.visibility);
      EXPECT_NEAR(r.center, f.center, 1e-3);
      EXPECT_NEAR(r.baseline, f.baseline, 1e-3 * f.baseline);
      EXPECT_NEAR(std::remainder(r.phase_offset - phase, 2 * pi), 0.0, 1e-3);
      EXPECT_LT(r.residual_norm, 1e-6);
    }
  }
}

TEST(EnvelopeFit, ModelMatchesIndependentGenerator) {
  oracle::SyntheticFringe f;
  f.phase = 0.3;
  for (double v : {0.0, 33.3, 75.0, 149.9})
    EXPECT_NEAR(mzc::envelope_model(v, f.baseline, f.visibility, f.center, f.sigma, f.omega, f.phase,
                                    mzc::Channel::d1),
                f(v), 1e-9);
}

TEST(EnvelopeFit, OffCenterAndPartialVisibility) {
  const auto v = grid();
  oracle::SyntheticFringe f;
  f.center = 60.0;
  f.sigma = 18.0;
  f.visibility = 0.6;
  f.omega = 2.0 * pi / 12.0;
  const auto r = mzc::fit_envelope(v, sample(f, v), mzc::Channel::d1);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.sigma, 18.0, 0.018);
  EXPECT_NEAR(r.omega, f.omega, 1e-3 * f.omega);
  EXPECT_NEAR(r.max_visibility, 0.6, 6e-4);
}

TEST(EnvelopeFit, PoissonNoiseAtBothCalibrationScales) {
  const auto v = grid();
  for (double baseline : {2e4, 2e5}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::mt19937_64 g(seed);
      oracle::SyntheticFringe f;
      f.baseline = baseline;
      auto y = sample(f, v);
      for (auto &x : y) x = static_cast<double>(std::poisson_distribution<long>(x)(g));
      const auto r = mzc::fit_envelope(v, y, mzc::Channel::d1);
      ASSERT_TRUE(r.converged) << r.message;
      EXPECT_NEAR(r.sigma, f.sigma, 0.02 * f.sigma);
      EXPECT_NEAR(r.omega, f.omega, 0.02 * f.omega);
      EXPECT_NEAR(r.max_visibility, f.visibility, 0.02 * f.visibility);
    }
  }
}

TEST(EnvelopeFit, FlatDataIsReportedAsFailureOrZeroVisibility) {
  const auto v = grid();
  const std::vector<double> y(v.size(), 1000.0);
  const auto r = mzc::fit_envelope(v, y, mzc::Channel::d1);
  EXPECT_TRUE(!r.converged || r.max_visibility < 1e-3) << r.message;
  EXPECT_FALSE(r.message.empty());
}

TEST(EnvelopeFit, ResultInvariants) {
  const auto v = grid();
  std::mt19937_64 g(8);
  oracle::SyntheticFringe f;
  f.baseline = 50.0;
  auto y = sample(f, v);
  for (auto &x : y) x = static_cast<double>(std::poisson_distribution<long>(x)(g));
  const auto r = mzc::fit_envelope(v, y, mzc::Channel::d1);
  EXPECT_GE(r.max_visibility, 0.0);
  EXPECT_LE(r.max_visibility, 1.0);
  EXPECT_GT(r.sigma, 0.0);
  EXPECT_GE(r.residual_norm, 0.0);
}

TEST(EnvelopeFit, RejectsUndersampledFringes) {
  const auto v = grid(100);
  oracle::SyntheticFringe f;
  f.omega = 2.0 * pi / 7.0;
  EXPECT_THROW(mzc::fit_envelope(v, sample(f, v), mzc::Channel::d1), std::invalid_argument);
  EXPECT_THROW(mzc::fit_envelope(grid(10), std::vector<double>(10, 1.0), mzc::Channel::d1), std::invalid_argument);
  EXPECT_THROW(mzc::fit_envelope(grid(), std::vector<double>(5, 1.0), mzc::Channel::d1), std::invalid_argument);
}
