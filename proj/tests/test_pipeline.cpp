#include <mzc/pipeline.hpp>

#include <gtest/gtest.h>

#include <numeric>

namespace {

mzc::Config small_config(std::size_t points = 40) {
  mzc::Config c;
  c.scan.points_per_scan = points;
  c.scan.v_min = 67.5;
  c.scan.v_max = 67.5 + 0.075 * static_cast<double>(points);
  c.scan.v_center = 0.5 * (c.scan.v_min + c.scan.v_max);
  return c;
}

double total(const mzc::FringeData &f, double mzc::FringePoint::*field) {
  double s = 0.0;
  for (const auto &p : f.points) s += p.*field;
  return s;
}

} // namespace

TEST(Pipeline, SameSeedSameCounts) {
  const auto c = small_config();
  EXPECT_EQ(mzc::simulate_scan(c), mzc::simulate_scan(c));
  auto d = c;
  d.seed = 2;
  EXPECT_NE(mzc::simulate_scan(c), mzc::simulate_scan(d));
}

TEST(Pipeline, ThreadCountDoesNotChangeResults) {
  auto c = small_config();
  c.phase_noise.rms = 0.05;
  const auto one = mzc::simulate_scan(c, 0, c.scan.points_per_scan, 1);
  EXPECT_EQ(mzc::simulate_scan(c, 0, c.scan.points_per_scan, 3), one);
  EXPECT_EQ(mzc::simulate_scan(c, 0, c.scan.points_per_scan, 8), one);
}

TEST(Pipeline, SubsetIsASliceOfTheFullScan) {
  auto c = small_config();
  c.phase_noise.rms = 0.05;
  const auto full = mzc::simulate_scan(c);
  const auto part = mzc::simulate_scan(c, 10, 20);
  ASSERT_EQ(part.size(), 10u);
  for (std::size_t i = 0; i < part.size(); ++i) EXPECT_EQ(part.points[i], full.points[10 + i]);
}

TEST(Pipeline, PointsCarryVoltageAndPhase) {
  const auto c = small_config();
  const auto f = mzc::simulate_scan(c);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_EQ(f.points[i].bin_index, i);
    EXPECT_DOUBLE_EQ(f.points[i].voltage, c.scan.voltage_at(i));
    EXPECT_DOUBLE_EQ(f.points[i].phase, mzc::voltage_to_phase(c.scan.voltage_at(i), c.scan));
  }
}

TEST(Pipeline, NoInterferenceGivesUncorrelatedCoincidences) {
  auto c = small_config(200);
  c.scan.max_visibility = 0.0;
  const auto f = mzc::simulate_scan(c);
  const auto g = mzc::g2_zero(f, c.effective_window());
  EXPECT_NEAR(g.g2, 1.0, 5.0 * g.uncertainty);
  EXPECT_FALSE(g.below_g2_bound);
  EXPECT_FALSE(g.visibility_exceeds_bell);
}

TEST(Pipeline, HalvingAccumulationHalvesCounts) {
  auto c = small_config(200);
  c.calibration.singles_max_per_bin = 0.0; // fixed photon rate
  c.scan.accumulation = 1.0;
  const auto full = mzc::simulate_scan(c);
  c.scan.accumulation = 0.5;
  const auto half = mzc::simulate_scan(c);
  const double s_full = total(full, &mzc::FringePoint::counts_d1) + total(full, &mzc::FringePoint::counts_d2);
  const double s_half = total(half, &mzc::FringePoint::counts_d1) + total(half, &mzc::FringePoint::counts_d2);
  // Poisson sd of the ratio is about 0.4% at these totals.
  EXPECT_NEAR(s_half / s_full, 0.5, 0.01);
}

TEST(Pipeline, CalibrationPutsTheD1MaximumOnTarget) {
  mzc::Config c;
  const auto f = mzc::simulate_scan(c, 900, 1100);
  double hi = 0.0;
  for (const auto &p : f.points) hi = std::max(hi, p.counts_d1);
  EXPECT_NEAR(hi, c.calibration.singles_max_per_bin, 0.03 * c.calibration.singles_max_per_bin);
}

TEST(Pipeline, CalibrationRejectsUnreachableTargets) {
  mzc::Config c;
  c.calibration.singles_max_per_bin = 0.5; // below the dark-count level at 0.1 s
  EXPECT_THROW(mzc::input_photon_rate(c), mzc::ConfigError);
  c.calibration.singles_max_per_bin = 1e7; // beyond 1 / dead time
  EXPECT_THROW(mzc::input_photon_rate(c), mzc::ConfigError);
}

TEST(Pipeline, AnalyticScanFollowsRoutingProbabilities) {
  mzc::Config c;
  c.split_imbalance = 0.2;
  const auto f = mzc::analytic_scan(c);
  ASSERT_EQ(f.size(), c.scan.points_per_scan);
  const double rate = mzc::input_photon_rate(c);
  const double t = c.scan.accumulation;
  const double tau = c.effective_window();
  const double contrast_scale = std::sqrt(1.0 - 0.2 * 0.2);
  for (const auto &p : f.points) {
    const double vis = mzc::envelope_visibility(p.voltage, c.scan);
    const double pa = 0.5 * (1.0 - vis * contrast_scale * std::cos(p.phase));
    EXPECT_NEAR(p.counts_d1, rate * c.detectors[0].efficiency * pa * t, 1e-9 * rate * t);
    EXPECT_NEAR(p.counts_d2, rate * c.detectors[1].efficiency * (1.0 - pa) * t, 1e-9 * rate * t);
    EXPECT_NEAR(p.coincidences, p.counts_d1 * p.counts_d2 * tau / t, 1e-9 * (1.0 + p.coincidences));
  }
}

TEST(Pipeline, InvalidConfigThrowsBeforeSimulating) {
  auto c = small_config();
  c.detectors[1].efficiency = 2.0;
  EXPECT_THROW(mzc::simulate_scan(c), mzc::ConfigError);
}
