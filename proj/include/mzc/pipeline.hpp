#pragma once

// End-to-end scan simulation: per scan point, arrivals -> MZI routing ->
// two detectors -> CCU accumulation. A pure function of (config, seed).

#include <mzc/analysis.hpp>
#include <mzc/ccu.hpp>
#include <mzc/config.hpp>
#include <mzc/detection.hpp>
#include <mzc/interferometer.hpp>
#include <mzc/random.hpp>
#include <mzc/source_model.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mzc {

/// Photon rate entering BS1. With a singles calibration, the rate that makes
/// D1 peak at `singles_max_per_bin` (dark counts and dead time included); otherwise the
/// physical rate of the attenuated source.
inline double input_photon_rate(const Config &c) {
  const double target = c.calibration.singles_max_per_bin;
  if (target <= 0.0) return photon_rate(attenuated_power(c.source), c.source.wavelength);
  const auto &d = c.detectors[0];
  const double t = c.scan.accumulation;
  const double contrast = c.scan.max_visibility * std::sqrt(1.0 - c.split_imbalance * c.split_imbalance);
  const double p_max = 0.5 * (1.0 + contrast);
  const double measured = target / t;
  if (!(measured * d.dead_time < 1.0)) throw ConfigError("calibration: singles_max_per_bin saturates detector 1");
  // Undo the non-paralyzable dead-time loss m = r / (1 + r * dead).
  const double signal = measured / (1.0 - measured * d.dead_time) - d.dark_rate;
  if (!(signal > 0.0)) throw ConfigError("calibration: singles_max_per_bin is below the dark-count level");
  if (!(d.efficiency > 0.0)) throw ConfigError("calibration: detector 1 efficiency is zero");
  return signal / (d.efficiency * p_max);
}

/// Slow fluctuations shared by every point of one scan, drawn serially so
/// any subset or ordering of points sees the same values.
struct ScanPlan {
  double base_rate = 0.0;
  std::vector<double> power_drift; ///< relative, per point
  std::vector<double> phase_drift; ///< rad, per point
};

inline ScanPlan plan_scan(const Config &c) {
  const std::size_t n = c.scan.points_per_scan;
  const double dt = c.scan.accumulation;
  return {input_photon_rate(c),
          ou_series(n, dt, c.source.power_stability, c.source.stability_correlation, derive_seed(c.seed, 100)),
          ou_series(n, dt, c.phase_noise.rms, c.phase_noise.correlation_time, derive_seed(c.seed, 101))};
}

struct ScanPoint {
  std::size_t index = 0;
  double voltage = 0.0;
  MziState state;
  double rate = 0.0; ///< photons/s into BS1
};

inline ScanPoint scan_point(const Config &c, const ScanPlan &plan, std::size_t i) {
  const double v = c.scan.voltage_at(i);
  const MziState st{voltage_to_phase(v, c.scan) + plan.phase_drift[i], envelope_visibility(v, c.scan),
                    c.split_imbalance};
  return {i, v, st, plan.base_rate * std::max(0.0, 1.0 + plan.power_drift[i])};
}

/// One accumulation bin at a fixed MZI state.
inline CountsRecord simulate_bin(const MziState &state, double rate, double accumulation,
                                 const DetectorParams &d1, const DetectorParams &d2,
                                 const CoincidenceRule &rule, std::uint64_t seed) {
  const auto photons = sample_arrivals(rate, accumulation, derive_seed(seed, 0));
  const auto routed = route_photons(photons, state, derive_seed(seed, 1));
  const auto a = detect(routed.a, d1, derive_seed(seed, 2));
  const auto b = detect(routed.b, d2, derive_seed(seed, 3));
  CountsRecord out;
  for (const auto &r : accumulate(a, b, {accumulation, rule})) {
    out.singles_1 += r.singles_1;
    out.singles_2 += r.singles_2;
    out.coincidences += r.coincidences;
  }
  return out;
}

inline FringePoint simulate_point(const Config &c, const ScanPlan &plan, std::size_t i) {
  const auto p = scan_point(c, plan, i);
  const auto r = simulate_bin(p.state, p.rate, c.scan.accumulation, c.detectors[0], c.detectors[1],
                              c.coincidence, derive_seed(c.seed, 1, i));
  return {i,
          p.voltage,
          p.state.phase,
          static_cast<double>(r.singles_1),
          static_cast<double>(r.singles_2),
          static_cast<double>(r.coincidences)};
}

/// Simulates points [first, last) of the scan on `threads` workers (0 = all
/// cores). Results do not depend on the thread count.
inline FringeData simulate_scan(const Config &c, std::size_t first = 0,
                                std::size_t last = static_cast<std::size_t>(-1), unsigned threads = 0) {
  c.validate();
  last = std::min(last, c.scan.points_per_scan);
  if (first > last) throw std::invalid_argument("simulate_scan: empty point range");
  const ScanPlan plan = plan_scan(c);

  FringeData out;
  out.accumulation = c.scan.accumulation;
  out.points.resize(last - first);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, last - first)));

  std::atomic<std::size_t> next{first};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < last;) out.points[i - first] = simulate_point(c, plan, i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = last;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Expected counts without shot noise, dark counts or dead time; coincidences
/// follow the accidental model d1 * d2 * tau / T.
inline FringeData analytic_scan(const Config &c) {
  c.validate();
  const double rate = input_photon_rate(c);
  const double t = c.scan.accumulation;
  const double tau = c.effective_window();
  FringeData out;
  out.accumulation = t;
  for (std::size_t i = 0; i < c.scan.points_per_scan; ++i) {
    const double v = c.scan.voltage_at(i);
    const MziState st{voltage_to_phase(v, c.scan), envelope_visibility(v, c.scan), c.split_imbalance};
    const auto p = mzi_output_probs(st);
    const double d1 = rate * c.detectors[0].efficiency * p.a * t;
    const double d2 = rate * c.detectors[1].efficiency * p.b * t;
    out.points.push_back({i, v, st.phase, d1, d2, d1 * d2 * tau / t});
  }
  return out;
}

} // namespace mzc
