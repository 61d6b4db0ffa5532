#pragma once

// Single-photon counting modules: efficiency thinning, dark counts, timing
// jitter, non-paralyzable dead time and fixed-width output pulses.

#include <mzc/random.hpp>
#include <mzc/source_model.hpp>

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mzc {

struct DetectorParams {
  double efficiency = 0.5;
  double dead_time = 22e-9;    ///< s
  double dark_rate = 27.0;     ///< 1/s
  double pulse_width = 10e-9;  ///< s
  double jitter_fwhm = 350e-12; ///< s

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0))
      throw std::invalid_argument("detector: efficiency must lie in [0, 1]");
    if (!(dead_time >= 0.0)) throw std::invalid_argument("detector: dead_time must be >= 0");
    if (!(dark_rate >= 0.0)) throw std::invalid_argument("detector: dark_rate must be >= 0");
    if (!(pulse_width > 0.0)) throw std::invalid_argument("detector: pulse_width must be > 0");
    if (!(jitter_fwhm >= 0.0)) throw std::invalid_argument("detector: jitter_fwhm must be >= 0");
  }

  double jitter_sigma() const { return jitter_fwhm / 2.3548200450309493; }
};

/// Electrical output pulses of one detector channel.
struct PulseTrain {
  std::vector<double> starts;
  double width = 10e-9;
  double duration = 0.0;

  std::size_t size() const noexcept { return starts.size(); }
  bool empty() const noexcept { return starts.empty(); }

  bool valid(double min_gap = 0.0) const {
    for (std::size_t i = 0; i < starts.size(); ++i) {
      if (!(starts[i] >= 0.0 && starts[i] < duration)) return false;
      if (i > 0 && !(starts[i] - starts[i - 1] >= min_gap && starts[i] > starts[i - 1])) return false;
    }
    return true;
  }
};

namespace detail {

inline std::vector<double> greedy_dead_time(std::span<const double> times, double dead) {
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times)
    if (out.empty() || t - out.back() >= dead) out.push_back(t);
  return out;
}

} // namespace detail

/// Non-paralyzable dead time: accept t when t - last_accepted >= dead.
inline std::vector<double> dead_time_filter(std::span<const double> times, double dead) {
  if (!(dead >= 0.0)) throw std::invalid_argument("dead_time_filter: dead time must be >= 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i - 1] < times[i]))
      throw std::invalid_argument("dead_time_filter: input must be strictly increasing");
  return detail::greedy_dead_time(times, dead);
}

inline ArrivalStream dark_counts(double rate, double duration, std::uint64_t seed) {
  return sample_arrivals(rate, duration, seed);
}

/// thin by efficiency -> merge dark counts -> Gaussian jitter -> sort ->
/// dead time -> pulses. Events jittered outside [0, duration) are lost.
inline PulseTrain detect(const ArrivalStream &stream, const DetectorParams &p, std::uint64_t seed) {
  p.validate();
  Rng rng(derive_seed(seed, 0));
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(p.efficiency * stream.size() * 1.1) + 16);
  if (p.efficiency >= 1.0) {
    times = stream.timestamps;
  } else if (p.efficiency > 0.0) {
    for (double t : stream.timestamps)
      if (rng.bernoulli(p.efficiency)) times.push_back(t);
  }

  if (p.dark_rate > 0.0 && stream.duration > 0.0) {
    const auto dark = dark_counts(p.dark_rate, stream.duration, derive_seed(seed, 1));
    const auto mid = times.size();
    times.insert(times.end(), dark.timestamps.begin(), dark.timestamps.end());
    std::inplace_merge(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(mid), times.end());
  }

  const double sigma = p.jitter_sigma();
  if (sigma > 0.0) {
    Rng jitter(derive_seed(seed, 2));
    for (double &t : times) t += jitter.normal(0.0, sigma);
    std::sort(times.begin(), times.end());
    std::erase_if(times, [&](double t) { return t < 0.0 || t >= stream.duration; });
  }
  times.erase(std::unique(times.begin(), times.end()), times.end());

  return {detail::greedy_dead_time(times, p.dead_time), p.pulse_width, stream.duration};
}

} // namespace mzc
