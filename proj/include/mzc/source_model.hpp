#pragma once

// Attenuated coherent source: power/attenuation arithmetic, Poisson photon
// statistics and arrival-stream generation.

#include <mzc/random.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mzc {

namespace constants {
inline constexpr double planck = 6.62607015e-34;      ///< J s (CODATA 2018, exact)
inline constexpr double speed_of_light = 299792458.0; ///< m/s (exact)
} // namespace constants

struct SourceParams {
  double wavelength = 532e-9;         ///< m
  double power = 10e-3;               ///< W, before the attenuation chain
  double linewidth = 5e6;             ///< Hz
  std::vector<double> od_chain{3.0, 10.0};
  double power_stability = 0.01;      ///< relative rms of slow intensity drift
  double stability_correlation = 1.0; ///< s

  void validate() const {
    if (!(wavelength > 0.0)) throw std::invalid_argument("source: wavelength must be > 0");
    if (!(power >= 0.0)) throw std::invalid_argument("source: power must be >= 0");
    if (!(linewidth > 0.0)) throw std::invalid_argument("source: linewidth must be > 0");
    for (double od : od_chain)
      if (!(od >= 0.0)) throw std::invalid_argument("source: optical densities must be >= 0");
    if (!(power_stability >= 0.0 && power_stability < 1.0))
      throw std::invalid_argument("source: power_stability must lie in [0, 1)");
    if (!(stability_correlation >= 0.0))
      throw std::invalid_argument("source: stability correlation time must be >= 0");
  }

  double od_total() const { return std::accumulate(od_chain.begin(), od_chain.end(), 0.0); }
  double coherence_time() const { return 1.0 / linewidth; }
  double coherence_length() const { return constants::speed_of_light / linewidth; }
};

/// Power after an optical-density stack: p * 10^-od.
inline double attenuate(double power, double od_total) {
  if (!(power >= 0.0)) throw std::invalid_argument("attenuate: power must be >= 0");
  if (!(od_total >= 0.0)) throw std::invalid_argument("attenuate: optical density must be >= 0");
  return power * std::pow(10.0, -od_total);
}

inline double attenuated_power(const SourceParams &src) { return attenuate(src.power, src.od_total()); }

/// Photon flux (1/s) carried by `power` at `wavelength`.
inline double photon_rate(double power, double wavelength) {
  if (!(wavelength > 0.0)) throw std::domain_error("photon_rate: wavelength must be > 0");
  if (!(power >= 0.0)) throw std::invalid_argument("photon_rate: power must be >= 0");
  return power * wavelength / (constants::planck * constants::speed_of_light);
}

/// e^-mean mean^n / n!, evaluated in log space.
inline double poisson_pmf(std::uint64_t n, double mean) {
  if (!(mean >= 0.0)) throw std::domain_error("poisson_pmf: mean must be >= 0");
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  const double k = static_cast<double>(n);
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

/// Mean photon number over an explicit reference window.
struct PoissonModel {
  double mean_photon_number = 0.04;
  double window = 1.0; ///< s

  static PoissonModel from_rate(double rate, double window) { return {rate * window, window}; }

  void validate() const {
    if (!(mean_photon_number >= 0.0)) throw std::invalid_argument("poisson model: mean must be >= 0");
    if (!(window > 0.0)) throw std::invalid_argument("poisson model: window must be > 0");
  }

  double rate() const { return mean_photon_number / window; }
  double pmf(std::uint64_t n) const { return poisson_pmf(n, mean_photon_number); }
};

/// Time-ordered arrivals on [0, duration).
struct ArrivalStream {
  std::vector<double> timestamps;
  double duration = 0.0;

  std::size_t size() const noexcept { return timestamps.size(); }
  bool empty() const noexcept { return timestamps.empty(); }

  bool valid() const {
    if (!(duration >= 0.0)) return false;
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
      const double t = timestamps[i];
      if (!(t >= 0.0 && t < duration)) return false;
      if (i > 0 && !(timestamps[i - 1] < t)) return false;
    }
    return true;
  }
};

/// Homogeneous Poisson process with exponential gaps.
inline ArrivalStream sample_arrivals(double rate, double duration, std::uint64_t seed) {
  if (!(rate >= 0.0)) throw std::invalid_argument("sample_arrivals: rate must be >= 0");
  if (!(duration > 0.0)) throw std::invalid_argument("sample_arrivals: duration must be > 0");
  ArrivalStream out{{}, duration};
  if (rate == 0.0) return out;
  out.timestamps.reserve(static_cast<std::size_t>(rate * duration * 1.05 + 16.0));
  Rng rng(seed);
  double t = rng.exponential(rate);
  while (t < duration) {
    if (!out.timestamps.empty() && !(t > out.timestamps.back()))
      t = std::nextafter(out.timestamps.back(), std::numeric_limits<double>::infinity());
    if (t >= duration) break;
    out.timestamps.push_back(t);
    t += rng.exponential(rate);
  }
  return out;
}

/// Number of bins of width `bin_width` needed to cover `duration`.
inline std::size_t bin_count(double duration, double bin_width) {
  const double n = std::ceil(duration / bin_width * (1.0 - 1e-12));
  return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

/// Occupancy histogram: `bins_with[n]` is the number of bins holding exactly n arrivals.
struct OccupancyHistogram {
  std::vector<std::uint64_t> bins_with;
  std::size_t n_bins = 0;
  double bin_width = 0.0;

  std::uint64_t total_arrivals() const {
    std::uint64_t s = 0;
    for (std::size_t n = 0; n < bins_with.size(); ++n) s += n * bins_with[n];
    return s;
  }
};

inline std::vector<std::uint32_t> counts_per_bin(const ArrivalStream &stream, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin_counts: bin width must be > 0");
  const std::size_t n_bins = bin_count(stream.duration, bin_width);
  std::vector<std::uint32_t> per_bin(n_bins, 0);
  for (double t : stream.timestamps) {
    auto k = static_cast<std::size_t>(t / bin_width);
    ++per_bin[k < n_bins ? k : n_bins - 1];
  }
  return per_bin;
}

inline OccupancyHistogram bin_counts(const ArrivalStream &stream, double bin_width) {
  const auto per_bin = counts_per_bin(stream, bin_width);
  OccupancyHistogram h{{}, per_bin.size(), bin_width};
  h.bins_with.assign(1, 0);
  for (auto c : per_bin) {
    if (c >= h.bins_with.size()) h.bins_with.resize(c + 1, 0);
    ++h.bins_with[c];
  }
  return h;
}

} // namespace mzc
