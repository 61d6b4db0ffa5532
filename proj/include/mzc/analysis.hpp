#pragma once

// Fringe and count analysis: visibility, zero-delay g2 with classical-bound
// verdicts, product-curve prediction, classical reference level, pixel-shift
// alignment and Poisson goodness of fit.

#include <mzc/ccu.hpp>
#include <mzc/source_model.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace mzc {

inline constexpr double kG2ClassicalBound = 0.5;
inline constexpr double kBellVisibilityBound = 0.70710678118654752; ///< 1/sqrt(2)

struct FringePoint {
  std::size_t bin_index = 0;
  double voltage = 0.0;
  double phase = 0.0;
  double counts_d1 = 0.0;
  double counts_d2 = 0.0;
  double coincidences = 0.0;

  bool operator==(const FringePoint &) const = default;
};

struct FringeData {
  std::vector<FringePoint> points;
  double accumulation = 0.1; ///< s per point

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  void validate() const {
    if (!(accumulation > 0.0)) throw std::invalid_argument("fringe: accumulation must be > 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto &p = points[i];
      if (!(p.counts_d1 >= 0.0 && p.counts_d2 >= 0.0 && p.coincidences >= 0.0))
        throw std::invalid_argument("fringe: counts must be >= 0");
      if (i > 0 && !(points[i - 1].voltage < p.voltage))
        throw std::invalid_argument("fringe: voltages must be strictly increasing");
    }
  }

  std::vector<double> voltages() const { return column(&FringePoint::voltage); }
  std::vector<double> d1() const { return column(&FringePoint::counts_d1); }
  std::vector<double> d2() const { return column(&FringePoint::counts_d2); }
  std::vector<double> coincidences() const { return column(&FringePoint::coincidences); }

  bool operator==(const FringeData &) const = default;

private:
  std::vector<double> column(double FringePoint::*m) const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto &p : points) out.push_back(p.*m);
    return out;
  }
};

// ---------------------------------------------------------------------------

/// Fringe contrast (max - min) / (max + min).
inline double visibility(double max_counts, double min_counts) {
  if (!(max_counts > 0.0)) throw std::domain_error("visibility: max counts must be > 0");
  if (!(min_counts >= 0.0 && max_counts >= min_counts))
    throw std::invalid_argument("visibility: require max >= min >= 0");
  return (max_counts - min_counts) / (max_counts + min_counts);
}

/// Contrast of one channel over the points with |v - center| <= half_width.
inline double central_visibility(std::span<const double> voltage, std::span<const double> counts,
                                 double center, double half_width) {
  double hi = -1.0, lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < voltage.size(); ++i) {
    if (std::abs(voltage[i] - center) > half_width) continue;
    hi = std::max(hi, counts[i]);
    lo = std::min(lo, counts[i]);
  }
  if (hi <= 0.0) return 0.0;
  return visibility(hi, lo);
}

// ---------------------------------------------------------------------------
// g2(0)

struct G2Result {
  /// Coincidences over the accidental level of an incoherent source carrying
  /// the same total flux, r_ref^2 * window with r_ref = (r1 + r2) / 2.
  double g2 = 0.0;
  double uncertainty = 0.0;
  /// Coincidences over the accidental level of the measured singles, r1 * r2 * window.
  double g2_singles_product = 0.0;
  double uncertainty_singles_product = 0.0;
  double singles_visibility = 0.0; ///< min over channels of (max - min)/(max + min) across bins
  double effective_window = 0.0;
  double coincidence_rate = 0.0; ///< 1/s
  double rate_1 = 0.0;
  double rate_2 = 0.0;
  bool below_g2_bound = false;          ///< g2 < 0.5
  bool visibility_exceeds_bell = false; ///< singles_visibility > 1/sqrt(2)
};

namespace detail {

inline G2Result g2_from_sums(double c, double s1, double s2, double n_bins, double bin_duration,
                             double window, double vis) {
  if (!(window > 0.0)) throw std::invalid_argument("g2_zero: effective window must be > 0");
  if (!(bin_duration > 0.0)) throw std::invalid_argument("g2_zero: bin duration must be > 0");
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw std::domain_error("g2_zero: zero singles in a channel");
  const double t = n_bins * bin_duration;
  G2Result r;
  r.effective_window = window;
  r.rate_1 = s1 / t;
  r.rate_2 = s2 / t;
  r.coincidence_rate = c / t;
  const double rel_singles = 1.0 / s1 + 1.0 / s2;
  // With zero coincidences the counting error is taken from a single count.
  const double c_err = std::max(c, 1.0);

  const double acc_product = r.rate_1 * r.rate_2 * window * t;
  r.g2_singles_product = c / acc_product;
  r.uncertainty_singles_product = c_err / acc_product * std::sqrt(1.0 / c_err + rel_singles);

  const double r_ref = 0.5 * (r.rate_1 + r.rate_2);
  const double acc_ref = r_ref * r_ref * window * t;
  r.g2 = c / acc_ref;
  r.uncertainty = c_err / acc_ref * std::sqrt(1.0 / c_err + 4.0 / (s1 + s2));

  r.singles_visibility = vis;
  r.below_g2_bound = r.g2 < kG2ClassicalBound;
  r.visibility_exceeds_bell = vis > kBellVisibilityBound;
  return r;
}

template <class Range, class F1, class F2>
double min_channel_visibility(const Range &recs, F1 f1, F2 f2) {
  double lo1 = std::numeric_limits<double>::infinity(), hi1 = 0.0;
  double lo2 = lo1, hi2 = 0.0;
  for (const auto &r : recs) {
    lo1 = std::min(lo1, f1(r));
    hi1 = std::max(hi1, f1(r));
    lo2 = std::min(lo2, f2(r));
    hi2 = std::max(hi2, f2(r));
  }
  if (!(hi1 > 0.0) || !(hi2 > 0.0)) return 0.0;
  return std::min(visibility(hi1, lo1), visibility(hi2, lo2));
}

} // namespace detail

/// Zero-delay intensity correlation from accumulation-bin records.
inline G2Result g2_zero(std::span<const CountsRecord> records, double bin_duration,
                        double effective_window) {
  if (records.empty()) throw std::invalid_argument("g2_zero: no records");
  double c = 0, s1 = 0, s2 = 0;
  for (const auto &r : records) {
    c += static_cast<double>(r.coincidences);
    s1 += static_cast<double>(r.singles_1);
    s2 += static_cast<double>(r.singles_2);
  }
  const double vis = detail::min_channel_visibility(
      records, [](const CountsRecord &r) { return static_cast<double>(r.singles_1); },
      [](const CountsRecord &r) { return static_cast<double>(r.singles_2); });
  return detail::g2_from_sums(c, s1, s2, static_cast<double>(records.size()), bin_duration,
                              effective_window, vis);
}

inline G2Result g2_zero(const FringeData &fringe, double effective_window) {
  if (fringe.empty()) throw std::invalid_argument("g2_zero: no records");
  double c = 0, s1 = 0, s2 = 0;
  for (const auto &p : fringe.points) {
    c += p.coincidences;
    s1 += p.counts_d1;
    s2 += p.counts_d2;
  }
  const double vis = detail::min_channel_visibility(
      fringe.points, [](const FringePoint &p) { return p.counts_d1; },
      [](const FringePoint &p) { return p.counts_d2; });
  return detail::g2_from_sums(c, s1, s2, static_cast<double>(fringe.size()), fringe.accumulation,
                              effective_window, vis);
}

// ---------------------------------------------------------------------------
// Product prediction and classical reference

struct ProductPrediction {
  std::vector<double> curve; ///< scale * d1 * d2
  double scale = 0.0;
  double residual_rms = 0.0;      ///< rms of (coincidences - curve)
  double relative_residual = 0.0; ///< ||coincidences - curve|| / ||coincidences||
};

inline ProductPrediction product_prediction(const FringeData &fringe) {
  if (fringe.empty()) throw std::invalid_argument("product_prediction: empty fringe");
  ProductPrediction out;
  out.curve.resize(fringe.size());
  double pc = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < fringe.size(); ++i) {
    const auto &p = fringe.points[i];
    const double prod = p.counts_d1 * p.counts_d2;
    pc += prod * p.coincidences;
    pp += prod * prod;
  }
  out.scale = pp > 0.0 ? pc / pp : 0.0;
  double rss = 0.0, css = 0.0;
  for (std::size_t i = 0; i < fringe.size(); ++i) {
    const auto &p = fringe.points[i];
    out.curve[i] = out.scale * p.counts_d1 * p.counts_d2;
    const double d = p.coincidences - out.curve[i];
    rss += d * d;
    css += p.coincidences * p.coincidences;
  }
  out.residual_rms = std::sqrt(rss / static_cast<double>(fringe.size()));
  out.relative_residual = css > 0.0 ? std::sqrt(rss / css) : 0.0;
  return out;
}

struct ClassicalReference {
  double level = 0.0;          ///< coincidences per bin
  double fraction_below = 0.0; ///< share of all points strictly below level
  std::size_t reference_points = 0;
};

/// Highest coincidence count among the incoherent scan ends, i.e. the points
/// whose voltage lies in the outer `outer_fraction` of the scanned range
/// (half of it at each end).
inline ClassicalReference classical_reference(const FringeData &fringe, double outer_fraction = 0.1) {
  if (fringe.empty()) throw std::invalid_argument("classical_reference: empty fringe");
  if (!(outer_fraction > 0.0 && outer_fraction <= 1.0))
    throw std::invalid_argument("classical_reference: outer fraction must lie in (0, 1]");
  const double v0 = fringe.points.front().voltage, v1 = fringe.points.back().voltage;
  const double edge = 0.5 * outer_fraction * (v1 - v0);
  ClassicalReference ref;
  ref.level = -1.0;
  for (const auto &p : fringe.points) {
    if (p.voltage <= v0 + edge || p.voltage >= v1 - edge) {
      ref.level = std::max(ref.level, p.coincidences);
      ++ref.reference_points;
    }
  }
  std::size_t below = 0;
  for (const auto &p : fringe.points) below += p.coincidences < ref.level;
  ref.fraction_below = static_cast<double>(below) / static_cast<double>(fringe.size());
  return ref;
}

// ---------------------------------------------------------------------------
// Pixel-shift alignment

/// Sequence moved right by `s` samples (d'[i] = d[i - s]); edges hold the end values.
inline std::vector<double> shift_by(int s, std::span<const double> d) {
  const auto n = static_cast<std::ptrdiff_t>(d.size());
  std::vector<double> out(d.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = d[std::clamp<std::ptrdiff_t>(i - s, 0, n - 1)];
  return out;
}

/// Normalized cross-correlation of d1[i + s] with the mirror complement of d2[i].
inline double alignment_score(std::span<const double> d1, std::span<const double> d2, int s) {
  const auto n = static_cast<std::ptrdiff_t>(d1.size());
  const auto [lo_it, hi_it] = std::minmax_element(d2.begin(), d2.end());
  const double mirror = *lo_it + *hi_it;
  const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -s);
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(n, n - s);
  const double m = static_cast<double>(end - begin);
  double ma = 0, mb = 0;
  for (auto i = begin; i < end; ++i) {
    ma += d1[i + s];
    mb += mirror - d2[i];
  }
  ma /= m;
  mb /= m;
  double sab = 0, saa = 0, sbb = 0;
  for (auto i = begin; i < end; ++i) {
    const double a = d1[i + s] - ma, b = (mirror - d2[i]) - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Integer offset of d1 relative to the anti-phase channel d2. Ties go to the
/// smaller |s|.
inline int pixel_shift_align(std::span<const double> d1, std::span<const double> d2, int max_shift) {
  if (d1.size() != d2.size()) throw std::invalid_argument("pixel_shift_align: length mismatch");
  if (max_shift < 0 || 4 * static_cast<std::size_t>(max_shift) >= d1.size())
    throw std::invalid_argument("pixel_shift_align: require 0 <= max_shift < length / 4");
  int best = 0;
  double best_score = alignment_score(d1, d2, 0);
  for (int mag = 1; mag <= max_shift; ++mag) {
    for (int s : {-mag, mag}) {
      const double sc = alignment_score(d1, d2, s);
      if (sc > best_score) {
        best_score = sc;
        best = s;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Poisson goodness of fit

struct GofResult {
  double chi_square = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t pooled_bins = 0;
};

/// Pearson chi-square of an occupancy histogram against Poisson(mean). Cells
/// are pooled from both ends until every expected count is >= 5; the upper
/// cell absorbs the whole tail.
inline GofResult poisson_gof(std::span<const std::uint64_t> histogram, double mean) {
  const double total = std::accumulate(histogram.begin(), histogram.end(), 0.0,
                                       [](double s, std::uint64_t h) { return s + static_cast<double>(h); });
  if (!(total > 0.0)) throw std::invalid_argument("poisson_gof: empty histogram");
  if (!(mean >= 0.0)) throw std::domain_error("poisson_gof: mean must be >= 0");

  // Cells 0..last-1 are exact occupancies, cell `last` holds n >= last.
  if (histogram.empty()) throw std::invalid_argument("poisson_gof: empty histogram");
  std::size_t last = histogram.size() - 1;
  auto upper_tail = [&](std::size_t from) {
    double cdf = 0.0;
    for (std::size_t n = 0; n < from; ++n) cdf += poisson_pmf(n, mean);
    return std::max(0.0, 1.0 - cdf);
  };
  while (total * upper_tail(last + 1) >= 5.0) ++last;
  std::vector<double> expected(last + 1), observed(last + 1, 0.0);
  for (std::size_t n = 0; n < last; ++n) expected[n] = total * poisson_pmf(n, mean);
  expected[last] = total * upper_tail(last);
  for (std::size_t n = 0; n < histogram.size(); ++n)
    observed[std::min(n, last)] += static_cast<double>(histogram[n]);

  // Pool small cells.
  struct Cell { double o, e; };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < expected.size(); ++i) cells.push_back({observed[i], expected[i]});
  auto pool_from_back = [&] {
    while (cells.size() > 1 && cells.back().e < 5.0) {
      const Cell last = cells.back();
      cells.pop_back();
      cells.back().o += last.o;
      cells.back().e += last.e;
    }
  };
  pool_from_back();
  while (cells.size() > 1 && cells.front().e < 5.0) {
    cells[1].o += cells[0].o;
    cells[1].e += cells[0].e;
    cells.erase(cells.begin());
  }
  pool_from_back();
  if (cells.size() < 2) throw std::domain_error("poisson_gof: all mass in a single pooled cell");

  GofResult r;
  r.pooled_bins = cells.size();
  for (const auto &c : cells) r.chi_square += (c.o - c.e) * (c.o - c.e) / c.e;
  r.dof = cells.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(r.dof));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.chi_square));
  return r;
}

} // namespace mzc
