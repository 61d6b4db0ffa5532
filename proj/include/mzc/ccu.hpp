#pragma once

// Coincidence counting unit: AND-gate pulse matching, per-bin singles and
// coincidence counters, and bunched-event (cluster) statistics.

#include <mzc/detection.hpp>
#include <mzc/source_model.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace mzc {

/// Coincidence when the two pulse intervals [t, t + width) intersect.
struct PulseOverlap {};

/// Coincidence when |tA - tB| <= window.
struct FixedWindow {
  double window = 10e-9; ///< s
};

using CoincidenceRule = std::variant<PulseOverlap, FixedWindow>;

struct CcuConfig {
  double accumulation = 0.1; ///< s per bin
  CoincidenceRule rule = PulseOverlap{};

  void validate() const {
    if (!(accumulation > 0.0)) throw std::invalid_argument("ccu: accumulation must be > 0");
    if (const auto *f = std::get_if<FixedWindow>(&rule); f && !(f->window > 0.0))
      throw std::invalid_argument("ccu: fixed coincidence window must be > 0");
  }
};

/// Full width of the coincidence acceptance in |tA - tB|, which sets the
/// accidental rate r1 * r2 * window.
inline double effective_window(const CcuConfig &cfg, double width_a, double width_b) {
  if (const auto *f = std::get_if<FixedWindow>(&cfg.rule)) return 2.0 * f->window;
  return width_a + width_b;
}

struct CountsRecord {
  std::size_t bin_index = 0;
  std::uint64_t singles_1 = 0;
  std::uint64_t singles_2 = 0;
  std::uint64_t coincidences = 0;

  bool operator==(const CountsRecord &) const = default;
};

using MatchedPair = std::pair<std::size_t, std::size_t>;

/// Greedy one-to-one matching: each pulse of A, in time order, takes the
/// earliest still-unmatched pulse of B that satisfies the rule.
inline std::vector<MatchedPair> match_coincidences(const PulseTrain &a, const PulseTrain &b,
                                                   const CcuConfig &cfg) {
  if (a.duration != b.duration)
    throw std::invalid_argument("count_coincidences: trains must have equal durations");
  cfg.validate();
  // `b_before(ta, tb)`: pulse b can no longer match a or any later pulse of A.
  // `a_before(ta, tb)`: pulse a can no longer match b or any later pulse of B.
  double lo = 0.0, hi = 0.0;
  if (const auto *f = std::get_if<FixedWindow>(&cfg.rule)) {
    lo = f->window;
    hi = f->window;
  }
  const bool overlap = std::holds_alternative<PulseOverlap>(cfg.rule);
  std::vector<MatchedPair> pairs;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double ta = a.starts[i], tb = b.starts[j];
    const bool b_before = overlap ? tb + b.width <= ta : tb < ta - lo;
    const bool a_before = overlap ? ta + a.width <= tb : tb > ta + hi;
    if (b_before) {
      ++j;
    } else if (a_before) {
      ++i;
    } else {
      pairs.emplace_back(i++, j++);
    }
  }
  return pairs;
}

inline std::uint64_t count_coincidences(const PulseTrain &a, const PulseTrain &b, const CcuConfig &cfg) {
  return match_coincidences(a, b, cfg).size();
}

/// Per-bin singles and coincidences. A matched pair is counted atomically in
/// the bin of its earlier pulse, so every record keeps coincidences <= singles.
inline std::vector<CountsRecord> accumulate(const PulseTrain &a, const PulseTrain &b,
                                            const CcuConfig &cfg) {
  const auto pairs = match_coincidences(a, b, cfg);
  const std::size_t n_bins = bin_count(a.duration, cfg.accumulation);
  std::vector<CountsRecord> rec(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) rec[k].bin_index = k;
  auto bin_of = [&](double t) {
    const auto k = static_cast<std::size_t>(t / cfg.accumulation);
    return k < n_bins ? k : n_bins - 1;
  };

  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  for (const auto &[ia, ib] : pairs) {
    used_a[ia] = used_b[ib] = true;
    auto &r = rec[bin_of(std::min(a.starts[ia], b.starts[ib]))];
    ++r.singles_1;
    ++r.singles_2;
    ++r.coincidences;
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!used_a[i]) ++rec[bin_of(a.starts[i])].singles_1;
  for (std::size_t j = 0; j < b.size(); ++j)
    if (!used_b[j]) ++rec[bin_of(b.starts[j])].singles_2;
  return rec;
}

/// Cluster-size histogram; a cluster is a run of pulses with successive gaps < window.
struct BunchStats {
  std::uint64_t singles = 0;
  std::uint64_t doubles = 0;
  std::uint64_t triples = 0;
  std::uint64_t higher = 0; ///< clusters of more than three pulses

  std::uint64_t clusters() const { return singles + doubles + triples + higher; }
  double double_to_single() const {
    return singles ? static_cast<double>(doubles) / static_cast<double>(singles) : 0.0;
  }
};

inline BunchStats bunched_event_stats(const std::vector<double> &starts, double window) {
  if (!(window > 0.0)) throw std::invalid_argument("bunched_event_stats: window must be > 0");
  BunchStats s;
  std::size_t run = 0;
  auto flush = [&] {
    switch (run) {
    case 0: break;
    case 1: ++s.singles; break;
    case 2: ++s.doubles; break;
    case 3: ++s.triples; break;
    default: ++s.higher;
    }
  };
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (i > 0 && starts[i] - starts[i - 1] < window) {
      ++run;
    } else {
      flush();
      run = 1;
    }
  }
  flush();
  return s;
}

inline BunchStats bunched_event_stats(const PulseTrain &train, double window) {
  return bunched_event_stats(train.starts, window);
}

} // namespace mzc
