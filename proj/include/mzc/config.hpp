#pragma once

// Full parameter tree for a run, with strict JSON (de)serialization.

#include <mzc/ccu.hpp>
#include <mzc/detection.hpp>
#include <mzc/error.hpp>
#include <mzc/interferometer.hpp>
#include <mzc/source_model.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace mzc {

inline constexpr double kDeskSinglesMax = 2e4;
inline constexpr double kPaperSinglesMax = 2e5;

/// Slow Gaussian drift of the MZI phase (air currents); off by default.
struct PhaseNoise {
  double rms = 0.0;               ///< rad
  double correlation_time = 1.0;  ///< s
};

struct Calibration {
  /// Target D1 maximum per accumulation bin. The input photon rate is scaled
  /// to reach it; 0 uses the physical rate of the attenuated source instead.
  double singles_max_per_bin = kDeskSinglesMax;
};

struct AnalysisOptions {
  std::optional<double> effective_window; ///< s; derived from the CCU rule when unset
  double outer_fraction = 0.1;
  int max_shift = 10;
  double cw_power = 10e-6;                ///< W, intensity scale of the cw mode
};

struct Config {
  SourceParams source;
  std::optional<double> mean_photon_window; ///< s; defaults to the coincidence window
  ScanConfig scan;
  double split_imbalance = 0.0;
  PhaseNoise phase_noise;
  std::array<DetectorParams, 2> detectors{};
  CoincidenceRule coincidence = PulseOverlap{};
  Calibration calibration;
  AnalysisOptions analysis;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  CcuConfig ccu() const { return {scan.accumulation, coincidence}; }

  double effective_window() const {
    if (analysis.effective_window) return *analysis.effective_window;
    return mzc::effective_window(ccu(), detectors[0].pulse_width, detectors[1].pulse_width);
  }

  double photon_window() const { return mean_photon_window.value_or(effective_window()); }

  void validate() const {
    try {
      source.validate();
      scan.validate();
      for (const auto &d : detectors) d.validate();
      ccu().validate();
    } catch (const std::invalid_argument &e) {
      throw ConfigError(e.what());
    }
    if (mean_photon_window && !(*mean_photon_window > 0.0))
      throw ConfigError("source: mean_photon_window_s must be > 0");
    if (!(std::abs(split_imbalance) < 1.0)) throw ConfigError("interferometer: |split_imbalance| must be < 1");
    if (!(phase_noise.rms >= 0.0 && phase_noise.correlation_time >= 0.0))
      throw ConfigError("interferometer: phase noise parameters must be >= 0");
    if (!(calibration.singles_max_per_bin >= 0.0))
      throw ConfigError("calibration: singles_max_per_bin must be >= 0");
    if (analysis.effective_window && !(*analysis.effective_window > 0.0))
      throw ConfigError("analysis: effective_window_s must be > 0");
    if (!(analysis.outer_fraction > 0.0 && analysis.outer_fraction <= 1.0))
      throw ConfigError("analysis: outer_fraction must lie in (0, 1]");
    if (analysis.max_shift < 0) throw ConfigError("analysis: max_shift must be >= 0");
    if (!(analysis.cw_power >= 0.0)) throw ConfigError("analysis: cw_power_w must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace config_detail {

using nlohmann::json;

/// Object reader that rejects keys it was not asked about.
class Reader {
public:
  Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto &[k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + "." + k + "'");
  }

  template <class T> void get(const char *key, T &out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception &) {
      throw ConfigError("invalid value for '" + path_ + "." + key + "'");
    }
  }

  template <class T> void get(const char *key, std::optional<T> &out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json *child(const char *key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string path(const char *key) const { return path_ + "." + key; }

private:
  const json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_detector(const json &j, const std::string &path, DetectorParams &d) {
  Reader r(j, path);
  r.get("efficiency", d.efficiency);
  r.get("dead_time_s", d.dead_time);
  r.get("dark_rate_hz", d.dark_rate);
  r.get("pulse_width_s", d.pulse_width);
  r.get("jitter_fwhm_s", d.jitter_fwhm);
}

inline json detector_json(const DetectorParams &d) {
  return {{"efficiency", d.efficiency},
          {"dead_time_s", d.dead_time},
          {"dark_rate_hz", d.dark_rate},
          {"pulse_width_s", d.pulse_width},
          {"jitter_fwhm_s", d.jitter_fwhm}};
}

inline json optional_json(const std::optional<double> &x) { return x ? json(*x) : json(nullptr); }

} // namespace config_detail

inline nlohmann::json config_to_json(const Config &c) {
  using config_detail::detector_json;
  using config_detail::optional_json;
  using nlohmann::json;
  json envelope;
  if (const auto *g = std::get_if<GaussianEnvelope>(&c.scan.envelope)) {
    envelope = {{"model", "gaussian"}, {"sigma_v", g->sigma}};
  } else {
    const auto &w = std::get<WalkOffEnvelope>(c.scan.envelope);
    envelope = {{"model", "walk_off"},
                {"tilt_per_volt_rad", w.tilt_per_volt},
                {"aperture_m", w.aperture},
                {"wavelength_m", w.wavelength}};
  }
  json coincidence;
  if (const auto *f = std::get_if<FixedWindow>(&c.coincidence))
    coincidence = {{"rule", "fixed_window"}, {"window_s", f->window}};
  else
    coincidence = {{"rule", "overlap"}};

  return {
      {"source",
       {{"wavelength_m", c.source.wavelength},
        {"power_w", c.source.power},
        {"linewidth_hz", c.source.linewidth},
        {"od_chain", c.source.od_chain},
        {"power_stability", c.source.power_stability},
        {"stability_correlation_s", c.source.stability_correlation},
        {"mean_photon_window_s", optional_json(c.mean_photon_window)}}},
      {"scan",
       {{"v_min", c.scan.v_min},
        {"v_max", c.scan.v_max},
        {"v_center", c.scan.v_center},
        {"fringes_per_scan", c.scan.fringes_per_scan},
        {"points_per_scan", c.scan.points_per_scan},
        {"accumulation_s", c.scan.accumulation},
        {"phase_offset_rad", c.scan.phase_offset},
        {"max_visibility", c.scan.max_visibility},
        {"envelope", envelope}}},
      {"interferometer",
       {{"split_imbalance", c.split_imbalance},
        {"phase_noise_rad", c.phase_noise.rms},
        {"phase_noise_correlation_s", c.phase_noise.correlation_time}}},
      {"detectors", json::array({detector_json(c.detectors[0]), detector_json(c.detectors[1])})},
      {"ccu", coincidence},
      {"calibration", {{"singles_max_per_bin", c.calibration.singles_max_per_bin}}},
      {"analysis",
       {{"effective_window_s", optional_json(c.analysis.effective_window)},
        {"outer_fraction", c.analysis.outer_fraction},
        {"max_shift", c.analysis.max_shift},
        {"cw_power_w", c.analysis.cw_power}}},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
  };
}

/// Parses a config tree on top of the defaults. Unknown keys are errors.
inline Config config_from_json(const nlohmann::json &j) {
  using config_detail::Reader;
  Config c;
  {
    Reader root(j, "config");
    if (const auto *s = root.child("source")) {
      Reader r(*s, "source");
      r.get("wavelength_m", c.source.wavelength);
      r.get("power_w", c.source.power);
      r.get("linewidth_hz", c.source.linewidth);
      r.get("od_chain", c.source.od_chain);
      r.get("power_stability", c.source.power_stability);
      r.get("stability_correlation_s", c.source.stability_correlation);
      r.get("mean_photon_window_s", c.mean_photon_window);
    }
    if (const auto *s = root.child("scan")) {
      Reader r(*s, "scan");
      r.get("v_min", c.scan.v_min);
      r.get("v_max", c.scan.v_max);
      r.get("v_center", c.scan.v_center);
      r.get("fringes_per_scan", c.scan.fringes_per_scan);
      r.get("points_per_scan", c.scan.points_per_scan);
      r.get("accumulation_s", c.scan.accumulation);
      r.get("phase_offset_rad", c.scan.phase_offset);
      r.get("max_visibility", c.scan.max_visibility);
      if (const auto *e = r.child("envelope")) {
        Reader er(*e, "scan.envelope");
        std::string model = "gaussian";
        er.get("model", model);
        if (model == "gaussian") {
          GaussianEnvelope g;
          er.get("sigma_v", g.sigma);
          c.scan.envelope = g;
        } else if (model == "walk_off") {
          WalkOffEnvelope w = walk_off_matching_gaussian(GaussianEnvelope{}.sigma);
          er.get("tilt_per_volt_rad", w.tilt_per_volt);
          er.get("aperture_m", w.aperture);
          er.get("wavelength_m", w.wavelength);
          c.scan.envelope = w;
        } else {
          throw ConfigError("scan.envelope.model must be 'gaussian' or 'walk_off'");
        }
      }
    }
    if (const auto *s = root.child("interferometer")) {
      Reader r(*s, "interferometer");
      r.get("split_imbalance", c.split_imbalance);
      r.get("phase_noise_rad", c.phase_noise.rms);
      r.get("phase_noise_correlation_s", c.phase_noise.correlation_time);
    }
    if (const auto *s = root.child("detectors")) {
      if (!s->is_array() || s->size() != 2) throw ConfigError("detectors: expected an array of two objects");
      config_detail::read_detector((*s)[0], "detectors[0]", c.detectors[0]);
      config_detail::read_detector((*s)[1], "detectors[1]", c.detectors[1]);
    }
    if (const auto *s = root.child("ccu")) {
      Reader r(*s, "ccu");
      std::string rule = "overlap";
      r.get("rule", rule);
      if (rule == "overlap") {
        c.coincidence = PulseOverlap{};
      } else if (rule == "fixed_window") {
        FixedWindow f;
        r.get("window_s", f.window);
        c.coincidence = f;
      } else {
        throw ConfigError("ccu.rule must be 'overlap' or 'fixed_window'");
      }
    }
    if (const auto *s = root.child("calibration")) {
      Reader r(*s, "calibration");
      r.get("singles_max_per_bin", c.calibration.singles_max_per_bin);
    }
    if (const auto *s = root.child("analysis")) {
      Reader r(*s, "analysis");
      r.get("effective_window_s", c.analysis.effective_window);
      r.get("outer_fraction", c.analysis.outer_fraction);
      r.get("max_shift", c.analysis.max_shift);
      r.get("cw_power_w", c.analysis.cw_power);
    }
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
  }
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

} // namespace mzc
