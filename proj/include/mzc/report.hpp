#pragma once

// JSON report combining every fringe estimator.

#include <mzc/analysis.hpp>
#include <mzc/envelope_fit.hpp>

#include <nlohmann/json.hpp>

#include <numbers>
#include <stdexcept>
#include <string>

namespace mzc {

inline constexpr int kReportSchemaVersion = 1;

struct AnalyzeOptions {
  double effective_window = 20e-9;
  double outer_fraction = 0.1;
  int max_shift = 10;
};

inline nlohmann::json to_json_value(const FitResult &f) {
  return {{"converged", f.converged},
          {"message", f.message},
          {"iterations", f.iterations},
          {"max_visibility", f.max_visibility},
          {"sigma_v", f.sigma},
          {"omega_rad_per_v", f.omega},
          {"phase_offset_rad", f.phase_offset},
          {"center_v", f.center},
          {"baseline", f.baseline},
          {"residual_norm", f.residual_norm}};
}

inline nlohmann::json to_json_value(const G2Result &g) {
  return {{"g2", g.g2},
          {"uncertainty", g.uncertainty},
          {"g2_singles_product", g.g2_singles_product},
          {"uncertainty_singles_product", g.uncertainty_singles_product},
          {"singles_visibility", g.singles_visibility},
          {"effective_window_s", g.effective_window},
          {"coincidence_rate_hz", g.coincidence_rate},
          {"rate_1_hz", g.rate_1},
          {"rate_2_hz", g.rate_2},
          {"below_g2_bound", g.below_g2_bound},
          {"visibility_exceeds_bell", g.visibility_exceeds_bell}};
}

/// Fit that reports data it cannot handle as a failed result instead of throwing.
inline FitResult try_fit_envelope(std::span<const double> voltage, std::span<const double> counts, Channel ch) {
  try {
    return fit_envelope(voltage, counts, ch);
  } catch (const std::invalid_argument &e) {
    FitResult r;
    r.message = e.what();
    return r;
  }
}

struct AnalysisReport {
  nlohmann::json json;
  bool fits_converged = false;
};

/// Runs every estimator on one fringe. Visibility is read over one fringe
/// period around the fitted center (scan midpoint when the fit fails).
inline AnalysisReport analyze_fringe(const FringeData &fringe, const AnalyzeOptions &opt) {
  fringe.validate();
  if (fringe.empty()) throw std::invalid_argument("analyze: fringe has no points");
  const auto v = fringe.voltages();
  const auto d1 = fringe.d1();
  const auto d2 = fringe.d2();

  const FitResult fit1 = try_fit_envelope(v, d1, Channel::d1);
  const FitResult fit2 = try_fit_envelope(v, d2, Channel::d2);

  double center = 0.5 * (v.front() + v.back());
  double half_width = 0.05 * (v.back() - v.front());
  if (fit1.converged && fit1.omega > 0.0) {
    center = fit1.center;
    half_width = std::numbers::pi / fit1.omega;
  }
  const double vis1 = central_visibility(v, d1, center, half_width);
  const double vis2 = central_visibility(v, d2, center, half_width);

  const auto g2 = g2_zero(fringe, opt.effective_window);
  const auto pred = product_prediction(fringe);
  const auto ref = classical_reference(fringe, opt.outer_fraction);

  const int max_shift = std::min(opt.max_shift, static_cast<int>((fringe.size() - 1) / 4));
  const int shift = pixel_shift_align(d1, d2, max_shift);

  AnalysisReport out;
  out.fits_converged = fit1.converged && fit2.converged;
  out.json = {
      {"schema_version", kReportSchemaVersion},
      {"points", fringe.size()},
      {"accumulation_s", fringe.accumulation},
      {"visibility",
       {{"d1", vis1}, {"d2", vis2}, {"window_center_v", center}, {"window_half_width_v", half_width}}},
      {"g2", to_json_value(g2)},
      {"product_prediction",
       {{"scale", pred.scale}, {"residual_rms", pred.residual_rms}, {"relative_residual", pred.relative_residual}}},
      {"classical_reference",
       {{"level", ref.level},
        {"fraction_below", ref.fraction_below},
        {"reference_points", ref.reference_points},
        {"outer_fraction", opt.outer_fraction}}},
      {"fits", {{"d1", to_json_value(fit1)}, {"d2", to_json_value(fit2)}}},
      {"alignment", {{"shift", shift}, {"score", alignment_score(d1, d2, shift)}, {"max_shift", max_shift}}},
  };
  return out;
}

} // namespace mzc
