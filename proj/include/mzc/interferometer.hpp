#pragma once

// Mach-Zehnder interferometer: PZT voltage -> phase/tilt mapping, decoherence
// envelope, output-port probabilities, per-photon routing, camera images and
// the deterministic cw-intensity mode.

#include <mzc/random.hpp>
#include <mzc/source_model.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

namespace mzc {

/// Gaussian fringe-contrast envelope around the scan center.
struct GaussianEnvelope {
  double sigma = 25.0; ///< V
};

/// Spatial walk-off across a slit aperture: contrast |sin x / x| with
/// x = pi * tilt(v) * aperture / wavelength and tilt(v) = tilt_per_volt * (v - v_center).
struct WalkOffEnvelope {
  double tilt_per_volt = 0.0; ///< rad/V
  double aperture = 1e-3;     ///< m
  double wavelength = 532e-9; ///< m
};

using EnvelopeModel = std::variant<GaussianEnvelope, WalkOffEnvelope>;

/// Walk-off model whose small-tilt curvature equals a Gaussian of width `sigma`.
inline WalkOffEnvelope walk_off_matching_gaussian(double sigma, double aperture = 1e-3,
                                                  double wavelength = 532e-9) {
  return {std::sqrt(3.0) * wavelength / (std::numbers::pi * aperture * sigma), aperture, wavelength};
}

struct ScanConfig {
  double v_min = 0.0;
  double v_max = 150.0;
  double v_center = 75.0;
  double fringes_per_scan = 10.0;
  std::size_t points_per_scan = 2000;
  double accumulation = 0.1;  ///< s per point
  double phase_offset = 0.0;  ///< rad at v_center; 0 puts the dark port on A
  double max_visibility = 0.999;
  EnvelopeModel envelope = GaussianEnvelope{};

  void validate() const {
    if (!(v_min < v_center && v_center < v_max))
      throw std::invalid_argument("scan: require v_min < v_center < v_max");
    if (!(fringes_per_scan > 0.0)) throw std::invalid_argument("scan: fringes_per_scan must be > 0");
    if (points_per_scan < 2) throw std::invalid_argument("scan: points_per_scan must be >= 2");
    if (!(accumulation > 0.0)) throw std::invalid_argument("scan: accumulation must be > 0");
    if (!(max_visibility >= 0.0 && max_visibility <= 1.0))
      throw std::invalid_argument("scan: max_visibility must lie in [0, 1]");
    if (const auto *g = std::get_if<GaussianEnvelope>(&envelope); g && !(g->sigma > 0.0))
      throw std::invalid_argument("scan: gaussian envelope sigma must be > 0");
    if (const auto *w = std::get_if<WalkOffEnvelope>(&envelope);
        w && !(w->aperture > 0.0 && w->wavelength > 0.0))
      throw std::invalid_argument("scan: walk-off aperture and wavelength must be > 0");
  }

  double span() const { return v_max - v_min; }
  double step() const { return span() / static_cast<double>(points_per_scan); }
  /// Voltage of scan point i; the grid starts at v_min with spacing span/points.
  double voltage_at(std::size_t i) const { return v_min + static_cast<double>(i) * step(); }
  /// Fringe period in volts.
  double period() const { return span() / fringes_per_scan; }
};

inline void check_in_scan(double v, const ScanConfig &scan) {
  if (!(v >= scan.v_min && v <= scan.v_max))
    throw std::out_of_range("voltage outside scan range");
}

inline double voltage_to_phase(double v, const ScanConfig &scan) {
  check_in_scan(v, scan);
  return 2.0 * std::numbers::pi * scan.fringes_per_scan * (v - scan.v_center) / scan.span() +
         scan.phase_offset;
}

/// Sinc argument of the walk-off model at voltage v.
inline double walk_off_argument(double v, double v_center, const WalkOffEnvelope &w) {
  const double tilt = w.tilt_per_volt * (v - v_center);
  return std::numbers::pi * tilt * w.aperture / w.wavelength;
}

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

inline double envelope_visibility(double v, const ScanConfig &scan) {
  check_in_scan(v, scan);
  const double dv = v - scan.v_center;
  return std::visit(
      [&](const auto &env) -> double {
        using T = std::decay_t<decltype(env)>;
        if constexpr (std::is_same_v<T, GaussianEnvelope>) {
          return scan.max_visibility * std::exp(-dv * dv / (2.0 * env.sigma * env.sigma));
        } else {
          return scan.max_visibility * std::abs(sinc(walk_off_argument(v, scan.v_center, env)));
        }
      },
      scan.envelope);
}

struct MziState {
  double phase = 0.0;
  double visibility = 1.0;
  double split_imbalance = 0.0; ///< arm power (1 +/- e)/2 after the first splitter

  void validate() const {
    if (!(visibility >= 0.0 && visibility <= 1.0))
      throw std::invalid_argument("mzi state: visibility must lie in [0, 1]");
    if (!(std::abs(split_imbalance) < 1.0))
      throw std::invalid_argument("mzi state: |split_imbalance| must be < 1");
  }
};

struct OutputProbs {
  double a = 0.5;
  double b = 0.5;
};

/// Port probabilities. An arm imbalance e scales the fringe contrast by sqrt(1 - e^2).
inline OutputProbs mzi_output_probs(const MziState &s) {
  const double contrast = s.visibility * std::sqrt(1.0 - s.split_imbalance * s.split_imbalance);
  const double a = 0.5 * (1.0 - contrast * std::cos(s.phase));
  return {a, 1.0 - a};
}

/// Joint detection probability of one photon per port, p_A * p_B. At most 1/4,
/// the incoherent (classical reference) level.
inline double coincidence_prob_normalized(const MziState &s) {
  const auto p = mzi_output_probs(s);
  return p.a * p.b;
}

struct RoutedStreams {
  ArrivalStream a;
  ArrivalStream b;
};

/// Sends each arrival to port A with probability p_A(state(t)), otherwise to B.
template <class StateAt>
  requires std::is_invocable_r_v<MziState, StateAt, double>
RoutedStreams route_photons(const ArrivalStream &stream, StateAt &&state_at, std::uint64_t seed) {
  RoutedStreams out{{{}, stream.duration}, {{}, stream.duration}};
  Rng rng(seed);
  for (double t : stream.timestamps) {
    const double pa = mzi_output_probs(state_at(t)).a;
    (rng.uniform() < pa ? out.a : out.b).timestamps.push_back(t);
  }
  return out;
}

inline RoutedStreams route_photons(const ArrivalStream &stream, const MziState &state,
                                   std::uint64_t seed) {
  const double pa = mzi_output_probs(state).a;
  RoutedStreams out{{{}, stream.duration}, {{}, stream.duration}};
  out.a.timestamps.reserve(static_cast<std::size_t>(pa * stream.size() * 1.1) + 8);
  out.b.timestamps.reserve(static_cast<std::size_t>((1.0 - pa) * stream.size() * 1.1) + 8);
  Rng rng(seed);
  for (double t : stream.timestamps) (rng.uniform() < pa ? out.a : out.b).timestamps.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Camera images of one output port

struct ImageParams {
  std::size_t pixels_x = 200;
  std::size_t pixels_y = 200;
  double pixel_pitch = 10e-6; ///< m
  double beam_waist = 20e-3;  ///< 1/e^2 intensity radius, m; flat across a 1 mm aperture
  double tilt_per_volt = walk_off_matching_gaussian(25.0).tilt_per_volt;
  double wavelength = 532e-9;

  void validate() const {
    if (pixels_x == 0 || pixels_y == 0) throw std::invalid_argument("image: empty pixel grid");
    if (!(pixel_pitch > 0.0 && beam_waist > 0.0 && wavelength > 0.0))
      throw std::invalid_argument("image: pitch, waist and wavelength must be > 0");
  }

  /// Pixel-center coordinate; the grid is centered on the optical axis.
  double x_at(std::size_t i) const { return (static_cast<double>(i) - 0.5 * (pixels_x - 1.0)) * pixel_pitch; }
  double y_at(std::size_t j) const { return (static_cast<double>(j) - 0.5 * (pixels_y - 1.0)) * pixel_pitch; }
};

struct FringeImage {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> intensity; ///< row-major, index j * nx + i
  double pixel_pitch = 0.0;
  double beam_waist = 0.0;
  double spatial_frequency = 0.0; ///< rad/m along x

  double at(std::size_t i, std::size_t j) const { return intensity[j * nx + i]; }
};

/// I(x, y) = G(x, y) [1 + V cos(k x + phase)] for a tilt angle and MZI phase.
inline FringeImage render_fringe_image_at(double tilt, double phase, double visibility,
                                          const ImageParams &p) {
  p.validate();
  FringeImage img{p.pixels_x, p.pixels_y, std::vector<double>(p.pixels_x * p.pixels_y),
                  p.pixel_pitch, p.beam_waist, 2.0 * std::numbers::pi * tilt / p.wavelength};
  const double w2 = p.beam_waist * p.beam_waist;
  for (std::size_t j = 0; j < p.pixels_y; ++j) {
    const double y = p.y_at(j);
    for (std::size_t i = 0; i < p.pixels_x; ++i) {
      const double x = p.x_at(i);
      const double g = std::exp(-2.0 * (x * x + y * y) / w2);
      img.intensity[j * p.pixels_x + i] =
          g * (1.0 + visibility * std::cos(img.spatial_frequency * x + phase));
    }
  }
  return img;
}

inline FringeImage render_fringe_image(double v, const ScanConfig &scan, const ImageParams &p) {
  const double phase = voltage_to_phase(v, scan);
  return render_fringe_image_at(p.tilt_per_volt * (v - scan.v_center), phase, scan.max_visibility, p);
}

/// Sum of intensity over pixels with |x| < aperture/2.
inline double aperture_sum(const FringeImage &img, double aperture) {
  double s = 0.0;
  for (std::size_t j = 0; j < img.ny; ++j)
    for (std::size_t i = 0; i < img.nx; ++i) {
      const double x = (static_cast<double>(i) - 0.5 * (img.nx - 1.0)) * img.pixel_pitch;
      if (std::abs(x) < 0.5 * aperture) s += img.at(i, j);
    }
  return s;
}

/// Visibility a slit-aperture detector sees at voltage v, from the aperture
/// sums of the images at MZI phase 0 and pi.
inline double aperture_visibility(double v, const ScanConfig &scan, const ImageParams &p,
                                  double aperture) {
  check_in_scan(v, scan);
  const double tilt = p.tilt_per_volt * (v - scan.v_center);
  const double s0 = aperture_sum(render_fringe_image_at(tilt, 0.0, scan.max_visibility, p), aperture);
  const double s1 =
      aperture_sum(render_fringe_image_at(tilt, std::numbers::pi, scan.max_visibility, p), aperture);
  return std::abs(s0 - s1) / (s0 + s1);
}

// ---------------------------------------------------------------------------
// Deterministic cw intensities

struct CwFringes {
  std::vector<double> voltage;
  std::vector<double> phase;
  std::vector<double> visibility;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> product;
};

inline CwFringes cw_fringes(const ScanConfig &scan, double intensity, double split_imbalance = 0.0) {
  scan.validate();
  const std::size_t n = scan.points_per_scan;
  CwFringes out;
  for (auto *v : {&out.voltage, &out.phase, &out.visibility, &out.a, &out.b, &out.product}) v->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = scan.voltage_at(i);
    const MziState st{voltage_to_phase(v, scan), envelope_visibility(v, scan), split_imbalance};
    const auto p = mzi_output_probs(st);
    out.voltage[i] = v;
    out.phase[i] = st.phase;
    out.visibility[i] = st.visibility;
    out.a[i] = intensity * p.a;
    out.b[i] = intensity * p.b;
    out.product[i] = out.a[i] * out.b[i];
  }
  return out;
}

} // namespace mzc
