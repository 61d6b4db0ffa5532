#pragma once

// Least-squares fit of a Gaussian-enveloped fringe,
//   counts(v) = B/2 * [1 + s * V * exp(-(v - v0)^2 / (2 sigma^2)) * cos(omega v + delta)],
// with s = -1 for D1 (port A, dark at zero phase) and s = +1 for D2.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mzc {

enum class Channel { d1, d2 };

inline double channel_sign(Channel c) { return c == Channel::d1 ? -1.0 : 1.0; }

struct FitResult {
  bool converged = false;
  std::string message;
  int iterations = 0;
  double max_visibility = 0.0;
  double sigma = 0.0;        ///< V
  double omega = 0.0;        ///< rad/V
  double phase_offset = 0.0; ///< delta in cos(omega v + delta), wrapped to (-pi, pi]
  double center = 0.0;       ///< v0, V
  double baseline = 0.0;     ///< B, counts
  double residual_norm = 0.0;
};

struct FitOptions {
  int max_iterations = 500;
  double tolerance = 1e-13; ///< relative cost change that counts as converged
};

inline double wrap_phase(double x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x, two_pi);
  if (x <= -std::numbers::pi) x += two_pi;
  if (x > std::numbers::pi) x -= two_pi;
  return x;
}

/// Generating model, also used by tests to synthesize data.
inline double envelope_model(double v, double baseline, double max_visibility, double center,
                             double sigma, double omega, double phase_offset, Channel ch) {
  const double u = v - center;
  return 0.5 * baseline *
         (1.0 + channel_sign(ch) * max_visibility * std::exp(-u * u / (2.0 * sigma * sigma)) *
                    std::cos(omega * v + phase_offset));
}

namespace fit_detail {

inline bool uniform_grid(std::span<const double> v) {
  if (v.size() < 3) return true;
  const double dv = (v.back() - v.front()) / static_cast<double>(v.size() - 1);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (std::abs(v[i] - (v.front() + static_cast<double>(i) * dv)) > 1e-6 * std::abs(dv))
      return false;
  return true;
}

inline double periodogram(std::span<const double> v, std::span<const double> d, double omega,
                          bool uniform = false) {
  std::complex<double> acc{0.0, 0.0};
  if (uniform && v.size() > 1) {
    // Phasor recurrence; renormalized periodically to bound drift.
    const double dv = (v.back() - v.front()) / static_cast<double>(v.size() - 1);
    const std::complex<double> step = std::polar(1.0, -omega * dv);
    for (std::size_t i = 0; i < v.size(); i += 256) {
      std::complex<double> z = std::polar(1.0, -omega * (v.front() + static_cast<double>(i) * dv));
      const std::size_t end = std::min(v.size(), i + 256);
      for (std::size_t k = i; k < end; ++k, z *= step) acc += d[k] * z;
    }
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) acc += d[i] * std::polar(1.0, -omega * v[i]);
  }
  return std::norm(acc);
}

/// Dominant nonzero angular frequency of (y - mean), grid scan then golden-section refinement.
inline double dominant_frequency(std::span<const double> v, std::span<const double> y) {
  const std::size_t n = v.size();
  double mean = 0.0;
  for (double x : y) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = y[i] - mean;

  const double range = v.back() - v.front();
  const double dv = range / static_cast<double>(n - 1);
  const bool uniform = uniform_grid(v);
  const double step = 2.0 * std::numbers::pi / (8.0 * range);
  const double lo = 2.0 * std::numbers::pi * 1.5 / range;
  const double hi = std::numbers::pi / dv;
  double best = 0.0, best_p = 0.0;
  for (double w = lo; w <= hi; w += step) {
    const double p = periodogram(v, d, w, uniform);
    if (p > best_p) {
      best_p = p;
      best = w;
    }
  }
  if (!(best_p > 0.0)) return 0.0;

  double a = best - step, b = best + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), e = a + g * (b - a);
  double pc = periodogram(v, d, c, uniform), pe = periodogram(v, d, e, uniform);
  for (int it = 0; it < 60; ++it) {
    if (pc > pe) {
      b = e; e = c; pe = pc;
      c = b - g * (b - a); pc = periodogram(v, d, c, uniform);
    } else {
      a = c; c = e; pc = pe;
      e = a + g * (b - a); pe = periodogram(v, d, e, uniform);
    }
  }
  return 0.5 * (a + b);
}

struct Params {
  double baseline, vis, center, sigma, omega, phase; // phase referenced to the center
};

inline Eigen::Matrix<double, 6, 1> to_vec(const Params &p) {
  Eigen::Matrix<double, 6, 1> x;
  x << p.baseline, p.vis, p.center, p.sigma, p.omega, p.phase;
  return x;
}

inline Params from_vec(const Eigen::Matrix<double, 6, 1> &x) {
  Params p{x[0], x[1], x[2], std::abs(x[3]), x[4], x[5]};
  if (p.vis < 0.0) {
    p.vis = -p.vis;
    p.phase += std::numbers::pi;
  }
  p.vis = std::min(p.vis, 1.0);
  return p;
}

} // namespace fit_detail

/// Fits one channel of a fringe scan. Voltages must be increasing and sample
/// at least 8 points per fringe period.
inline FitResult fit_envelope(std::span<const double> voltage, std::span<const double> counts,
                              Channel ch, const FitOptions &opt = {}) {
  using namespace fit_detail;
  if (voltage.size() != counts.size()) throw std::invalid_argument("fit_envelope: length mismatch");
  const std::size_t n = voltage.size();
  FitResult res;
  if (n < 16) throw std::invalid_argument("fit_envelope: too few points");
  const double s = channel_sign(ch);

  const double omega0 = dominant_frequency(voltage, counts);
  if (!(omega0 > 0.0)) {
    res.message = "no fringe component in data";
    return res;
  }
  const double dv = (voltage.back() - voltage.front()) / static_cast<double>(n - 1);
  const double period = 2.0 * std::numbers::pi / omega0;
  if (period / dv < 8.0) throw std::invalid_argument("fit_envelope: fewer than 8 points per fringe period");

  // Local contrast over one-period windows.
  const auto win = static_cast<std::size_t>(std::lround(period / dv));
  const std::size_t half = win / 2;
  std::vector<double> contrast(n, 0.0);
  for (std::size_t j = half; j + half < n; ++j) {
    const auto [lo_it, hi_it] = std::minmax_element(counts.begin() + (j - half), counts.begin() + (j + half + 1));
    const double sum = *hi_it + *lo_it;
    contrast[j] = sum > 0.0 ? (*hi_it - *lo_it) / sum : 0.0;
  }
  const auto jmax = static_cast<std::size_t>(std::max_element(contrast.begin(), contrast.end()) - contrast.begin());
  const double cmax = contrast[jmax];
  std::size_t left = jmax, right = jmax;
  while (left > half && contrast[left] >= 0.5 * cmax) --left;
  while (right + half + 1 < n && contrast[right] >= 0.5 * cmax) ++right;
  const bool left_found = contrast[left] < 0.5 * cmax;
  const bool right_found = contrast[right] < 0.5 * cmax;
  double num = 0.0, den = 0.0;
  for (std::size_t j = left; j <= right; ++j) {
    num += contrast[j] * voltage[j];
    den += contrast[j];
  }
  const double center0 = den > 0.0 ? num / den : voltage[jmax];
  double fwhm = voltage.back() - voltage.front();
  if (left_found && right_found) fwhm = voltage[right] - voltage[left];
  else if (left_found) fwhm = 2.0 * (center0 - voltage[left]);
  else if (right_found) fwhm = 2.0 * (voltage[right] - center0);
  const double sigma0 = std::max(fwhm / 2.3548200450309493, 2.0 * dv);

  // Linear solve for offset and quadrature amplitudes at fixed (omega, center, sigma).
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = voltage[i] - center0;
    const double e = std::exp(-u * u / (2.0 * sigma0 * sigma0));
    a(i, 0) = 1.0;
    a(i, 1) = e * std::cos(omega0 * u);
    a(i, 2) = e * std::sin(omega0 * u);
    b[i] = counts[i];
  }
  const Eigen::Vector3d lin = a.colPivHouseholderQr().solve(b);
  Params p{2.0 * lin[0], 0.0, center0, sigma0, omega0, std::atan2(-s * lin[2], s * lin[1])};
  if (!(p.baseline > 0.0)) {
    res.message = "non-positive baseline";
    return res;
  }
  p.vis = std::min(1.0, 2.0 * std::hypot(lin[1], lin[2]) / p.baseline);

  // Levenberg-Marquardt on Poisson-weighted residuals.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (std::max(counts[i], 0.0) + 1.0);

  auto evaluate = [&](const Params &q, Eigen::VectorXd &r, Eigen::Matrix<double, Eigen::Dynamic, 6> *jac) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = voltage[i] - q.center;
      const double e = std::exp(-u * u / (2.0 * q.sigma * q.sigma));
      const double arg = q.omega * u + q.phase;
      const double c = std::cos(arg), sn = std::sin(arg);
      const double f = 0.5 * q.baseline * (1.0 + s * q.vis * e * c);
      const double sw = std::sqrt(w[i]);
      r[i] = sw * (counts[i] - f);
      cost += r[i] * r[i];
      if (jac) {
        const double k = 0.5 * q.baseline * s * q.vis * e;
        auto row = jac->row(static_cast<Eigen::Index>(i));
        row[0] = 0.5 * (1.0 + s * q.vis * e * c);
        row[1] = 0.5 * q.baseline * s * e * c;
        row[2] = k * (u / (q.sigma * q.sigma) * c + q.omega * sn);
        row[3] = k * (u * u / (q.sigma * q.sigma * q.sigma)) * c;
        row[4] = -k * sn * u;
        row[5] = -k * sn;
        row *= sw;
      }
    }
    return cost;
  };

  Eigen::VectorXd r(n), r_try(n);
  Eigen::Matrix<double, Eigen::Dynamic, 6> jac(n, 6);
  double cost = evaluate(p, r, &jac);
  double lambda = 1e-3;
  int it = 0;
  bool done = false;
  for (; it < opt.max_iterations && !done; ++it) {
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * r;
    bool accepted = false;
    while (!accepted) {
      Eigen::Matrix<double, 6, 6> m = jtj;
      for (int k = 0; k < 6; ++k) m(k, k) += lambda * std::max(jtj(k, k), 1e-30);
      const Eigen::Matrix<double, 6, 1> step = m.ldlt().solve(g);
      const Params q = from_vec(to_vec(p) + step);
      const double c_try = evaluate(q, r_try, nullptr);
      if (std::isfinite(c_try) && c_try <= cost) {
        const double rel = (cost - c_try) / std::max(cost, 1e-300);
        p = q;
        cost = evaluate(p, r, &jac);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (rel < opt.tolerance) done = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e12) {
          // No descent direction left: at a minimum to working precision.
          done = true;
          break;
        }
      }
    }
  }

  res.iterations = it;
  if (!done || !std::isfinite(cost)) {
    res.message = "no convergence within iteration limit";
  } else {
    res.converged = true;
    res.message = "converged";
  }
  res.max_visibility = p.vis;
  res.sigma = p.sigma;
  res.omega = p.omega;
  res.center = p.center;
  res.phase_offset = wrap_phase(p.phase - p.omega * p.center);
  res.baseline = p.baseline;
  res.residual_norm = std::sqrt(cost / static_cast<double>(n));
  return res;
}

} // namespace mzc
