#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mzc {

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Sub-seed for an independent random stream identified by (stream, index).
/// Work items seeded this way give identical results in any execution order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(base ^ mix64(stream + 0x5851f42d4c957f2dULL)) + index);
}

/// Thin wrapper over mt19937_64 with the few draws the simulator needs.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>{mean, stddev}(engine_);
  }

  std::uint64_t poisson(double mean) {
    return std::poisson_distribution<std::uint64_t>{mean}(engine_);
  }

  std::mt19937_64 &engine() noexcept { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// Stationary Ornstein-Uhlenbeck samples at spacing dt with standard
/// deviation `sigma` and correlation time `tau` (tau <= 0 gives white noise).
inline std::vector<double> ou_series(std::size_t n, double dt, double sigma, double tau,
                                     std::uint64_t seed) {
  std::vector<double> out(n, 0.0);
  if (n == 0 || sigma <= 0.0) return out;
  Rng rng(seed);
  const double a = tau > 0.0 ? std::exp(-dt / tau) : 0.0;
  const double kick = sigma * std::sqrt(1.0 - a * a);
  out[0] = rng.normal(0.0, sigma);
  for (std::size_t i = 1; i < n; ++i) out[i] = a * out[i - 1] + rng.normal(0.0, kick);
  return out;
}

} // namespace mzc
