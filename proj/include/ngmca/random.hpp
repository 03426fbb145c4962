#pragma once

// Reproducible random streams.
//
// The generator is SplitMix64 used in counter mode: output i of the stream
// with key k is finalize(k + (i + 1) · 0x9e3779b97f4a7c15), where finalize is
// the SplitMix64 avalanche. Independent streams are obtained by hashing a
// base seed with a list of tags (trial index, matrix role, attempt, ...), so
// any stream can be regenerated without replaying the ones before it.
//
// Every distribution below is written out explicitly rather than taken from
// <random>, whose algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace ngmca {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a seed and a list of tags.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix_finalize(seed + kGoldenGamma);
  for (std::uint64_t t : tags) h = splitmix_finalize(h ^ splitmix_finalize(t + kGoldenGamma));
  return h;
}

/// Tags naming the independent streams of one problem instance or run.
enum class StreamRole : std::uint64_t {
  mixing = 1,
  sources = 2,
  noise = 3,
  init = 4,
  reinit = 5,
  sampler = 6,
};

constexpr std::uint64_t tag(StreamRole role) { return static_cast<std::uint64_t>(role); }

class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) : key_(derive_seed(seed, tags)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return splitmix_finalize(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal by Box–Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform_open_low()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Gamma(shape, 1) by Marsaglia–Tsang; shapes below one use the
  /// Gamma(shape + 1) · U^{1/shape} boost.
  double gamma(double shape) {
    if (shape < 1.0) return gamma(shape + 1.0) * std::pow(uniform_open_low(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open_low();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Symmetric random sign.
  double sign() { return ((*this)() >> 63) ? -1.0 : 1.0; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Zero-mean, unit-variance generalized Gaussian with density ∝ exp(−|x/β|^α),
/// β = √(Γ(1/α)/Γ(3/α)), sampled as sign · β · G^{1/α} with G ~ Gamma(1/α).
class GeneralizedGaussian {
 public:
  explicit GeneralizedGaussian(double alpha)
      : alpha_(alpha), scale_(std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha))) {}

  double operator()(CounterRng& rng) const {
    const double g = rng.gamma(1.0 / alpha_);
    const double magnitude = scale_ * std::pow(g, 1.0 / alpha_);
    return rng.sign() * magnitude;
  }

  double alpha() const { return alpha_; }
  double scale() const { return scale_; }

 private:
  double alpha_;
  double scale_;
};

}  // namespace ngmca
