#pragma once

// Synthetic problem instances Y = A_ref S_ref + Z with |B_p G_α| factors and
// Gaussian noise at a prescribed data SNR.

#include <cmath>
#include <cstdint>
#include <limits>

#include "ngmca/linops.hpp"
#include "ngmca/random.hpp"

namespace ngmca {

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

struct InstanceSpec {
  Index m = 200;
  Index n = 200;
  Index r = 15;
  double p_A = 1.0;
  double p_S = 0.1;
  double alpha_A = 2.0;
  double alpha_S = 1.0;
  /// Data SNR in dB; +∞ means noiseless.
  double snr_db = kNoiseless;
  std::uint64_t seed = 0;

  bool noiseless() const { return std::isinf(snr_db) && snr_db > 0.0; }

  void validate() const {
    if (m < 1 || n < 1 || r < 1) throw Error(ErrorCode::InvalidArgument, "InstanceSpec: dimensions must be >= 1");
    if (!(p_A >= 0.0 && p_A <= 1.0) || !(p_S >= 0.0 && p_S <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "InstanceSpec: activation rates must lie in [0, 1]");
    if (!(alpha_A > 0.0) || !(alpha_S > 0.0))
      throw Error(ErrorCode::InvalidArgument, "InstanceSpec: shape parameters must be > 0");
    if (std::isnan(snr_db)) throw Error(ErrorCode::InvalidArgument, "InstanceSpec: snr_db is NaN");
  }
};

struct ProblemInstance {
  Matrix Y;
  Matrix A_ref;
  Matrix S_ref;
  Matrix Z;
  InstanceSpec spec;
};

inline Vector sample_generalized_gaussian(double alpha, Index count, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "generalized Gaussian shape must be > 0");
  CounterRng rng(seed, {tag(StreamRole::sampler)});
  const GeneralizedGaussian gg(alpha);
  Vector out(count);
  for (Index i = 0; i < count; ++i) out(i) = gg(rng);
  return out;
}

/// Entries i.i.d. |B_p · G_α|, drawn in row-major order from one stream.
inline Matrix gen_factor(Index rows, Index cols, double p, double alpha, CounterRng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "gen_factor: p must lie in [0, 1]");
  const GeneralizedGaussian gg(alpha);
  Matrix out = Matrix::Zero(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (rng.bernoulli(p)) out(i, j) = std::abs(gg(rng));
  return out;
}

inline Matrix gen_factor(Index rows, Index cols, double p, double alpha, std::uint64_t seed) {
  CounterRng rng(seed);
  return gen_factor(rows, cols, p, alpha, rng);
}

struct NoisyData {
  Matrix Y;
  Matrix Z;
};

/// Adds i.i.d. Gaussian noise rescaled so that 10 log₁₀(‖X‖²/‖Z‖²) equals
/// snr_db exactly; +∞ returns the signal untouched.
inline NoisyData add_noise_snr(const Matrix& x, double snr_db, CounterRng& rng) {
  if (std::isinf(snr_db) && snr_db > 0.0) return {x, Matrix::Zero(x.rows(), x.cols())};
  const double signal = x.norm();
  if (!(signal > 0.0)) throw Error(ErrorCode::ZeroSignal, "add_noise_snr: signal is zero");
  Matrix z(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) z(i, j) = rng.normal();
  z *= signal / (z.norm() * std::pow(10.0, snr_db / 20.0));
  return {x + z, z};
}

inline NoisyData add_noise_snr(const Matrix& x, double snr_db, std::uint64_t seed) {
  CounterRng rng(seed);
  return add_noise_snr(x, snr_db, rng);
}

namespace detail {

inline bool has_zero_column(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j)
    if (!(m.col(j).cwiseAbs().maxCoeff() > 0.0)) return true;
  return false;
}

inline bool has_zero_row(const Matrix& m) { return has_zero_column(m.transpose()); }

inline constexpr int kMaxFactorRedraws = 100;

}  // namespace detail

/// Draws A_ref (m×r), S_ref (r×n) and noise from independent streams keyed by
/// spec.seed. A factor with an all-zero source is redrawn from the next
/// attempt's stream, up to 100 times.
inline ProblemInstance gen_instance(const InstanceSpec& spec) {
  spec.validate();
  ProblemInstance inst;
  inst.spec = spec;
  for (int attempt = 0;; ++attempt) {
    CounterRng rng(spec.seed, {tag(StreamRole::mixing), static_cast<std::uint64_t>(attempt)});
    inst.A_ref = gen_factor(spec.m, spec.r, spec.p_A, spec.alpha_A, rng);
    if (!detail::has_zero_column(inst.A_ref) || attempt + 1 >= detail::kMaxFactorRedraws) break;
  }
  for (int attempt = 0;; ++attempt) {
    CounterRng rng(spec.seed, {tag(StreamRole::sources), static_cast<std::uint64_t>(attempt)});
    inst.S_ref = gen_factor(spec.r, spec.n, spec.p_S, spec.alpha_S, rng);
    if (!detail::has_zero_row(inst.S_ref) || attempt + 1 >= detail::kMaxFactorRedraws) break;
  }
  CounterRng noise_rng(spec.seed, {tag(StreamRole::noise)});
  auto noisy = add_noise_snr(inst.A_ref * inst.S_ref, spec.snr_db, noise_rng);
  inst.Y = std::move(noisy.Y);
  inst.Z = std::move(noisy.Z);
  return inst;
}

}  // namespace ngmca
