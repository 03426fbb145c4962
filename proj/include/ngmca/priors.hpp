#pragma once

// Thresholding operators, robust noise-scale estimation and the decreasing
// threshold schedules driving both nGMCA variants.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ngmca/linops.hpp"

namespace ngmca {

/// Median absolute deviation → standard deviation for Gaussian samples.
inline constexpr double kMadToSigma = 0.6745;

/// Per-source thresholds at one outer iteration.
struct ThresholdSchedule {
  Vector per_source_lambda;
  int outer_iteration = 0;
  int total_iterations = 0;
  /// Final threshold in units of the estimated noise scale.
  double tau_final = 1.0;
};

// Scalar operators ----------------------------------------------------------

inline double soft_threshold(double x, double lambda) {
  const double shrunk = std::abs(x) - lambda;
  return shrunk > 0.0 ? std::copysign(shrunk, x) : 0.0;
}

/// Keeps |x| == lambda: only the strict inequality zeroes.
inline double hard_threshold(double x, double lambda) { return std::abs(x) < lambda ? 0.0 : x; }

/// prox of λ|·| + i⁺, the skewed soft-thresholding [Soft_λ(x)]₊.
inline double prox_nonneg_l1(double x, double lambda) { return std::max(soft_threshold(x, lambda), 0.0); }

// Matrix operators ----------------------------------------------------------

inline Matrix soft_threshold(const Matrix& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return soft_threshold(v, lambda); });
}

inline Matrix hard_threshold(const Matrix& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return hard_threshold(v, lambda); });
}

inline Matrix prox_nonneg_l1(const Matrix& x, double lambda) {
  return x.unaryExpr([lambda](double v) { return prox_nonneg_l1(v, lambda); });
}

/// Row i is thresholded at lambdas(i).
inline void prox_nonneg_l1_rows_inplace(Matrix& x, const Vector& lambdas) {
  for (Index i = 0; i < x.rows(); ++i) {
    const double l = lambdas(i);
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = std::max(x(i, j) - l, 0.0);
  }
}

inline void hard_nonneg_rows_inplace(Matrix& x, const Vector& lambdas) {
  for (Index i = 0; i < x.rows(); ++i) {
    const double l = lambdas(i);
    for (Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      x(i, j) = (std::abs(v) < l || v < 0.0) ? 0.0 : v;
    }
  }
}

// Noise scale ---------------------------------------------------------------

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const auto n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// median(|v − median(v)|) / 0.6745.
inline double mad_sigma(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "mad_sigma: empty input");
  std::vector<double> work(v.begin(), v.end());
  const double med = detail::median_inplace(work);
  for (std::size_t i = 0; i < work.size(); ++i) work[i] = std::abs(v[i] - med);
  return detail::median_inplace(work) / kMadToSigma;
}

inline double mad_sigma(const Vector& v) { return mad_sigma(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

/// mad_sigma of every row of M.
inline Vector row_mad_sigma(const Matrix& m) {
  Vector out(m.rows());
  std::vector<double> row(static_cast<std::size_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out(i) = mad_sigma(row);
  }
  return out;
}

// Schedules -----------------------------------------------------------------

/// Thresholds for the naive variant: the number of coefficients kept in each
/// row grows linearly with k, down to a floor of tau_final · MAD(row).
///
/// At step k the threshold is the magnitude of the ⌈(k/K)·n_cand⌉-th largest
/// entry of the row, where n_cand counts entries above the floor. Once every
/// candidate is active the floor itself is returned.
inline Vector naive_threshold_select(const Matrix& s_all, int k, int total, double tau_final) {
  if (total < 1 || k < 1 || k > total)
    throw Error(ErrorCode::InvalidArgument, "naive_threshold_select: need 1 <= k <= K");
  Vector lambdas(s_all.rows());
  std::vector<double> mags;
  for (Index i = 0; i < s_all.rows(); ++i) {
    const Vector row = s_all.row(i).transpose();
    const double floor = tau_final * mad_sigma(row);
    mags.clear();
    for (Index j = 0; j < row.size(); ++j) {
      const double m = std::abs(row(j));
      if (m > floor) mags.push_back(m);
    }
    const auto n_cand = mags.size();
    const auto active = static_cast<std::size_t>(
        std::ceil(static_cast<double>(k) / static_cast<double>(total) * static_cast<double>(n_cand)));
    if (active == 0 || active >= n_cand) {
      lambdas(i) = floor;
      continue;
    }
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(active - 1), mags.end(),
                     std::greater<>());
    lambdas(i) = std::max(mags[active - 1], floor);
  }
  return lambdas;
}

/// λ₀ = ‖A₀ᵀ(A₀S₀ − Y)‖∞.
inline double ngmca_lambda_init(const Matrix& a0, const Matrix& s0, const Matrix& y) {
  require_shape(a0.cols() == s0.rows() && a0.rows() == y.rows() && s0.cols() == y.cols(),
                "ngmca_lambda_init: shapes do not conform");
  return (a0.transpose() * (a0 * s0 - y)).cwiseAbs().maxCoeff();
}

/// Linear decrease from lambda0 (k = 0) to lambda_final (k = K).
inline Vector ngmca_lambda_next(double lambda0, const Vector& lambda_final, int k, int total) {
  if (total < 1 || k < 0 || k > total)
    throw Error(ErrorCode::InvalidArgument, "ngmca_lambda_next: need 0 <= k <= K");
  if (k == total) return lambda_final;
  const double t = static_cast<double>(k) / static_cast<double>(total);
  return (lambda0 + t * (lambda_final.array() - lambda0)).matrix();
}

}  // namespace ngmca
