#pragma once

// Dense real-matrix primitives shared by the solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "ngmca/error.hpp"

namespace ngmca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

inline void require_shape(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

/// Elementwise max(x, 0).
inline Matrix nonneg_project(const Matrix& m) { return m.cwiseMax(0.0); }

/// ½‖Y − A S‖².
inline double half_squared_residual(const Matrix& y, const Matrix& a, const Matrix& s) {
  return 0.5 * (y - a * s).squaredNorm();
}

/// ‖X − X_ref‖ / ‖X_ref‖, or the absolute change when X_ref is zero.
inline double relative_change(const Matrix& x, const Matrix& x_ref) {
  const double denom = x_ref.norm();
  const double diff = (x - x_ref).norm();
  return denom > 0.0 ? diff / denom : diff;
}

struct SolveOptions {
  /// Replace a rank-deficient solve with a ridge-stabilised one instead of throwing.
  bool allow_ridge_fallback = true;
  /// Largest acceptable estimated condition number of the design matrix.
  double condition_cap = 1e10;
};

namespace detail {

// (G + ρI)⁻¹ B with ρ = 1e-12 · trace(G) / r.
inline Matrix ridge_solve(const Matrix& gram, const Matrix& rhs) {
  const Index r = gram.rows();
  const double trace = gram.trace();
  if (!(trace > 0.0)) return Matrix::Zero(r, rhs.cols());
  const double ridge = 1e-12 * trace / static_cast<double>(r);
  Matrix regularized = gram;
  regularized.diagonal().array() += ridge;
  return regularized.ldlt().solve(rhs);
}

}  // namespace detail

/// argmin_S ‖Y − A S‖² through a column-pivoted QR of A.
inline Matrix least_squares_solve_S(const Matrix& a, const Matrix& y, const SolveOptions& opts = {}) {
  require_shape(a.rows() == y.rows(), "least_squares_solve_S: A and Y row counts differ");
  const Index r = a.cols();
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  const auto& packed = qr.matrixQR();
  const double r_max = r > 0 ? std::abs(packed(0, 0)) : 0.0;
  const double r_min = r > 0 ? std::abs(packed(r - 1, r - 1)) : 0.0;
  const bool deficient = a.rows() < r || !(r_max > 0.0) || r_min * opts.condition_cap < r_max;
  if (!deficient) return qr.solve(y);
  if (!opts.allow_ridge_fallback)
    throw Error(ErrorCode::RankDeficient, "least_squares_solve_S: design matrix is rank deficient");
  return detail::ridge_solve(a.transpose() * a, a.transpose() * y);
}

/// argmin_A ‖Y − A S‖² through the normal equations A (S Sᵀ) = Y Sᵀ.
inline Matrix least_squares_solve_A(const Matrix& s, const Matrix& y, const SolveOptions& opts = {}) {
  require_shape(s.cols() == y.cols(), "least_squares_solve_A: S and Y column counts differ");
  const Matrix gram = s * s.transpose();
  const Matrix rhs = s * y.transpose();  // (Y Sᵀ)ᵀ
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double ev_max = ev.size() > 0 ? ev.maxCoeff() : 0.0;
  const double ev_min = ev.size() > 0 ? ev.minCoeff() : 0.0;
  // cond(S)² = cond(S Sᵀ)
  const double cap_sq = opts.condition_cap * opts.condition_cap;
  const bool deficient = s.cols() < s.rows() || !(ev_max > 0.0) || ev_min * cap_sq < ev_max;
  if (!deficient) return gram.llt().solve(rhs).transpose();
  if (!opts.allow_ridge_fallback)
    throw Error(ErrorCode::RankDeficient, "least_squares_solve_A: source matrix is rank deficient");
  return detail::ridge_solve(gram, rhs).transpose();
}

struct ColumnNormalization {
  Matrix normalized;
  /// Original column norms; 0 marks a zero column that was left untouched.
  Vector scales;

  bool has_zero_column() const { return (scales.array() == 0.0).any(); }
};

inline ColumnNormalization normalize_columns(const Matrix& a) {
  ColumnNormalization out{a, Vector::Zero(a.cols())};
  for (Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    out.scales(j) = norm;
    if (norm > 0.0) out.normalized.col(j) /= norm;
  }
  return out;
}

/// Largest singular value of M by power iteration on MᵀM.
inline double spectral_norm(const Matrix& m, double tol = 1e-9, int max_iterations = 1000) {
  if (m.size() == 0 || !(m.cwiseAbs().maxCoeff() > 0.0))
    throw Error(ErrorCode::InvalidArgument, "spectral_norm: matrix is zero");
  const Index n = m.cols();
  // Deterministic start with no special alignment to any coordinate axis.
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.0 + 2.0 * static_cast<double>(i));
  v.normalize();

  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = m.transpose() * (m * v);
    const double norm_w = w.norm();
    if (!(norm_w > 0.0)) {
      // Start vector hit the null space; restart on a coordinate axis.
      v.setZero();
      v(it % n) = 1.0;
      continue;
    }
    // Rayleigh quotient of MᵀM at v.
    const double next = std::sqrt(std::max(v.dot(w) / v.dot(v), 0.0));
    v = w / norm_w;
    if (it > 0 && std::abs(next - estimate) <= tol * next) return next;
    estimate = next;
  }
  throw Error(ErrorCode::NonConvergence, "spectral_norm: power iteration did not converge");
}

}  // namespace ngmca
