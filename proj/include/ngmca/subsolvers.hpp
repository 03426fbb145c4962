#pragma once

// Exact solvers for the two constrained sub-problems of the alternating scheme:
//
//   S ← argmin_{S≥0} ½‖Y − A S‖² + Σᵢ λᵢ‖sᵢ‖₁     (FISTA, skewed soft-thresholding)
//   A ← argmin_{A≥0} ½‖Y − A S‖²                  (accelerated projected gradient)
//
// Both reduce to minimising ½ tr(Xᵀ G X) − tr(Xᵀ B) + penalty(X) over an r×p
// matrix X, with G = AᵀA, B = AᵀY for the source update and X = Aᵀ, G = S Sᵀ,
// B = S Yᵀ for the mixing update.

#include <cmath>
#include <optional>

#include "ngmca/linops.hpp"
#include "ngmca/priors.hpp"

namespace ngmca {

enum class ThresholdMode { soft, hard };

struct SubsolverOptions {
  int max_inner_iterations = 80;
  /// Stop once ‖X_k − X_{k−1}‖ / ‖X_{k−1}‖ falls below this (soft mode only).
  double rel_tol = 1e-6;
  ThresholdMode thresholding_mode = ThresholdMode::soft;
  /// Multiplies the computed Lipschitz constant. Anything below 1 voids the
  /// convergence guarantee; only tests should touch it.
  double lipschitz_scale = 1.0;
  /// Reset momentum and take a plain forward-backward step whenever the
  /// accelerated step would increase the objective.
  bool monotone_restart = true;

  void validate() const {
    if (max_inner_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_inner_iterations must be >= 1");
    if (!(rel_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "rel_tol must be > 0");
    if (!(lipschitz_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "lipschitz_scale must be > 0");
  }
};

struct SubsolverReport {
  int iterations = 0;
  int restarts = 0;
  double lipschitz = 0.0;
  bool converged = false;
};

namespace detail {

/// Lipschitz constant of X ↦ G X, falling back to the Frobenius bound when
/// power iteration stalls.
inline double gram_lipschitz(const Matrix& gram) {
  if (!(gram.cwiseAbs().maxCoeff() > 0.0)) return 0.0;
  try {
    return spectral_norm(gram);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonConvergence) throw;
    return gram.norm();
  }
}

// ½ tr(XᵀGX) − tr(XᵀB) + Σᵢ λᵢ Σⱼ |xᵢⱼ|, together with a magnitude used to
// scale the comparison slack.
struct ObjectiveValue {
  double value;
  double magnitude;
};

inline ObjectiveValue gram_objective(const Matrix& gram, const Matrix& b, const Vector& lambdas, const Matrix& x) {
  const double quad = 0.5 * x.cwiseProduct(gram * x).sum();
  const double lin = x.cwiseProduct(b).sum();
  const double pen = lambdas.dot(x.cwiseAbs().rowwise().sum());
  return {quad - lin + pen, std::abs(quad) + std::abs(lin) + std::abs(pen)};
}

inline Matrix fista_gram(const Matrix& gram, const Matrix& b, const Vector& lambdas, const Matrix& x0,
                         ThresholdMode mode, const SubsolverOptions& opts, SubsolverReport* report) {
  opts.validate();
  SubsolverReport local;
  SubsolverReport& rep = report ? *report : local;
  rep = SubsolverReport{};

  const Index r = gram.rows();
  const double lipschitz = gram_lipschitz(gram);
  rep.lipschitz = lipschitz;
  if (!(lipschitz > 0.0)) {
    // G = 0: the quadratic term vanishes; nothing to fit.
    rep.converged = true;
    return nonneg_project(x0);
  }

  const double step_l = lipschitz * opts.lipschitz_scale;
  // Forward step written as M R + B/L so that an orthonormal design yields
  // the closed-form prox bit-exactly.
  const Matrix m = Matrix::Identity(r, r) - gram / step_l;
  const Matrix b_scaled = b / step_l;
  const Vector thresholds = lambdas / step_l;
  const bool soft = mode == ThresholdMode::soft;

  auto prox = [&](Matrix& z) {
    if (soft)
      prox_nonneg_l1_rows_inplace(z, thresholds);
    else
      hard_nonneg_rows_inplace(z, thresholds);
  };

  Matrix x_prev = x0;
  Matrix extrapolated = x0;
  double t = 1.0;
  ObjectiveValue f_prev = soft ? gram_objective(gram, b, lambdas, x_prev) : ObjectiveValue{0.0, 0.0};

  for (int k = 1; k <= opts.max_inner_iterations; ++k) {
    Matrix x = m * extrapolated + b_scaled;
    prox(x);

    ObjectiveValue f{0.0, 0.0};
    if (soft) {
      f = gram_objective(gram, b, lambdas, x);
      const double slack = 1e-13 * std::max(f.magnitude, f_prev.magnitude);
      if (opts.monotone_restart && f.value > f_prev.value + slack) {
        ++rep.restarts;
        t = 1.0;
        x = m * x_prev + b_scaled;
        prox(x);
        f = gram_objective(gram, b, lambdas, x);
      }
    }

    if (!x.allFinite())
      throw Error(ErrorCode::NonFinite, "FISTA iterates diverged; step size is inconsistent with the Lipschitz constant");

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    extrapolated = x + ((t - 1.0) / t_next) * (x - x_prev);
    const double change = relative_change(x, x_prev);
    x_prev = std::move(x);
    f_prev = f;
    t = t_next;
    rep.iterations = k;
    if (soft && change <= opts.rel_tol) {
      rep.converged = true;
      break;
    }
  }
  return x_prev;
}

}  // namespace detail

/// S-update: argmin_{S≥0} ½‖Y − A S‖² + Σᵢ λᵢ‖sᵢ‖₁, warm-started at S0.
///
/// In hard mode the prox is replaced by [Hard_{λ/L}(·)]₊; the result is then a
/// fixed point of that iteration with no optimality guarantee.
inline Matrix fista_update_S(const Matrix& y, const Matrix& a, const Vector& lambda, const Matrix& s0,
                             const SubsolverOptions& opts = {}, SubsolverReport* report = nullptr) {
  require_shape(a.rows() == y.rows(), "fista_update_S: A and Y row counts differ");
  require_shape(s0.rows() == a.cols() && s0.cols() == y.cols(), "fista_update_S: S0 has the wrong shape");
  require_shape(lambda.size() == a.cols(), "fista_update_S: need one lambda per source");
  if ((lambda.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "fista_update_S: negative lambda");
  const Matrix gram = a.transpose() * a;
  const Matrix b = a.transpose() * y;
  return detail::fista_gram(gram, b, lambda, s0, opts.thresholding_mode, opts, report);
}

/// A-update: argmin_{A≥0} ½‖Y − A S‖², warm-started at A0.
inline Matrix fista_update_A(const Matrix& y, const Matrix& s, const Matrix& a0, const SubsolverOptions& opts = {},
                             SubsolverReport* report = nullptr) {
  require_shape(s.cols() == y.cols(), "fista_update_A: S and Y column counts differ");
  require_shape(a0.rows() == y.rows() && a0.cols() == s.rows(), "fista_update_A: A0 has the wrong shape");
  const Matrix gram = s * s.transpose();
  const Matrix b = s * y.transpose();
  const Vector no_penalty = Vector::Zero(s.rows());
  const Matrix at = detail::fista_gram(gram, b, no_penalty, a0.transpose(), ThresholdMode::soft, opts, report);
  return at.transpose();
}

/// ½‖Y − A S‖² + Σᵢ λᵢ‖sᵢ‖₁.
inline double penalized_objective(const Matrix& y, const Matrix& a, const Matrix& s, const Vector& lambda) {
  return half_squared_residual(y, a, s) + lambda.dot(s.cwiseAbs().rowwise().sum());
}

}  // namespace ngmca
