#pragma once

// Outer-loop factorization algorithms: nGMCA (naive, soft, hard), ALS,
// multiplicative updates, sparse HALS, and the ℓ1 oracle that knows A_ref.
//
// Every algorithm returns non-negative factors; the projection is the last
// operation applied to each factor. Sources whose row of S is all zero at the
// end of a run are listed in RunResult::collapsed_sources.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ngmca/linops.hpp"
#include "ngmca/priors.hpp"
#include "ngmca/random.hpp"
#include "ngmca/subsolvers.hpp"

namespace ngmca {

enum class AlgorithmId { ngmca_naive, ngmca_s, ngmca_h, als, mu, hals_sparse, oracle };

inline std::string_view to_string(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::ngmca_naive: return "ngmca_naive";
    case AlgorithmId::ngmca_s: return "ngmca_s";
    case AlgorithmId::ngmca_h: return "ngmca_h";
    case AlgorithmId::als: return "als";
    case AlgorithmId::mu: return "mu";
    case AlgorithmId::hals_sparse: return "hals_sparse";
    case AlgorithmId::oracle: return "oracle";
  }
  return "unknown";
}

inline AlgorithmId parse_algorithm_id(std::string_view name) {
  for (auto id : {AlgorithmId::ngmca_naive, AlgorithmId::ngmca_s, AlgorithmId::ngmca_h, AlgorithmId::als,
                  AlgorithmId::mu, AlgorithmId::hals_sparse, AlgorithmId::oracle})
    if (to_string(id) == name) return id;
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

inline int default_outer_iterations(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::mu: return 40000;
    case AlgorithmId::hals_sparse: return 5000;
    case AlgorithmId::oracle: return 1;
    default: return 500;
  }
}

/// Fraction of the outer iterations over which nGMCA thresholds decrease;
/// the rest is the refinement phase at constant threshold.
inline constexpr double kDecreasingPhase = 0.8;

/// Reinitializations allowed per source before it is reported as collapsed.
inline constexpr int kReinitBudget = 3;

struct AlgorithmConfig {
  AlgorithmId algorithm_id = AlgorithmId::ngmca_s;
  Index rank = 15;
  /// 0 selects the per-algorithm default.
  int outer_iterations = 0;
  double tau_final = 1.0;
  std::uint64_t seed = 0;
  SubsolverOptions subsolver;
  /// HALS only: target fraction of (near-)zero entries of S; unset or 0 runs
  /// plain HALS with λ = 0.
  std::optional<double> sparsity_target;
  /// Record ½‖Y − AS‖² after every outer iteration (otherwise only the last).
  bool record_objective = true;
  /// Soft-thresholded nGMCA keeps alternating at the final λ after K
  /// iterations until one alternation moves both factors by at most this
  /// relative amount, for at most max_extra_refinement more iterations.
  double stability_tol = 1e-6;
  int max_extra_refinement = 500;

  int iterations() const { return outer_iterations > 0 ? outer_iterations : default_outer_iterations(algorithm_id); }

  /// Last iteration of the decreasing-threshold phase.
  int decreasing_iterations() const {
    return std::max(1, static_cast<int>(std::floor(kDecreasingPhase * iterations())));
  }

  void validate() const {
    if (rank < 1) throw Error(ErrorCode::InvalidArgument, "rank must be >= 1");
    if (outer_iterations < 0) throw Error(ErrorCode::InvalidArgument, "outer_iterations must be >= 0");
    if (!(tau_final >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau_final must be >= 0");
    if (!(stability_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "stability_tol must be > 0");
    if (max_extra_refinement < 0) throw Error(ErrorCode::InvalidArgument, "max_extra_refinement must be >= 0");
    if (sparsity_target && !(*sparsity_target >= 0.0 && *sparsity_target <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "sparsity_target must lie in [0, 1]");
    subsolver.validate();
  }
};

struct FactorPair {
  Matrix A;
  Matrix S;
};

struct RunResult {
  FactorPair factors;
  /// Thresholds in force at the last iteration (empty for unpenalized runs).
  Vector lambda;
  /// ½‖Y − AS‖² after every outer iteration, or only the final value.
  std::vector<double> objective;
  int iterations = 0;
  int reinitializations = 0;
  std::vector<Index> collapsed_sources;
};

/// Half-normal A₀ (m×r) and S₀ (r×n), drawn in that order from the init stream.
inline FactorPair initialize(const Matrix& y, Index r, std::uint64_t seed) {
  if (r < 1) throw Error(ErrorCode::InvalidArgument, "initialize: rank must be >= 1");
  CounterRng rng(seed, {tag(StreamRole::init)});
  FactorPair p{Matrix(y.rows(), r), Matrix(r, y.cols())};
  for (Index i = 0; i < p.A.rows(); ++i)
    for (Index j = 0; j < r; ++j) p.A(i, j) = std::abs(rng.normal());
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < p.S.cols(); ++j) p.S(i, j) = std::abs(rng.normal());
  return p;
}

namespace detail {

inline bool row_is_zero(const Matrix& m, Index i) { return !(m.row(i).cwiseAbs().maxCoeff() > 0.0); }
inline bool col_is_zero(const Matrix& m, Index j) { return !(m.col(j).cwiseAbs().maxCoeff() > 0.0); }

inline void check_inputs(const Matrix& y, const AlgorithmConfig& cfg) {
  cfg.validate();
  if (y.size() == 0) throw Error(ErrorCode::EmptyInput, "empty data matrix");
  require_finite(y, "data matrix");
  if (cfg.rank > std::min(y.rows(), y.cols()))
    throw Error(ErrorCode::InvalidArgument, "rank exceeds min(m, n)");
}

/// Refills all-zero sources with small half-normal values drawn from a
/// per-(source, attempt) stream, at most kReinitBudget times per source.
class DeadSourceGuard {
 public:
  DeadSourceGuard(std::uint64_t seed, Index r) : seed_(seed), used_(static_cast<std::size_t>(r), 0) {}

  /// Returns true if anything was refilled.
  bool revive_mixing(Matrix& a) {
    bool any = false;
    const double level = 0.01 * std::max(a.maxCoeff(), 1e-300);
    for (Index j = 0; j < a.cols(); ++j)
      if (col_is_zero(a, j) && take(j)) {
        CounterRng rng = stream(j);
        for (Index i = 0; i < a.rows(); ++i) a(i, j) = level * std::abs(rng.normal());
        any = true;
      }
    return any;
  }

  bool revive_sources(Matrix& s) {
    bool any = false;
    const double level = 0.01 * std::max(s.maxCoeff(), 1e-300);
    for (Index i = 0; i < s.rows(); ++i)
      if (row_is_zero(s, i) && take(i)) {
        CounterRng rng = stream(i);
        for (Index j = 0; j < s.cols(); ++j) s(i, j) = level * std::abs(rng.normal());
        any = true;
      }
    return any;
  }

  int total() const { return total_; }

 private:
  bool take(Index source) {
    auto& n = used_[static_cast<std::size_t>(source)];
    if (n >= kReinitBudget) return false;
    ++n;
    ++total_;
    return true;
  }

  CounterRng stream(Index source) {
    return CounterRng(seed_, {tag(StreamRole::reinit), static_cast<std::uint64_t>(source),
                              static_cast<std::uint64_t>(used_[static_cast<std::size_t>(source)])});
  }

  std::uint64_t seed_;
  std::vector<int> used_;
  int total_ = 0;
};

inline std::vector<Index> zero_rows(const Matrix& s) {
  std::vector<Index> out;
  for (Index i = 0; i < s.rows(); ++i)
    if (row_is_zero(s, i)) out.push_back(i);
  return out;
}

inline std::vector<Index> nonzero_rows(const Matrix& s) {
  std::vector<Index> out;
  for (Index i = 0; i < s.rows(); ++i)
    if (!row_is_zero(s, i)) out.push_back(i);
  return out;
}

/// Normalizes the columns of A in place and rescales the rows of S so that
/// A·S is unchanged. Returns the former column norms.
inline Vector normalize_pair(Matrix& a, Matrix& s) {
  ColumnNormalization cn = normalize_columns(a);
  a = std::move(cn.normalized);
  for (Index i = 0; i < s.rows(); ++i) s.row(i) *= cn.scales(i);
  return cn.scales;
}

/// [Y Sᵀ(S Sᵀ)⁻¹]₊ restricted to the sources with a nonzero row of S; the
/// other columns of A carry no information and keep their previous value.
inline Matrix projected_ls_mixing(const Matrix& y, const Matrix& s, const Matrix& a_prev) {
  const auto active = nonzero_rows(s);
  Matrix a = a_prev;
  if (active.empty()) return a;
  if (static_cast<Index>(active.size()) == s.rows()) return nonneg_project(least_squares_solve_A(s, y));
  Matrix sub(static_cast<Index>(active.size()), s.cols());
  for (std::size_t k = 0; k < active.size(); ++k) sub.row(static_cast<Index>(k)) = s.row(active[k]);
  const Matrix a_sub = nonneg_project(least_squares_solve_A(sub, y));
  for (std::size_t k = 0; k < active.size(); ++k) a.col(active[k]) = a_sub.col(static_cast<Index>(k));
  return a;
}

/// (AᵀA)⁻¹AᵀY restricted to the nonzero columns of A; rows of S belonging to
/// zero columns keep their previous value. Not projected.
inline Matrix ls_sources(const Matrix& y, const Matrix& a, const Matrix& s_prev) {
  std::vector<Index> active;
  for (Index j = 0; j < a.cols(); ++j)
    if (!col_is_zero(a, j)) active.push_back(j);
  Matrix s = s_prev;
  if (active.empty()) return s;
  if (static_cast<Index>(active.size()) == a.cols()) return least_squares_solve_S(a, y);
  Matrix sub(a.rows(), static_cast<Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Index>(k)) = a.col(active[k]);
  const Matrix s_sub = least_squares_solve_S(sub, y);
  for (std::size_t k = 0; k < active.size(); ++k) s.row(active[k]) = s_sub.row(static_cast<Index>(k));
  return s;
}

inline void record(RunResult& out, const Matrix& y, const AlgorithmConfig& cfg, int k) {
  if (cfg.record_objective || k == cfg.iterations())
    out.objective.push_back(half_squared_residual(y, out.factors.A, out.factors.S));
}

inline void finish(RunResult& out, const DeadSourceGuard& guard) {
  out.reinitializations = guard.total();
  out.collapsed_sources = zero_rows(out.factors.S);
}

}  // namespace detail

// --- nGMCA ------------------------------------------------------------------

/// One iteration of the naive variant at thresholds chosen for step k of a
/// decreasing phase of `total` steps.
inline FactorPair ngmca_naive_step(const Matrix& y, FactorPair p, int k, int total, double tau_final,
                                   Vector* lambda_out = nullptr) {
  detail::normalize_pair(p.A, p.S);
  const Matrix s_all = detail::ls_sources(y, p.A, p.S);
  const Vector lambda = naive_threshold_select(s_all, k, total, tau_final);
  p.S = s_all;
  hard_nonneg_rows_inplace(p.S, lambda);
  p.A = detail::projected_ls_mixing(y, p.S, p.A);
  if (lambda_out) *lambda_out = lambda;
  return p;
}

inline RunResult ngmca_naive(const Matrix& y, const AlgorithmConfig& cfg) {
  detail::check_inputs(y, cfg);
  const int total = cfg.iterations();
  const int decreasing = cfg.decreasing_iterations();
  RunResult out;
  out.factors = initialize(y, cfg.rank, cfg.seed);
  detail::DeadSourceGuard guard(cfg.seed, cfg.rank);
  for (int k = 1; k <= total; ++k) {
    guard.revive_mixing(out.factors.A);
    out.factors = ngmca_naive_step(y, std::move(out.factors), std::min(k, decreasing), decreasing, cfg.tau_final,
                                   &out.lambda);
    if (k > decreasing) guard.revive_sources(out.factors.S);
    detail::record(out, y, cfg, k);
  }
  out.iterations = total;
  detail::finish(out, guard);
  return out;
}

/// One alternation of nGMCA at fixed thresholds: normalize A, solve the
/// penalized S sub-problem, then the non-negative least-squares A
/// sub-problem, both warm-started.
inline FactorPair ngmca_step(const Matrix& y, FactorPair p, const Vector& lambda, const SubsolverOptions& opts) {
  detail::normalize_pair(p.A, p.S);
  p.S = fista_update_S(y, p.A, lambda, p.S, opts);
  p.A = fista_update_A(y, p.S, p.A, opts);
  return p;
}

/// Largest relative move of either factor under one more ngmca_step.
inline double stability_move(const Matrix& y, const FactorPair& p, const Vector& lambda,
                             const SubsolverOptions& opts) {
  const FactorPair next = ngmca_step(y, p, lambda, opts);
  return std::max(relative_change(next.A, p.A), relative_change(next.S, p.S));
}

/// Per-row noise level of the S-gradient Aᵀ(AS − Y), given AᵀA and AᵀY.
inline Vector gradient_sigma(const Matrix& gram, const Matrix& aty, const Matrix& s) {
  return row_mad_sigma(gram * s - aty);
}

/// nGMCA with exact sub-problem solves (soft or hard thresholding).
///
/// λ starts at ‖A₀ᵀ(A₀S₀ − Y)‖∞ and decreases linearly towards
/// τ·σᵢ^grad, σᵢ^grad being re-estimated at every iteration from the current
/// gradient; thresholds never increase. After the decreasing phase λ is held
/// at its last value and all-zero sources may be reinitialized. In soft mode
/// the refinement continues past K until the pair is stable (see
/// AlgorithmConfig::stability_tol).
inline RunResult ngmca_exact(const Matrix& y, const AlgorithmConfig& cfg) {
  detail::check_inputs(y, cfg);
  SubsolverOptions opts = cfg.subsolver;
  const bool soft = cfg.algorithm_id != AlgorithmId::ngmca_h;
  opts.thresholding_mode = soft ? ThresholdMode::soft : ThresholdMode::hard;
  const int total = cfg.iterations();
  const int decreasing = cfg.decreasing_iterations();
  const int limit = soft ? total + cfg.max_extra_refinement : total;

  RunResult out;
  FactorPair& p = out.factors;
  p = initialize(y, cfg.rank, cfg.seed);
  detail::DeadSourceGuard guard(cfg.seed, cfg.rank);
  detail::normalize_pair(p.A, p.S);
  const double lambda0 = ngmca_lambda_init(p.A, p.S, y);
  Vector lambda = Vector::Constant(cfg.rank, lambda0);

  int k = 1;
  for (; k <= limit; ++k) {
    const FactorPair before = p;
    bool revived = guard.revive_mixing(p.A);
    detail::normalize_pair(p.A, p.S);
    const Matrix gram = p.A.transpose() * p.A;
    const Matrix aty = p.A.transpose() * y;
    if (k <= decreasing) {
      const Vector lambda_final = cfg.tau_final * gradient_sigma(gram, aty, p.S);
      lambda = lambda.cwiseMin(ngmca_lambda_next(lambda0, lambda_final, k, decreasing));
    }
    p.S = detail::fista_gram(gram, aty, lambda, p.S, opts.thresholding_mode, opts, nullptr);
    if (k > decreasing && guard.revive_sources(p.S)) {
      // A revived source gets one pass through the S sub-problem before A
      // adapts to it.
      revived = true;
      p.S = detail::fista_gram(gram, aty, lambda, p.S, opts.thresholding_mode, opts, nullptr);
    }
    p.A = fista_update_A(y, p.S, p.A, opts);
    if (cfg.record_objective) out.objective.push_back(half_squared_residual(y, p.A, p.S));
    if (k >= total) {
      const double move = std::max(relative_change(p.A, before.A), relative_change(p.S, before.S));
      if (!soft || (!revived && move <= cfg.stability_tol)) break;
    }
  }
  if (!cfg.record_objective) out.objective.push_back(half_squared_residual(y, p.A, p.S));
  out.lambda = lambda;
  out.iterations = std::min(k, limit);
  detail::finish(out, guard);
  return out;
}

// --- Baselines ---------------------------------------------------------------

/// One ALS alternation: A ← [Y Sᵀ(SSᵀ)⁻¹]₊, then S ← [(AᵀA)⁻¹AᵀY]₊.
inline FactorPair als_step(const Matrix& y, FactorPair p) {
  p.A = detail::projected_ls_mixing(y, p.S, p.A);
  p.S = nonneg_project(detail::ls_sources(y, p.A, p.S));
  return p;
}

inline RunResult als(const Matrix& y, const AlgorithmConfig& cfg) {
  detail::check_inputs(y, cfg);
  RunResult out;
  out.factors = initialize(y, cfg.rank, cfg.seed);
  detail::DeadSourceGuard guard(cfg.seed, cfg.rank);
  const int total = cfg.iterations();
  for (int k = 1; k <= total; ++k) {
    out.factors = als_step(y, std::move(out.factors));
    guard.revive_mixing(out.factors.A);
    guard.revive_sources(out.factors.S);
    detail::record(out, y, cfg, k);
  }
  out.iterations = total;
  detail::finish(out, guard);
  return out;
}

namespace detail {

// x ⊙ num ⊘ den with den floored at 1e−12·max(den) and num clipped at zero.
// The clip only matters for data with negative entries. Entries that decay
// below the smallest normal double are set to zero: zero is absorbing under
// this update anyway, and subnormal arithmetic is very slow.
inline void multiplicative_apply(Matrix& x, const Matrix& num, const Matrix& den) {
  const double floor = 1e-12 * den.maxCoeff();
  if (!(floor > 0.0)) return;
  constexpr double tiny = std::numeric_limits<double>::min();
  x = x.cwiseProduct(num.cwiseMax(0.0)).cwiseQuotient(den.cwiseMax(floor)).unaryExpr([](double v) {
    return v < tiny ? 0.0 : v;
  });
}

}  // namespace detail

/// One Lee–Seung update: A ← A ⊙ (YSᵀ) ⊘ (ASSᵀ), then S ← S ⊙ (AᵀY) ⊘ (AᵀAS).
inline FactorPair mu_step(const Matrix& y, FactorPair p) {
  const Matrix yst = y * p.S.transpose();
  const Matrix sst = p.S * p.S.transpose();
  detail::multiplicative_apply(p.A, yst, p.A * sst);
  const Matrix aty = p.A.transpose() * y;
  const Matrix ata = p.A.transpose() * p.A;
  detail::multiplicative_apply(p.S, aty, ata * p.S);
  return p;
}

inline RunResult multiplicative_update(const Matrix& y, const AlgorithmConfig& cfg) {
  detail::check_inputs(y, cfg);
  RunResult out;
  out.factors = initialize(y, cfg.rank, cfg.seed);
  const int total = cfg.iterations();
  out.objective.reserve(static_cast<std::size_t>(total));
  for (int k = 1; k <= total; ++k) {
    out.factors = mu_step(y, std::move(out.factors));
    detail::record(out, y, cfg, k);
  }
  out.iterations = total;
  out.collapsed_sources = detail::zero_rows(out.factors.S);
  return out;
}

/// Fraction of entries of S below 1e−6 times its largest entry.
inline double sparsity_rate(const Matrix& s) {
  const double cut = 1e-6 * s.maxCoeff();
  return static_cast<double>((s.array() <= cut).count()) / static_cast<double>(s.size());
}

/// One cyclic pass over the rows of S at fixed A:
/// sᵢ ← [(aᵢᵀRᵢ − λ)/‖aᵢ‖²]₊ with Rᵢ = Y − Σ_{j≠i} aⱼsⱼ, computed from AᵀA and AᵀY.
inline void hals_source_sweep(const Matrix& ata, const Matrix& aty, double lambda, Matrix& s) {
  for (Index i = 0; i < s.rows(); ++i) {
    const double norm2 = ata(i, i);
    if (!(norm2 > 0.0)) continue;
    Eigen::RowVectorXd num = aty.row(i) - ata.row(i) * s + norm2 * s.row(i);
    s.row(i) = ((num.array() - lambda) / norm2).cwiseMax(0.0).matrix();
  }
}

/// One cyclic pass over the columns of A at fixed S:
/// aᵢ ← [Rᵢsᵢᵀ/‖sᵢ‖²]₊, computed from YSᵀ and SSᵀ. Columns of silent sources
/// are left as they are.
inline void hals_mixing_sweep(const Matrix& yst, const Matrix& sst, Matrix& a) {
  for (Index i = 0; i < a.cols(); ++i) {
    const double norm2 = sst(i, i);
    if (!(norm2 > 0.0)) continue;
    Vector num = yst.col(i) - a * sst.col(i) + norm2 * a.col(i);
    a.col(i) = (num / norm2).cwiseMax(0.0);
  }
}

/// λ whose S sweep best matches the target sparsity rate, by 16 bisection
/// steps on [0, ‖AᵀY‖∞].
inline double hals_select_lambda(const Matrix& ata, const Matrix& aty, const Matrix& s, double target) {
  double lo = 0.0, hi = std::max(aty.maxCoeff(), 0.0);
  auto rate_at = [&](double lambda) {
    Matrix trial = s;
    hals_source_sweep(ata, aty, lambda, trial);
    return sparsity_rate(trial);
  };
  double rate_lo = rate_at(lo), rate_hi = rate_at(hi);
  if (rate_lo >= target) return lo;
  for (int step = 0; step < 16; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double rate = rate_at(mid);
    if (rate < target) {
      lo = mid;
      rate_lo = rate;
    } else {
      hi = mid;
      rate_hi = rate;
    }
  }
  return std::abs(rate_hi - target) <= std::abs(rate_lo - target) ? hi : lo;
}

/// One HALS iteration: choose λ, sweep S, sweep A, renormalize A columns.
inline FactorPair hals_sweep(const Matrix& y, FactorPair p, double sparsity_target, double* lambda_out = nullptr) {
  const Matrix ata = p.A.transpose() * p.A;
  const Matrix aty = p.A.transpose() * y;
  const double lambda = sparsity_target > 0.0 ? hals_select_lambda(ata, aty, p.S, sparsity_target) : 0.0;
  hals_source_sweep(ata, aty, lambda, p.S);
  const Matrix yst = y * p.S.transpose();
  const Matrix sst = p.S * p.S.transpose();
  hals_mixing_sweep(yst, sst, p.A);
  detail::normalize_pair(p.A, p.S);
  if (lambda_out) *lambda_out = lambda;
  return p;
}

inline RunResult hals_sparse(const Matrix& y, const AlgorithmConfig& cfg) {
  detail::check_inputs(y, cfg);
  const double target = cfg.sparsity_target.value_or(0.0);
  RunResult out;
  out.factors = initialize(y, cfg.rank, cfg.seed);
  detail::normalize_pair(out.factors.A, out.factors.S);
  detail::DeadSourceGuard guard(cfg.seed, cfg.rank);
  const int total = cfg.iterations();
  double lambda = 0.0;
  for (int k = 1; k <= total; ++k) {
    out.factors = hals_sweep(y, std::move(out.factors), target, &lambda);
    if (guard.revive_mixing(out.factors.A)) detail::normalize_pair(out.factors.A, out.factors.S);
    guard.revive_sources(out.factors.S);
    detail::record(out, y, cfg, k);
  }
  out.lambda = Vector::Constant(cfg.rank, lambda);
  out.iterations = total;
  detail::finish(out, guard);
  return out;
}

// --- Oracle ------------------------------------------------------------------

struct OracleOptions {
  /// Rounds of re-estimating σ^grad at the current solution; round one uses S = 0.
  int sigma_rounds = 5;
  SubsolverOptions solver{.max_inner_iterations = 5000, .rel_tol = 1e-9};
};

struct OracleResult {
  Matrix S;
  /// Thresholds applied to the sources of the column-normalized A_ref.
  Vector lambda;
};

/// argmin_{S≥0} ½‖Y − A_ref S‖² + Σᵢ λᵢ‖sᵢ‖₁ with λᵢ = τ·σᵢ^grad, computed on
/// the column-normalized A_ref and mapped back to the scale of A_ref.
inline OracleResult oracle_solve(const Matrix& y, const Matrix& a_ref, double tau_final, const OracleOptions& opts = {}) {
  require_shape(a_ref.rows() == y.rows(), "oracle_solve: A_ref and Y row counts differ");
  require_finite(y, "data matrix");
  require_finite(a_ref, "A_ref");
  if (!(tau_final >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tau_final must be >= 0");
  const ColumnNormalization cn = normalize_columns(a_ref);
  const Matrix& a = cn.normalized;
  const Matrix gram = a.transpose() * a;
  const Matrix aty = a.transpose() * y;
  Matrix s = Matrix::Zero(a.cols(), y.cols());
  Vector lambda;
  for (int round = 0; round < std::max(1, opts.sigma_rounds); ++round) {
    lambda = tau_final * gradient_sigma(gram, aty, s);
    s = detail::fista_gram(gram, aty, lambda, s, ThresholdMode::soft, opts.solver, nullptr);
  }
  for (Index i = 0; i < s.rows(); ++i) {
    if (cn.scales(i) > 0.0)
      s.row(i) /= cn.scales(i);
    else
      s.row(i).setZero();
  }
  return {std::move(s), std::move(lambda)};
}

// --- Dispatch ----------------------------------------------------------------

/// Runs cfg.algorithm_id on Y. The oracle additionally needs A_ref, which it
/// returns as its mixing matrix.
inline RunResult run_algorithm(const Matrix& y, const AlgorithmConfig& cfg, const Matrix* a_ref = nullptr) {
  switch (cfg.algorithm_id) {
    case AlgorithmId::ngmca_naive: return ngmca_naive(y, cfg);
    case AlgorithmId::ngmca_s:
    case AlgorithmId::ngmca_h: return ngmca_exact(y, cfg);
    case AlgorithmId::als: return als(y, cfg);
    case AlgorithmId::mu: return multiplicative_update(y, cfg);
    case AlgorithmId::hals_sparse: return hals_sparse(y, cfg);
    case AlgorithmId::oracle: {
      if (!a_ref) throw Error(ErrorCode::InvalidArgument, "the oracle needs the reference mixing matrix");
      cfg.validate();
      OracleOptions oo;
      OracleResult o = oracle_solve(y, *a_ref, cfg.tau_final, oo);
      RunResult out;
      out.factors = {*a_ref, std::move(o.S)};
      out.lambda = std::move(o.lambda);
      out.objective.push_back(half_squared_residual(y, out.factors.A, out.factors.S));
      out.iterations = 1;
      out.collapsed_sources = detail::zero_rows(out.factors.S);
      return out;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm");
}

}  // namespace ngmca
