#pragma once

// Separation quality: four-component decomposition of an estimated source,
// SDR, optimal pairing of estimates with references, Hoyer sparseness,
// conditioning and SNR.

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ngmca/linops.hpp"

namespace ngmca {

/// Persisted SDR values are clamped to ±kSdrCapDb.
inline constexpr double kSdrCapDb = 300.0;

inline double cap_db(double db) { return std::clamp(db, -kSdrCapDb, kSdrCapDb); }

struct BssDecomposition {
  Vector target;
  Vector interf;
  Vector noise;
  Vector artifacts;
};

namespace detail {

// Orthonormal basis (as columns) of the column space of `m`, rank decided by
// column-pivoted QR with a relative threshold.
inline Matrix orthonormal_basis(const Matrix& m, Index* rank_out = nullptr) {
  if (m.cols() == 0) {
    if (rank_out) *rank_out = 0;
    return Matrix(m.rows(), 0);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  if (rank_out) *rank_out = rank;
  Matrix q = Matrix::Identity(m.rows(), rank);
  q.applyOnTheLeft(qr.householderQ());
  return q;
}

}  // namespace detail

/// Precomputed subspaces for decomposing estimates against fixed references.
///
/// References are the rows of `refs`; noise rows are first made orthogonal
/// to the references so the three projections nest. Noise rows that add no
/// new direction are dropped rather than regularized.
class BssProjector {
 public:
  BssProjector(const Matrix& refs, const Matrix& noise_rows) : refs_(refs) {
    if (refs.rows() == 0) throw Error(ErrorCode::EmptyInput, "BssProjector: no reference sources");
    if (noise_rows.rows() > 0 && noise_rows.cols() != refs.cols())
      throw Error(ErrorCode::ShapeMismatch, "BssProjector: noise rows and references differ in length");
    require_finite(refs, "reference sources");
    Index rank = 0;
    ref_basis_ = detail::orthonormal_basis(refs.transpose(), &rank);
    if (rank < refs.rows()) throw Error(ErrorCode::DegenerateSpan, "reference sources are linearly dependent");
    if (noise_rows.rows() > 0) {
      require_finite(noise_rows, "noise rows");
      const Matrix zt = noise_rows.transpose();
      Matrix residual = zt - ref_basis_ * (ref_basis_.transpose() * zt);
      // Rank is judged against the original noise scale, not the residual's.
      const double scale = zt.norm();
      if (scale > 0.0 && residual.norm() > 1e-10 * scale) {
        Eigen::ColPivHouseholderQR<Matrix> qr(residual);
        qr.setThreshold(1e-10 * scale / residual.norm());
        Matrix q = Matrix::Identity(residual.rows(), qr.rank());
        q.applyOnTheLeft(qr.householderQ());
        noise_basis_ = std::move(q);
      }
    }
    if (noise_basis_.size() == 0) noise_basis_ = Matrix(refs.cols(), 0);
  }

  Index sources() const { return refs_.rows(); }
  Index length() const { return refs_.cols(); }

  BssDecomposition decompose(const Vector& s_est, Index paired_index) const {
    if (paired_index < 0 || paired_index >= refs_.rows())
      throw Error(ErrorCode::InvalidArgument, "decompose_bss: paired index out of range");
    if (s_est.size() != refs_.cols()) throw Error(ErrorCode::ShapeMismatch, "decompose_bss: estimate length");
    BssDecomposition d;
    const Vector ref = refs_.row(paired_index).transpose();
    d.target = (ref.dot(s_est) / ref.dot(ref)) * ref;
    // Everything else is carved out of the distortion s − target so that an
    // exact estimate yields exactly zero distortion.
    const Vector distortion = s_est - d.target;
    d.interf = ref_basis_ * (ref_basis_.transpose() * distortion);
    d.noise = noise_basis_ * (noise_basis_.transpose() * distortion);
    d.artifacts = distortion - d.interf - d.noise;
    return d;
  }

  /// SDR (dB, uncapped) of estimate `s_est` against reference j.
  double sdr_against(const Vector& s_est, Index j) const {
    const Vector ref = refs_.row(j).transpose();
    const Vector target = (ref.dot(s_est) / ref.dot(ref)) * ref;
    return sdr_from_energies(target.squaredNorm(), (s_est - target).squaredNorm());
  }

  static double sdr_from_energies(double target_energy, double distortion_energy) {
    if (!(target_energy > 0.0)) return -std::numeric_limits<double>::infinity();
    if (distortion_energy < 1e-300) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(target_energy / distortion_energy);
  }

 private:
  Matrix refs_;
  Matrix ref_basis_;
  Matrix noise_basis_;
};

inline BssDecomposition decompose_bss(const Vector& s_est, const Matrix& ref_sources, const Matrix& noise_rows,
                                      Index paired_index) {
  return BssProjector(ref_sources, noise_rows).decompose(s_est, paired_index);
}

/// 10 log₁₀(‖target‖² / ‖interf + noise + artifacts‖²). A zero target gives
/// −∞; a distortion energy below 1e−300 gives +∞.
inline double sdr(const BssDecomposition& d) {
  return BssProjector::sdr_from_energies(d.target.squaredNorm(), (d.interf + d.noise + d.artifacts).squaredNorm());
}

struct PairingResult {
  /// permutation[i] is the reference index paired with estimate i.
  std::vector<Index> permutation;
  /// Capped SDR of each estimate against its paired reference.
  Vector per_source_sdr_db;
  double mean_sdr_db = 0.0;
  /// Capped SDR of estimate i against reference j.
  Matrix sdr_matrix;
};

/// Maximum-weight perfect matching on a square weight matrix (Hungarian
/// method with potentials, O(r³)). Returns the column assigned to each row.
inline std::vector<Index> max_weight_assignment(const Matrix& weight) {
  const Index r = weight.rows();
  if (weight.cols() != r) throw Error(ErrorCode::ShapeMismatch, "assignment needs a square matrix");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start node.
  std::vector<double> u(r + 1, 0.0), v(r + 1, 0.0);
  std::vector<Index> match(r + 1, 0), way(r + 1, 0);
  for (Index i = 1; i <= r; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(r + 1, inf);
    std::vector<char> used(r + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = match[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= r; ++j) {
        if (used[j]) continue;
        const double cur = -weight(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= r; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(r);
  for (Index j = 1; j <= r; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

/// Pairs estimated and reference sources one-to-one, maximizing the sum of
/// capped SDRs in dB.
inline PairingResult pair_sources(const Matrix& s_est, const Matrix& s_ref, const Matrix& noise_rows) {
  if (s_est.rows() != s_ref.rows() || s_est.cols() != s_ref.cols())
    throw Error(ErrorCode::ShapeMismatch, "pair_sources: estimate and reference shapes differ");
  const BssProjector projector(s_ref, noise_rows);
  const Index r = s_ref.rows();
  PairingResult out;
  out.sdr_matrix.resize(r, r);
  for (Index i = 0; i < r; ++i) {
    const Vector s = s_est.row(i).transpose();
    for (Index j = 0; j < r; ++j) out.sdr_matrix(i, j) = cap_db(projector.sdr_against(s, j));
  }
  out.permutation = max_weight_assignment(out.sdr_matrix);
  out.per_source_sdr_db.resize(r);
  for (Index i = 0; i < r; ++i) out.per_source_sdr_db(i) = out.sdr_matrix(i, out.permutation[i]);
  out.mean_sdr_db = out.per_source_sdr_db.mean();
  return out;
}

/// (√n − ‖x‖₁/‖x‖₂)/(√n − 1); 1 for a one-hot vector, 0 for a constant one.
inline double hoyer_sparseness(const Vector& x) {
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "hoyer_sparseness needs at least two entries");
  const double l2 = x.norm();
  if (!(l2 > 0.0)) throw Error(ErrorCode::ZeroVector, "hoyer_sparseness of a zero vector");
  const double root_n = std::sqrt(static_cast<double>(x.size()));
  const double value = (root_n - x.lpNorm<1>() / l2) / (root_n - 1.0);
  return std::clamp(value, 0.0, 1.0);
}

/// σ_max / σ_min; throws SingularMatrix below numerical full column rank.
inline double condition_number(const Matrix& a) {
  if (a.size() == 0) throw Error(ErrorCode::EmptyInput, "condition_number of an empty matrix");
  if (a.rows() < a.cols()) throw Error(ErrorCode::SingularMatrix, "condition_number: more columns than rows");
  const Vector sv = Eigen::JacobiSVD<Matrix>(a).singularValues();
  const double hi = sv(0), lo = sv(sv.size() - 1);
  const double eps = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(a.rows(), a.cols()));
  if (!(hi > 0.0) || lo <= eps * hi) throw Error(ErrorCode::SingularMatrix, "matrix is not of full column rank");
  return hi / lo;
}

/// 10 log₁₀(‖X‖² / ‖Y − X‖²); +∞ when Y equals X.
inline double measure_snr(const Matrix& y, const Matrix& x_clean) {
  require_shape(y.rows() == x_clean.rows() && y.cols() == x_clean.cols(), "measure_snr: shapes differ");
  const double noise = (y - x_clean).squaredNorm();
  if (!(noise > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(x_clean.squaredNorm() / noise);
}

}  // namespace ngmca
