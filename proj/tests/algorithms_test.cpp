#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "ngmca/algorithms.hpp"
#include "ngmca/datagen.hpp"
#include "ngmca/metrics.hpp"
#include "test_util.hpp"

namespace ngmca {
namespace {

using testing::random_gaussian;
using testing::random_uniform;

AlgorithmConfig config(AlgorithmId id, Index r, std::uint64_t seed = 1, int iterations = 0) {
  AlgorithmConfig cfg;
  cfg.algorithm_id = id;
  cfg.rank = r;
  cfg.seed = seed;
  cfg.outer_iterations = iterations;
  return cfg;
}

double relative_residual(const Matrix& y, const FactorPair& p) { return (y - p.A * p.S).norm() / y.norm(); }

ProblemInstance small_instance(Index m, Index n, Index r, double p_s, double snr, std::uint64_t seed) {
  InstanceSpec spec;
  spec.m = m;
  spec.n = n;
  spec.r = r;
  spec.p_S = p_s;
  spec.snr_db = snr;
  spec.seed = seed;
  return gen_instance(spec);
}

// --- initialize ----------------------------------------------------------

TEST(Initialize, DeterministicNonNegativeHalfNormal) {
  const Matrix y = Matrix::Zero(200, 300);
  const FactorPair a = initialize(y, 200, 5), b = initialize(y, 200, 5);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.S, b.S);
  EXPECT_GE(a.A.minCoeff(), 0.0);
  EXPECT_GE(a.S.minCoeff(), 0.0);
  const double half_normal_mean = std::sqrt(2.0 / std::numbers::pi);
  EXPECT_NEAR(a.A.mean(), half_normal_mean, 0.02 * half_normal_mean);  // 4·10⁴ entries
  EXPECT_NEAR(a.S.mean(), half_normal_mean, 0.02 * half_normal_mean);  // 6·10⁴ entries
  EXPECT_NE(initialize(y, 200, 6).A, a.A);
}

// --- nGMCA naive ----------------------------------------------------------

TEST(NgmcaNaive, FitsExactlyFactorizableTinyProblem) {
  const ProblemInstance inst = small_instance(4, 4, 2, 0.3, kNoiseless, 11);
  AlgorithmConfig cfg = config(AlgorithmId::ngmca_naive, 2, 3, 200);
  cfg.tau_final = 0.0;
  const RunResult res = ngmca_naive(inst.Y, cfg);
  EXPECT_LE(relative_residual(inst.Y, res.factors), 1e-3);
  EXPECT_GE(res.factors.A.minCoeff(), 0.0);
  EXPECT_GE(res.factors.S.minCoeff(), 0.0);
}

TEST(NgmcaNaive, RecoversRankOneFactors) {
  std::mt19937_64 gen(12);
  const Matrix a = random_uniform(20, 1, gen, 0.1, 1.0);
  Matrix s = random_uniform(1, 60, gen);
  s = s.cwiseProduct((random_uniform(1, 60, gen).array() < 0.3).cast<double>().matrix());
  AlgorithmConfig cfg = config(AlgorithmId::ngmca_naive, 1, 4, 100);
  cfg.tau_final = 0.0;
  const RunResult res = ngmca_naive(a * s, cfg);
  const PairingResult p = pair_sources(res.factors.S, s, Matrix(0, 60));
  EXPECT_GE(p.mean_sdr_db, 60.0);
}

TEST(NgmcaNaive, DoesNotConvergeOnDenseSources) {
  // Many dense sources without noise: the hard-thresholded least-squares
  // iteration keeps oscillating during the refinement phase.
  const ProblemInstance inst = small_instance(200, 200, 40, 0.8, kNoiseless, 3);
  AlgorithmConfig cfg = config(AlgorithmId::ngmca_naive, 40);
  cfg.tau_final = 0.0;
  const RunResult res = ngmca_naive(inst.Y, cfg);
  int increases = 0;
  for (std::size_t k = 401; k < res.objective.size(); ++k) increases += res.objective[k] > res.objective[k - 1];
  EXPECT_GT(increases, 10);
  EXPECT_GE(res.factors.S.minCoeff(), 0.0);
}

// --- nGMCA with exact sub-problems --------------------------------------------

TEST(Ngmca, NoiselessRecoveryMedianSdr) {
  std::vector<double> sdrs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProblemInstance inst = small_instance(50, 50, 5, 0.1, kNoiseless, seed);
    AlgorithmConfig cfg = config(AlgorithmId::ngmca_s, 5, seed);
    cfg.tau_final = 0.0;
    const RunResult res = ngmca_exact(inst.Y, cfg);
    sdrs.push_back(pair_sources(res.factors.S, inst.S_ref, inst.Z).mean_sdr_db);
  }
  std::sort(sdrs.begin(), sdrs.end());
  EXPECT_GE(0.5 * (sdrs[4] + sdrs[5]), 25.0);
}

TEST(Ngmca, ZeroLambdaWithFixedMixingReducesToOracle) {
  const ProblemInstance inst = small_instance(30, 40, 4, 0.3, 20.0, 13);
  SubsolverOptions tight;
  tight.max_inner_iterations = 20000;
  tight.rel_tol = 1e-14;
  // The S step of an nGMCA iteration on the normalized A_ref at λ = 0.
  const ColumnNormalization cn = normalize_columns(inst.A_ref);
  Matrix s = fista_update_S(inst.Y, cn.normalized, Vector::Zero(4), Matrix::Zero(4, 40), tight);
  for (Index i = 0; i < 4; ++i) s.row(i) /= cn.scales(i);
  OracleOptions oo;
  oo.solver = tight;
  const OracleResult o = oracle_solve(inst.Y, inst.A_ref, 0.0, oo);
  EXPECT_LT((s - o.S).cwiseAbs().maxCoeff(), 1e-8 * o.S.cwiseAbs().maxCoeff());
}

TEST(Ngmca, SoftBeatsAlsOnNoisySparseData) {
  double soft = 0.0, als_sdr = 0.0;
  const int trials = 24;
  for (int seed = 0; seed < trials; ++seed) {
    const ProblemInstance inst = small_instance(100, 100, 15, 0.3, 15.0, 100 + static_cast<std::uint64_t>(seed));
    AlgorithmConfig cfg = config(AlgorithmId::ngmca_s, 15, static_cast<std::uint64_t>(seed));
    cfg.record_objective = false;
    soft += pair_sources(ngmca_exact(inst.Y, cfg).factors.S, inst.S_ref, inst.Z).mean_sdr_db;
    cfg.algorithm_id = AlgorithmId::als;
    als_sdr += pair_sources(als(inst.Y, cfg).factors.S, inst.S_ref, inst.Z).mean_sdr_db;
  }
  EXPECT_GT(soft / trials, als_sdr / trials);
}

TEST(Ngmca, SoftOutputIsStablePair) {
  const ProblemInstance inst = small_instance(60, 80, 6, 0.3, 20.0, 14);
  const AlgorithmConfig cfg = config(AlgorithmId::ngmca_s, 6, 2);
  const RunResult res = ngmca_exact(inst.Y, cfg);
  EXPECT_LE(stability_move(inst.Y, res.factors, res.lambda, cfg.subsolver), 1e-5);
  EXPECT_GE(res.iterations, cfg.iterations());
  EXPECT_LE(res.iterations, cfg.iterations() + cfg.max_extra_refinement);
}

TEST(Ngmca, RefinementObjectiveIsNonIncreasing) {
  const ProblemInstance inst = small_instance(60, 60, 8, 0.5, kNoiseless, 15);
  for (AlgorithmId id : {AlgorithmId::ngmca_s, AlgorithmId::ngmca_h}) {
    AlgorithmConfig cfg = config(id, 8, 3, 200);
    cfg.tau_final = 0.0;
    const RunResult res = ngmca_exact(inst.Y, cfg);
    ASSERT_EQ(res.reinitializations, 0);
    if (id == AlgorithmId::ngmca_h) continue;  // only the soft variant carries the guarantee
    for (std::size_t k = static_cast<std::size_t>(cfg.decreasing_iterations()) + 1; k < res.objective.size(); ++k)
      EXPECT_LE(res.objective[k], res.objective[k - 1] * (1 + 1e-12) + 1e-12) << "iteration " << k + 1;
  }
}

TEST(Ngmca, HardVariantRunsAndStaysNonNegative) {
  const ProblemInstance inst = small_instance(40, 50, 5, 0.2, 20.0, 16);
  const RunResult res = ngmca_exact(inst.Y, config(AlgorithmId::ngmca_h, 5, 4, 100));
  EXPECT_EQ(res.iterations, 100);
  EXPECT_GE(res.factors.A.minCoeff(), 0.0);
  EXPECT_GE(res.factors.S.minCoeff(), 0.0);
  EXPECT_GT(pair_sources(res.factors.S, inst.S_ref, inst.Z).mean_sdr_db, 5.0);
}

TEST(Ngmca, DeterministicGivenSeed) {
  const ProblemInstance inst = small_instance(30, 30, 3, 0.3, 20.0, 17);
  const AlgorithmConfig cfg = config(AlgorithmId::ngmca_s, 3, 9, 50);
  const RunResult a = ngmca_exact(inst.Y, cfg), b = ngmca_exact(inst.Y, cfg);
  EXPECT_EQ(a.factors.A, b.factors.A);
  EXPECT_EQ(a.factors.S, b.factors.S);
}

// --- ALS -------------------------------------------------------------------

TEST(Als, FitsRankOneData) {
  std::mt19937_64 gen(20);
  const Matrix y = random_uniform(15, 1, gen, 0.1, 1.0) * random_uniform(1, 25, gen, 0.1, 1.0);
  const RunResult res = als(y, config(AlgorithmId::als, 1, 1, 50));
  EXPECT_LE(relative_residual(y, res.factors), 1e-6);
}

TEST(Als, OneIterationIsProjectedLeastSquares) {
  std::mt19937_64 gen(21);
  const Matrix y = random_uniform(12, 20, gen);
  const FactorPair p0 = initialize(y, 3, 7);
  const FactorPair p1 = als(y, config(AlgorithmId::als, 3, 7, 1)).factors;
  const Matrix a = nonneg_project(least_squares_solve_A(p0.S, y));
  const Matrix s = nonneg_project(least_squares_solve_S(a, y));
  EXPECT_LT((p1.A - a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p1.S - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Als, ObjectiveCanIncrease) {
  std::mt19937_64 gen(1);
  bool found = false;
  for (int trial = 0; trial < 200 && !found; ++trial) {
    const Matrix y = random_uniform(6, 6, gen);
    const RunResult res = als(y, config(AlgorithmId::als, 3, static_cast<std::uint64_t>(trial), 30));
    for (std::size_t k = 1; k < res.objective.size(); ++k)
      if (res.objective[k] > res.objective[k - 1] * (1 + 1e-9)) found = true;
  }
  EXPECT_TRUE(found);
}

// --- Multiplicative updates -------------------------------------------------

TEST(MultiplicativeUpdate, ExactFactorizationIsFixedPoint) {
  std::mt19937_64 gen(30);
  const FactorPair p{random_uniform(8, 3, gen, 0.5, 1.5), random_uniform(3, 9, gen, 0.5, 1.5)};
  const FactorPair q = mu_step(p.A * p.S, p);
  EXPECT_LT((q.A - p.A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((q.S - p.S).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiplicativeUpdate, ObjectiveIsNonIncreasing) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix y = random_uniform(20, 20, gen);
    const RunResult res = multiplicative_update(y, config(AlgorithmId::mu, 3, static_cast<std::uint64_t>(trial), 500));
    ASSERT_EQ(res.objective.size(), 500u);
    for (std::size_t k = 1; k < res.objective.size(); ++k) ASSERT_LE(res.objective[k], res.objective[k - 1] + 1e-10);
    EXPECT_GE(res.factors.A.minCoeff(), 0.0);
    EXPECT_GE(res.factors.S.minCoeff(), 0.0);
  }
}

TEST(MultiplicativeUpdate, ZeroEntriesStayZero) {
  std::mt19937_64 gen(32);
  const Matrix y = random_uniform(10, 12, gen);
  FactorPair p{random_uniform(10, 3, gen, 0.1, 1.0), random_uniform(3, 12, gen, 0.1, 1.0)};
  p.A(2, 1) = 0.0;
  p.S(0, 5) = 0.0;
  for (int k = 0; k < 50; ++k) p = mu_step(y, std::move(p));
  EXPECT_EQ(p.A(2, 1), 0.0);
  EXPECT_EQ(p.S(0, 5), 0.0);
}

// --- Sparse HALS -------------------------------------------------------------

TEST(HalsSparse, PlainHalsFitsExactRankTwo) {
  std::mt19937_64 gen(40);
  const Matrix y = random_uniform(12, 2, gen, 0.1, 1.0) * random_uniform(2, 15, gen, 0.0, 1.0);
  const RunResult res = hals_sparse(y, config(AlgorithmId::hals_sparse, 2, 1, 2000));
  EXPECT_LE(relative_residual(y, res.factors), 1e-6);
  EXPECT_EQ(res.lambda(0), 0.0);
}

TEST(HalsSparse, SingleSourceUpdateIsProxOfLeastSquaresCoefficient) {
  // Orthonormal columns decouple the sources, so one sweep gives the closed form.
  Matrix a = Matrix::Zero(4, 2);
  a(0, 0) = a(1, 0) = a(2, 1) = a(3, 1) = std::sqrt(0.5);
  std::mt19937_64 gen(41);
  const Matrix y = random_gaussian(4, 6, gen);
  Matrix s = random_uniform(2, 6, gen);
  const double lambda = 0.2;
  hals_source_sweep(a.transpose() * a, a.transpose() * y, lambda, s);
  EXPECT_LT((s - prox_nonneg_l1(a.transpose() * y, lambda)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(HalsSparse, HitsTargetSparsity) {
  for (double target : {0.5, 0.7, 0.9}) {
    const ProblemInstance inst = small_instance(40, 80, 4, 0.3, 20.0, 42);
    AlgorithmConfig cfg = config(AlgorithmId::hals_sparse, 4, 5, 300);
    cfg.sparsity_target = target;
    const RunResult res = hals_sparse(inst.Y, cfg);
    EXPECT_NEAR(sparsity_rate(res.factors.S), target, 0.02) << "target " << target;
    EXPECT_GE(res.factors.S.minCoeff(), 0.0);
  }
}

// --- Oracle -------------------------------------------------------------------

TEST(Oracle, NoiselessZeroTauRecoversSources) {
  const ProblemInstance inst = small_instance(30, 50, 5, 0.2, kNoiseless, 50);
  const OracleResult o = oracle_solve(inst.Y, inst.A_ref, 0.0);
  EXPECT_LT((o.S - inst.S_ref).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Oracle, IdentityMixingIsSoftThreshold) {
  std::mt19937_64 gen(51);
  const Matrix y = random_gaussian(5, 40, gen);
  const OracleResult o = oracle_solve(y, Matrix::Identity(5, 5), 1.0);
  Matrix expected = y;
  prox_nonneg_l1_rows_inplace(expected, o.lambda);
  EXPECT_LT((o.S - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE((o.lambda.array() > 0.0).all());
}

TEST(Oracle, MatchesGridSearchOnTinyNoisyProblem) {
  std::mt19937_64 gen(52);
  const Matrix a = random_uniform(4, 2, gen, 0.1, 1.0);
  const Matrix s_true = random_uniform(2, 30, gen);
  const Matrix y = a * s_true + 0.05 * random_gaussian(4, 30, gen);
  const OracleResult o = oracle_solve(y, a, 1.0);
  // o.lambda applies to the sources of the normalized mixing matrix.
  const Vector scales = a.colwise().norm();
  for (Index j = 0; j < 3; ++j) {
    const Vector yj = y.col(j);
    auto f = [&](const Vector& v) {
      return 0.5 * (yj - a * v).squaredNorm() + o.lambda.dot(scales.cwiseProduct(v));
    };
    const Vector oracle = testing::grid_minimize(f, 2, 10.0);
    EXPECT_LT((o.S.col(j) - oracle).cwiseAbs().maxCoeff(), 1e-3);
  }
}

// --- Shared invariants -----------------------------------------------------------

TEST(Algorithms, AllOutputsAreNonNegative) {
  const ProblemInstance inst = small_instance(20, 30, 3, 0.3, 10.0, 60);
  for (AlgorithmId id : {AlgorithmId::ngmca_naive, AlgorithmId::ngmca_s, AlgorithmId::ngmca_h, AlgorithmId::als,
                         AlgorithmId::mu, AlgorithmId::hals_sparse, AlgorithmId::oracle}) {
    AlgorithmConfig cfg = config(id, 3, 2, id == AlgorithmId::mu ? 500 : 60);
    if (id == AlgorithmId::hals_sparse) cfg.sparsity_target = 0.6;
    const RunResult res = run_algorithm(inst.Y, cfg, &inst.A_ref);
    EXPECT_GE(res.factors.A.minCoeff(), 0.0) << to_string(id);
    EXPECT_GE(res.factors.S.minCoeff(), 0.0) << to_string(id);
    EXPECT_FALSE(res.objective.empty()) << to_string(id);
    EXPECT_EQ(parse_algorithm_id(to_string(id)), id);
  }
}

TEST(Algorithms, ProductIsInvariantUnderScaleAndPermutation) {
  const ProblemInstance inst = small_instance(20, 30, 4, 0.3, 20.0, 61);
  const FactorPair p = ngmca_exact(inst.Y, config(AlgorithmId::ngmca_s, 4, 1, 60)).factors;
  const Vector d = Vector::LinSpaced(4, 0.5, 2.0);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Matrix a2 = p.A * d.asDiagonal() * perm;
  const Matrix s2 = perm.transpose() * (d.cwiseInverse().asDiagonal() * p.S);
  EXPECT_LE((a2 * s2 - p.A * p.S).norm(), 1e-12 * (p.A * p.S).norm());
}

TEST(Algorithms, RejectsBadInputs) {
  const Matrix y = Matrix::Ones(5, 4);
  EXPECT_THROW((void)run_algorithm(y, config(AlgorithmId::als, 5)), Error);
  Matrix nan = y;
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW((void)run_algorithm(nan, config(AlgorithmId::als, 2)), Error);
  EXPECT_THROW((void)run_algorithm(y, config(AlgorithmId::oracle, 2)), Error);
  EXPECT_THROW((void)parse_algorithm_id("nmf"), Error);
}

TEST(DeadSourceGuard, RefillsWithinBudget) {
  detail::DeadSourceGuard guard(3, 2);
  Matrix s = Matrix::Zero(2, 5);
  s(1, 0) = 4.0;
  for (int round = 0; round < kReinitBudget; ++round) {
    ASSERT_TRUE(guard.revive_sources(s));
    EXPECT_GT(s.row(0).minCoeff(), 0.0);
    EXPECT_LE(s.row(0).maxCoeff(), 0.01 * 4.0 * 6.0);
    s.row(0).setZero();
  }
  EXPECT_FALSE(guard.revive_sources(s));
  EXPECT_EQ(guard.total(), kReinitBudget);
}

}  // namespace
}  // namespace ngmca
