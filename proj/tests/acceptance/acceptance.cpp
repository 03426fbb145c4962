// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance                 run every criterion
//   acceptance 3 5 11          run the listed criteria only
//   acceptance --record-baseline
//                              measure the noiseless-recovery median and
//                              store it in baselines.json

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ngmca/algorithms.hpp"
#include "ngmca/bench.hpp"
#include "ngmca/datagen.hpp"
#include "ngmca/metrics.hpp"
#include "ngmca/nmr.hpp"
#include "ngmca/priors.hpp"
#include "ngmca/subsolvers.hpp"
#include "test_util.hpp"

namespace {

using namespace ngmca;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::filesystem::path baseline_path() { return std::filesystem::path(NGMCA_ACCEPTANCE_DIR) / "baselines.json"; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// 1 ---------------------------------------------------------------------------
Outcome conditioning_table() {
  const auto t0 = Clock::now();
  BenchmarkConfig cfg;
  cfg.grid.r = {35};
  cfg.grid.m = {200};
  cfg.grid.n = {200};
  cfg.grid.alpha_A = {0.5, 0.9, 2.0, 4.0};
  cfg.trials_per_cell = 48;
  cfg.base_seed = 1;
  const auto summary = summarize(run_campaign(cfg, {.workers = worker_count()}));
  const double expected[] = {6.90, 9.43, 12.9, 15.3};
  bool pass = summary.size() == 4;
  std::string detail = "mean cond(A_ref):";
  for (std::size_t i = 0; i < summary.size() && i < 4; ++i) {
    const double rel = summary[i].mean / expected[i] - 1.0;
    pass = pass && std::abs(rel) <= 0.15 && summary[i].count == 48;
    detail += fmt(" alpha=%g %.2f (ref %.2f, %+.1f%%)", summary[i].cell.alpha_A, summary[i].mean, expected[i], 100 * rel);
  }
  const double dt = seconds_since(t0);
  pass = pass && dt < 60.0;
  return {pass, detail + fmt("; %.1f s", dt)};
}

// 2 ---------------------------------------------------------------------------
Outcome subsolver_exactness() {
  const auto t0 = Clock::now();
  SubsolverOptions tight;
  tight.max_inner_iterations = 20000;
  tight.rel_tol = 1e-14;
  std::mt19937_64 gen(2024);

  double worst_nnls = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = testing::random_gaussian(4, 3, gen);
    const Matrix y = testing::random_gaussian(4, 1, gen);
    const Matrix s = fista_update_S(y, a, Vector::Zero(3), Matrix::Zero(3, 1), tight);
    const Vector oracle = testing::nnls_l1_enumerate(a, y.col(0), 0.0);
    worst_nnls = std::max(worst_nnls, (s.col(0) - oracle).cwiseAbs().maxCoeff());
  }

  double worst_grid = 0.0;
  for (int dim = 1; dim <= 2; ++dim) {
    for (int trial = 0; trial < 25; ++trial) {
      const Matrix a = testing::random_uniform(4, dim, gen, 0.1, 1.0);
      const Matrix y = testing::random_uniform(4, 1, gen, 0.0, 2.0);
      const double lambda = std::uniform_real_distribution<double>(0.01, 0.5)(gen);
      const Matrix s = fista_update_S(y, a, Vector::Constant(dim, lambda), Matrix::Zero(dim, 1), tight);
      const Vector yj = y.col(0);
      auto f = [&](const Vector& v) { return 0.5 * (yj - a * v).squaredNorm() + lambda * v.sum(); };
      const Vector oracle = testing::grid_minimize(f, dim, 20.0);
      worst_grid = std::max(worst_grid, (s.col(0) - oracle).cwiseAbs().maxCoeff());
    }
  }
  const double dt = seconds_since(t0);
  const bool pass = worst_nnls <= 1e-6 && worst_grid <= 1e-3 && dt < 60.0;
  return {pass, fmt("lambda=0 vs support enumeration: max err %.2e (tol 1e-6); lambda>0 vs 1-D/2-D grid: max err %.2e "
                    "(tol 1e-3); %.1f s",
                    worst_nnls, worst_grid, dt)};
}

// 3 ---------------------------------------------------------------------------
Outcome prox_identities() {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> xs(-5.0, 5.0), ls(0.0, 3.0);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    double x = xs(gen);
    const double lambda = ls(gen);
    // Every 10th draw sits exactly on the threshold boundary.
    if (i % 10 == 0) x = (i % 20 == 0) ? lambda : -lambda;
    // Skewed soft thresholding is the positive part of soft thresholding.
    const double soft_pos = std::max(x - lambda, 0.0);
    if (prox_nonneg_l1(x, lambda) != soft_pos) ++mismatches;
    Matrix m(1, 1);
    m(0, 0) = x;
    prox_nonneg_l1_rows_inplace(m, Vector::Constant(1, lambda));
    if (m(0, 0) != soft_pos) ++mismatches;
    // Soft: zero on |x| <= λ, shift by λ toward zero outside.
    const double soft_ref = std::abs(x) <= lambda ? 0.0 : x - std::copysign(lambda, x);
    if (soft_threshold(x, lambda) != soft_ref) ++mismatches;
    // Hard: zero for |x| < λ, identity for |x| >= λ.
    const double hard_ref = std::abs(x) < lambda ? 0.0 : x;
    if (hard_threshold(x, lambda) != hard_ref) ++mismatches;
    m(0, 0) = x;
    hard_nonneg_rows_inplace(m, Vector::Constant(1, lambda));
    if (m(0, 0) != std::max(hard_ref, 0.0)) ++mismatches;
  }
  return {mismatches == 0, fmt("10^4 scalars (10%% on the boundary), %d mismatches", mismatches)};
}

// 4 ---------------------------------------------------------------------------
Outcome mu_monotonicity() {
  double worst_increase = -std::numeric_limits<double>::infinity();
  int bad = 0;
  for (int t = 0; t < 20; ++t) {
    InstanceSpec spec;
    spec.m = 20;
    spec.n = 20;
    spec.r = 3;
    spec.p_S = 0.5;
    spec.seed = 400 + static_cast<std::uint64_t>(t);
    const ProblemInstance inst = gen_instance(spec);
    AlgorithmConfig cfg;
    cfg.algorithm_id = AlgorithmId::mu;
    cfg.rank = 3;
    cfg.outer_iterations = 500;
    cfg.seed = spec.seed;
    const RunResult res = run_algorithm(inst.Y, cfg);
    FactorPair p0 = initialize(inst.Y, 3, cfg.seed);
    std::vector<double> seq{half_squared_residual(inst.Y, p0.A, p0.S)};
    seq.insert(seq.end(), res.objective.begin(), res.objective.end());
    if (seq.size() != 501) ++bad;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      const double inc = seq[k] - seq[k - 1];
      worst_increase = std::max(worst_increase, inc);
      if (inc > 1e-10) ++bad;
    }
  }
  return {bad == 0, fmt("20 instances x 500 iterations: largest step change %.3e (slack 1e-10), %d violations",
                        worst_increase, bad)};
}

// 5 ---------------------------------------------------------------------------
Outcome sdr_invariants() {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_complete = 0.0, worst_orth = 0.0, worst_collinear = 0.0, worst_scale = 0.0, worst_pair = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const Index r = 2 + inst % 5;
    const Index n = 40;
    const Matrix refs = testing::random_uniform(r, n, gen);
    const Matrix noise = testing::random_gaussian(3, n, gen);
    const BssProjector proj(refs, noise);
    for (Index j = 0; j < r; ++j) {
      Vector s = (1.0 + unit(gen)) * refs.row(j).transpose();
      for (Index k = 0; k < r; ++k)
        if (k != j) s += 0.2 * unit(gen) * refs.row(k).transpose();
      s += 0.1 * noise.transpose() * testing::random_gaussian(3, 1, gen);
      s += 0.05 * testing::random_gaussian(n, 1, gen);
      const BssDecomposition d = proj.decompose(s, j);
      const double s2 = s.squaredNorm();
      worst_complete = std::max(worst_complete, (d.target + d.interf + d.noise + d.artifacts - s).norm() / s.norm());
      const Vector* parts[] = {&d.target, &d.interf, &d.noise, &d.artifacts};
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) worst_orth = std::max(worst_orth, std::abs(parts[a]->dot(*parts[b])) / s2);
      const Vector ref = refs.row(j).transpose();
      const double cosine = std::abs(d.target.dot(ref)) / (d.target.norm() * ref.norm());
      worst_collinear = std::max(worst_collinear, 1.0 - cosine);
      const double c = std::exp(std::uniform_real_distribution<double>(-5.0, 5.0)(gen));
      worst_scale = std::max(worst_scale, std::abs(sdr(proj.decompose(c * s, j)) - sdr(d)));
    }

    if (r <= 6) {
      std::vector<Index> perm(static_cast<std::size_t>(r));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), gen);
      Matrix est(r, n);
      for (Index i = 0; i < r; ++i)
        est.row(i) = refs.row(perm[static_cast<std::size_t>(i)]) + 0.3 * testing::random_uniform(1, n, gen) +
                     0.3 * unit(gen) * refs.row((perm[static_cast<std::size_t>(i)] + 1) % r);
      const PairingResult pr = pair_sources(est, refs, noise);
      std::vector<Index> q(static_cast<std::size_t>(r));
      std::iota(q.begin(), q.end(), 0);
      double best = -std::numeric_limits<double>::infinity();
      do {
        double total = 0.0;
        for (Index i = 0; i < r; ++i) total += pr.sdr_matrix(i, q[static_cast<std::size_t>(i)]);
        best = std::max(best, total);
      } while (std::next_permutation(q.begin(), q.end()));
      double chosen = 0.0;
      for (Index i = 0; i < r; ++i) chosen += pr.sdr_matrix(i, pr.permutation[static_cast<std::size_t>(i)]);
      worst_pair = std::max(worst_pair, best - chosen);
      std::set<Index> image(pr.permutation.begin(), pr.permutation.end());
      if (static_cast<Index>(image.size()) != r) worst_pair = std::numeric_limits<double>::infinity();
    }
  }
  const bool pass = worst_complete <= 1e-9 && worst_orth <= 1e-8 && worst_collinear <= 1e-12 && worst_scale <= 1e-9 &&
                    worst_pair <= 1e-9;
  return {pass, fmt("100 instances: completeness %.1e (1e-9), orthogonality %.1e (1e-8), collinearity %.1e, scale "
                    "invariance %.1e dB (1e-9), assignment gap vs enumeration %.1e dB",
                    worst_complete, worst_orth, worst_collinear, worst_scale, worst_pair)};
}

// 6 ---------------------------------------------------------------------------
Outcome sampler_moments() {
  auto excess_kurtosis = [](const Vector& x, double* variance) {
    const Eigen::ArrayXd c = x.array() - x.mean();
    const double m2 = c.square().mean();
    *variance = m2;
    return c.square().square().mean() / (m2 * m2) - 3.0;
  };
  double var2 = 0.0, var1 = 0.0;
  const double k2 = excess_kurtosis(sample_generalized_gaussian(2.0, 1000000, 61), &var2);
  const double k1 = excess_kurtosis(sample_generalized_gaussian(1.0, 1000000, 62), &var1);
  const Matrix half = gen_factor(1, 100000, 1.0, 2.0, 63);
  const double hn_mean = half.mean();
  const double hn_ref = std::sqrt(2.0 / std::numbers::pi);
  const bool pass = std::abs(k2) <= 0.1 && std::abs(var2 - 1.0) <= 0.02 && std::abs(k1 - 3.0) <= 0.2 &&
                    std::abs(var1 - 1.0) <= 0.02 && std::abs(hn_mean / hn_ref - 1.0) <= 0.02;
  return {pass, fmt("alpha=2: excess kurtosis %.4f (0 +- 0.1), variance %.4f; alpha=1: excess kurtosis %.4f (3 +- 0.2), "
                    "variance %.4f; half-normal mean %.4f (%.4f +- 2%%)",
                    k2, var2, k1, var1, hn_mean, hn_ref)};
}

// 7 ---------------------------------------------------------------------------
Outcome stability_certificate() {
  double worst = 0.0, naive_min = std::numeric_limits<double>::infinity(), naive_max = 0.0;
  int extra_max = 0;
  for (int t = 0; t < 10; ++t) {
    InstanceSpec spec;
    spec.m = 100;
    spec.n = 100;
    spec.r = 10;
    spec.p_S = 0.3;
    spec.snr_db = 20.0;
    spec.seed = 700 + static_cast<std::uint64_t>(t);
    const ProblemInstance inst = gen_instance(spec);
    AlgorithmConfig cfg;
    cfg.algorithm_id = AlgorithmId::ngmca_s;
    cfg.rank = 10;
    cfg.seed = spec.seed;
    cfg.record_objective = false;
    const RunResult res = run_algorithm(inst.Y, cfg);
    worst = std::max(worst, stability_move(inst.Y, res.factors, res.lambda, cfg.subsolver));
    extra_max = std::max(extra_max, res.iterations - cfg.iterations());

    // Reported only: the naive variant is exempt.
    AlgorithmConfig naive = cfg;
    naive.algorithm_id = AlgorithmId::ngmca_naive;
    naive.outer_iterations = cfg.iterations();
    const RunResult a = run_algorithm(inst.Y, naive);
    naive.outer_iterations = cfg.iterations() + 1;
    const RunResult b = run_algorithm(inst.Y, naive);
    const double move = std::max(relative_change(b.factors.A, a.factors.A), relative_change(b.factors.S, a.factors.S));
    naive_min = std::min(naive_min, move);
    naive_max = std::max(naive_max, move);
  }
  return {worst <= 1e-5, fmt("nGMCA^S worst one-alternation move %.2e (bound 1e-5, up to %d refinement iterations past "
                             "K); naive (exempt) moves %.1e..%.1e",
                             worst, extra_max, naive_min, naive_max)};
}

// 8 ---------------------------------------------------------------------------
Outcome qualitative_ordering() {
  const auto t0 = Clock::now();
  BenchmarkConfig cfg;
  cfg.grid.r = {15};
  cfg.grid.m = {100};
  cfg.grid.n = {100};
  cfg.grid.p_S = {0.1, 0.3};
  cfg.grid.snr_db = {10.0, 20.0};
  cfg.trials_per_cell = 24;
  cfg.base_seed = 8;
  for (auto id : {AlgorithmId::ngmca_s, AlgorithmId::als, AlgorithmId::mu, AlgorithmId::oracle}) {
    AlgorithmConfig a;
    a.algorithm_id = id;
    a.tau_final = 1.0;
    cfg.algorithms.push_back(a);
  }
  const auto summary = summarize(run_campaign(cfg, {.workers = worker_count()}));
  auto mean_of = [&](const CellCoords& c, const std::string& algo) {
    for (const auto& s : summary)
      if (s.cell == c && s.algorithm_id == algo) return s.count == 24 ? s.mean : std::numeric_limits<double>::quiet_NaN();
    return std::numeric_limits<double>::quiet_NaN();
  };
  bool pass = true;
  std::string detail;
  for (const auto& s : summary) {
    if (s.algorithm_id != "ngmca_s") continue;
    const double ng = s.mean, als = mean_of(s.cell, "als"), mu = mean_of(s.cell, "mu"), oracle = mean_of(s.cell, "oracle");
    bool ok = ng > als && ng > mu;
    if (s.cell.p_S == 0.1) ok = ok && oracle - ng <= 6.0;
    pass = pass && ok && s.count == 24;
    detail += fmt("[SNR %g, p_S %g: nGMCA^S %.2f, ALS %.2f, MU %.2f, oracle %.2f] ", s.cell.snr_db, s.cell.p_S, ng, als,
                  mu, oracle);
  }
  const double dt = seconds_since(t0);
  pass = pass && dt < 20 * 60.0;
  return {pass, detail + fmt("%.0f s", dt)};
}

// 9 ---------------------------------------------------------------------------
double noiseless_recovery_median() {
  std::vector<double> sdrs;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    InstanceSpec spec;
    spec.m = 50;
    spec.n = 50;
    spec.r = 5;
    spec.p_S = 0.1;
    spec.seed = seed;
    const ProblemInstance inst = gen_instance(spec);
    AlgorithmConfig cfg;
    cfg.algorithm_id = AlgorithmId::ngmca_s;
    cfg.rank = 5;
    cfg.tau_final = 0.0;
    cfg.seed = seed;
    cfg.record_objective = false;
    const RunResult res = run_algorithm(inst.Y, cfg);
    sdrs.push_back(pair_sources(res.factors.S, inst.S_ref, inst.Z).mean_sdr_db);
  }
  return median(sdrs);
}

Outcome noiseless_regression() {
  const double med = noiseless_recovery_median();
  Json baseline;
  try {
    baseline = read_json_file(baseline_path());
  } catch (const Error& e) {
    return {false, fmt("median %.3f dB; no frozen baseline (%s)", med, e.what())};
  }
  const double frozen = baseline.at("noiseless_recovery_median_sdr_db").get<double>();
  return {med >= frozen - 1.0, fmt("median SDR %.3f dB over 10 seeds; frozen baseline %.3f dB (allowed drop 1 dB)", med,
                                   frozen)};
}

// 10 --------------------------------------------------------------------------
Outcome nmr_pipeline() {
  BenchmarkConfig cfg;
  cfg.sources = SourceModel::nmr;
  cfg.nmr_corpus = NGMCA_CORPUS_DIR;
  cfg.fwhm_samples = 3.0;
  cfg.grid.m = {15};
  cfg.grid.n = {1200};
  cfg.grid.alpha_A = {2.0};
  cfg.grid.snr_db = {15.0};
  cfg.trials_per_cell = 12;
  cfg.base_seed = 10;
  for (auto id : {AlgorithmId::ngmca_s, AlgorithmId::ngmca_naive}) {
    AlgorithmConfig a;
    a.algorithm_id = id;
    a.tau_final = 2.0;
    cfg.algorithms.push_back(a);
  }
  const auto records = run_campaign(cfg, {.workers = worker_count()});
  const auto summary = summarize(records);
  if (summary.size() != 2 || summary[0].count != 12 || summary[1].count != 12)
    return {false, "campaign produced error rows"};
  std::vector<double> conds;
  for (const auto& r : records)
    if (r.algorithm_id == "ngmca_s") conds.push_back(r.cond_a_ref * r.cond_a_ref);
  const double gap = summary[0].mean - summary[1].mean;
  return {gap >= 3.0, fmt("nGMCA^S mean %.2f dB (median %.2f), naive mean %.2f dB (median %.2f), gap %.2f dB (need 3); "
                          "median cond(A^T A) %.0f",
                          summary[0].mean, summary[0].median, summary[1].mean, summary[1].median, gap, median(conds))};
}

// 11 --------------------------------------------------------------------------
Outcome campaign_determinism() {
  BenchmarkConfig cfg;
  cfg.grid.r = {4};
  cfg.grid.m = {20};
  cfg.grid.n = {40};
  cfg.grid.p_S = {0.2, 0.4};
  cfg.grid.snr_db = {15.0, kNoiseless};
  cfg.trials_per_cell = 3;
  cfg.base_seed = 11;
  for (auto id : {AlgorithmId::ngmca_s, AlgorithmId::ngmca_naive, AlgorithmId::ngmca_h, AlgorithmId::als,
                  AlgorithmId::mu, AlgorithmId::hals_sparse, AlgorithmId::oracle}) {
    AlgorithmConfig a;
    a.algorithm_id = id;
    a.outer_iterations = id == AlgorithmId::mu ? 300 : 40;
    cfg.algorithms.push_back(a);
  }
  const auto root = std::filesystem::temp_directory_path() / "ngmca_acceptance_determinism";
  std::filesystem::remove_all(root);
  struct Run {
    const char* name;
    int workers;
  };
  const Run runs[] = {{"first", 1}, {"second", 1}, {"four_workers", 4}};
  std::vector<std::string> results, summaries;
  for (const auto& run : runs) {
    write_campaign(cfg, run_campaign(cfg, {.workers = run.workers}), root / run.name);
    results.push_back(read_text_file(root / run.name / "results.csv"));
    summaries.push_back(read_text_file(root / run.name / "summary.csv"));
  }
  const bool pass = results[0] == results[1] && results[0] == results[2] && summaries[0] == summaries[1] &&
                    summaries[0] == summaries[2];
  std::filesystem::remove_all(root);
  return {pass, fmt("%zu-byte results.csv, %zu-byte summary.csv; runs (1 worker) x2 and (4 workers) %s", results[0].size(),
                    summaries[0].size(), pass ? "byte-identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (!args.empty() && args.front() == "--record-baseline") {
    const double med = noiseless_recovery_median();
    const Json j{{"noiseless_recovery_median_sdr_db", med},
                 {"description", "median SDR_S of nGMCA^S, r=5, p_S=0.1, m=n=50, tau_final=0, seeds 0-9"}};
    write_text_file(baseline_path(), j.dump(2) + "\n");
    std::printf("recorded baseline %.6f dB in %s\n", med, baseline_path().string().c_str());
    return 0;
  }

  const std::vector<Criterion> criteria{
      {1, "conditioning table", conditioning_table},
      {2, "sub-solver exactness", subsolver_exactness},
      {3, "prox identities", prox_identities},
      {4, "MU monotonicity", mu_monotonicity},
      {5, "SDR decomposition invariants", sdr_invariants},
      {6, "sampler moments", sampler_moments},
      {7, "stability certificate", stability_certificate},
      {8, "qualitative ordering", qualitative_ordering},
      {9, "noiseless recovery regression", noiseless_regression},
      {10, "NMR pipeline", nmr_pipeline},
      {11, "campaign determinism", campaign_determinism},
  };
  std::set<int> selected;
  for (const auto& a : args) selected.insert(std::atoi(a.c_str()));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
