#pragma once

// Monte-Carlo campaigns over a grid of instance parameters: every cell ×
// trial draws one instance, every configured algorithm runs on it, and the
// estimate is scored with pair_sources. Records and summaries persist as CSV
// next to a JSON manifest.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ngmca/algorithms.hpp"
#include "ngmca/datagen.hpp"
#include "ngmca/io.hpp"
#include "ngmca/metrics.hpp"
#include "ngmca/nmr.hpp"

namespace ngmca {

inline constexpr const char* kSoftwareVersion = "0.1.0";

/// Algorithm label used by records that only describe the instance.
inline constexpr const char* kInstanceOnly = "instance";

enum class SourceModel { synthetic, nmr };

struct InstanceGrid {
  std::vector<Index> r{15};
  std::vector<Index> m{100};
  std::vector<Index> n{100};
  std::vector<double> p_S{0.1};
  std::vector<double> alpha_A{2.0};
  std::vector<double> snr_db{kNoiseless};
};

struct BenchmarkConfig {
  InstanceGrid grid;
  double p_A = 1.0;
  double alpha_S = 1.0;
  /// Empty: records carry instance statistics only (e.g. cond(A_ref)).
  std::vector<AlgorithmConfig> algorithms;
  int trials_per_cell = 24;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "results";
  SourceModel sources = SourceModel::synthetic;
  /// Peak-list directory for SourceModel::nmr; r is the number of compounds.
  std::filesystem::path nmr_corpus;
  double fwhm_samples = 3.0;

  void validate() const {
    if (grid.r.empty() || grid.m.empty() || grid.n.empty() || grid.p_S.empty() || grid.alpha_A.empty() ||
        grid.snr_db.empty())
      throw Error(ErrorCode::InvalidArgument, "BenchmarkConfig: every grid axis needs at least one value");
    if (trials_per_cell < 1) throw Error(ErrorCode::InvalidArgument, "BenchmarkConfig: trials_per_cell must be >= 1");
    if (sources == SourceModel::nmr && nmr_corpus.empty())
      throw Error(ErrorCode::InvalidArgument, "BenchmarkConfig: nmr sources need nmr_corpus");
    for (const auto& a : algorithms) a.validate();
  }
};

struct CellCoords {
  Index r = 0, m = 0, n = 0;
  double p_S = 0.0, alpha_A = 0.0, snr_db = 0.0;

  bool operator==(const CellCoords&) const = default;
};

/// Swept parameter names, in column order.
inline const std::vector<std::string>& grid_axes() {
  static const std::vector<std::string> axes{"r", "m", "n", "p_S", "alpha_A", "snr_db"};
  return axes;
}

inline double axis_value(const CellCoords& c, std::string_view axis) {
  if (axis == "r") return static_cast<double>(c.r);
  if (axis == "m") return static_cast<double>(c.m);
  if (axis == "n") return static_cast<double>(c.n);
  if (axis == "p_S") return c.p_S;
  if (axis == "alpha_A") return c.alpha_A;
  if (axis == "snr_db") return c.snr_db;
  throw Error(ErrorCode::UnknownAxis, "unknown axis '" + std::string(axis) + "'");
}

struct TrialRecord {
  CellCoords cell;
  std::string algorithm_id;
  int trial = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  double mean_sdr_db = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_source_sdr_db;
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  int iterations_run = 0;
  double cond_a_ref = std::numeric_limits<double>::quiet_NaN();
  double wall_time_seconds = 0.0;

  /// The quantity summarized for this record.
  double value() const { return algorithm_id == kInstanceOnly ? cond_a_ref : mean_sdr_db; }
};

// --- Configuration JSON -----------------------------------------------------------

namespace detail {

template <class T>
std::vector<T> axis_from_json(const Json& j) {
  std::vector<T> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(v.get<T>());
  } else {
    out.push_back(j.get<T>());
  }
  return out;
}

inline std::vector<double> snr_axis_from_json(const Json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(snr_from_json(v));
  } else {
    out.push_back(snr_from_json(j));
  }
  return out;
}

}  // namespace detail

inline BenchmarkConfig benchmark_config_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"grid", "p_A", "alpha_S", "algorithms", "trials_per_cell", "base_seed", "output_dir",
                          "sources", "nmr_corpus", "fwhm_samples"},
                         "BenchmarkConfig");
  BenchmarkConfig c;
  if (j.contains("grid")) {
    const Json& g = j.at("grid");
    detail::reject_unknown(g, {"r", "m", "n", "p_S", "alpha_A", "snr_db"}, "grid");
    if (g.contains("r")) c.grid.r = detail::axis_from_json<Index>(g.at("r"));
    if (g.contains("m")) c.grid.m = detail::axis_from_json<Index>(g.at("m"));
    if (g.contains("n")) c.grid.n = detail::axis_from_json<Index>(g.at("n"));
    if (g.contains("p_S")) c.grid.p_S = detail::axis_from_json<double>(g.at("p_S"));
    if (g.contains("alpha_A")) c.grid.alpha_A = detail::axis_from_json<double>(g.at("alpha_A"));
    if (g.contains("snr_db")) c.grid.snr_db = detail::snr_axis_from_json(g.at("snr_db"));
  }
  detail::read_if(j, "p_A", c.p_A);
  detail::read_if(j, "alpha_S", c.alpha_S);
  if (j.contains("algorithms"))
    for (const auto& a : j.at("algorithms")) c.algorithms.push_back(algorithm_config_from_json(a));
  detail::read_if(j, "trials_per_cell", c.trials_per_cell);
  detail::read_if(j, "base_seed", c.base_seed);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("sources")) {
    const auto s = j.at("sources").get<std::string>();
    if (s == "synthetic")
      c.sources = SourceModel::synthetic;
    else if (s == "nmr")
      c.sources = SourceModel::nmr;
    else
      throw Error(ErrorCode::InvalidArgument, "sources must be \"synthetic\" or \"nmr\"");
  }
  if (j.contains("nmr_corpus")) c.nmr_corpus = j.at("nmr_corpus").get<std::string>();
  detail::read_if(j, "fwhm_samples", c.fwhm_samples);
  c.validate();
  return c;
}

inline Json to_json(const BenchmarkConfig& c) {
  Json snr = Json::array();
  for (double s : c.grid.snr_db) snr.push_back(snr_to_json(s));
  Json algos = Json::array();
  for (const auto& a : c.algorithms) algos.push_back(to_json(a));
  return Json{{"grid",
               {{"r", c.grid.r},
                {"m", c.grid.m},
                {"n", c.grid.n},
                {"p_S", c.grid.p_S},
                {"alpha_A", c.grid.alpha_A},
                {"snr_db", snr}}},
              {"p_A", c.p_A},
              {"alpha_S", c.alpha_S},
              {"algorithms", algos},
              {"trials_per_cell", c.trials_per_cell},
              {"base_seed", c.base_seed},
              {"output_dir", c.output_dir.string()},
              {"sources", c.sources == SourceModel::nmr ? "nmr" : "synthetic"},
              {"nmr_corpus", c.nmr_corpus.string()},
              {"fwhm_samples", c.fwhm_samples}};
}

/// Full-size settings: m = n = 200 for synthetic sources, 48 trials per cell.
inline void apply_paper_scale(BenchmarkConfig& c) {
  if (c.sources == SourceModel::synthetic) {
    c.grid.m = {200};
    c.grid.n = {200};
  }
  c.trials_per_cell = 48;
}

// --- Campaign ---------------------------------------------------------------------

inline std::vector<CellCoords> expand_grid(const BenchmarkConfig& cfg, Index nmr_sources = 0) {
  std::vector<CellCoords> cells;
  const std::vector<Index> ranks = cfg.sources == SourceModel::nmr ? std::vector<Index>{nmr_sources} : cfg.grid.r;
  for (Index r : ranks)
    for (Index m : cfg.grid.m)
      for (Index n : cfg.grid.n)
        for (double p : cfg.grid.p_S)
          for (double a : cfg.grid.alpha_A)
            for (double s : cfg.grid.snr_db) cells.push_back({r, m, n, p, a, s});
  return cells;
}

/// Instance seed of (cell, trial). Depends on the cell's coordinate values,
/// not on its position in the grid, so a cell gives the same trials whatever
/// grid it is part of.
inline std::uint64_t trial_seed(std::uint64_t base_seed, const CellCoords& c, int trial) {
  const std::uint64_t cell_key = derive_seed(
      base_seed, {static_cast<std::uint64_t>(c.r), static_cast<std::uint64_t>(c.m), static_cast<std::uint64_t>(c.n),
                  std::bit_cast<std::uint64_t>(c.p_S), std::bit_cast<std::uint64_t>(c.alpha_A),
                  std::bit_cast<std::uint64_t>(c.snr_db)});
  return derive_seed(cell_key, {static_cast<std::uint64_t>(trial)});
}

struct CampaignOptions {
  int workers = 1;
  /// Called after each finished (cell, trial) job with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

namespace detail {

inline ProblemInstance campaign_instance(const BenchmarkConfig& cfg, const CellCoords& c, std::uint64_t seed,
                                         const Matrix* nmr_sources) {
  if (cfg.sources == SourceModel::nmr) {
    return gen_nmr_instance(*nmr_sources, c.m, c.snr_db, seed, c.alpha_A);
  }
  InstanceSpec spec;
  spec.m = c.m;
  spec.n = c.n;
  spec.r = c.r;
  spec.p_A = cfg.p_A;
  spec.p_S = c.p_S;
  spec.alpha_A = c.alpha_A;
  spec.alpha_S = cfg.alpha_S;
  spec.snr_db = c.snr_db;
  spec.seed = seed;
  return gen_instance(spec);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// All records of one (cell, trial): one per algorithm, or one instance record.
inline std::vector<TrialRecord> run_job(const BenchmarkConfig& cfg, const CellCoords& c, int trial,
                                        const Matrix* nmr_sources) {
  const std::uint64_t seed = trial_seed(cfg.base_seed, c, trial);
  std::vector<std::string> labels;
  for (const auto& a : cfg.algorithms) labels.emplace_back(to_string(a.algorithm_id));
  if (labels.empty()) labels.emplace_back(kInstanceOnly);

  std::vector<TrialRecord> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i].cell = c;
    out[i].algorithm_id = labels[i];
    out[i].trial = trial;
    out[i].seed = seed;
  }

  const auto t_gen = std::chrono::steady_clock::now();
  ProblemInstance inst;
  try {
    inst = campaign_instance(cfg, c, seed, nmr_sources);
  } catch (const std::exception& e) {
    for (auto& rec : out) {
      rec.ok = false;
      rec.error = std::string("instance: ") + e.what();
    }
    return out;
  }
  double cond = std::numeric_limits<double>::quiet_NaN();
  try {
    cond = condition_number(inst.A_ref);
  } catch (const Error&) {
    // Left as NaN; only instance records depend on it.
  }
  for (auto& rec : out) rec.cond_a_ref = cond;

  if (cfg.algorithms.empty()) {
    out[0].wall_time_seconds = seconds_since(t_gen);
    if (std::isnan(cond)) {
      out[0].ok = false;
      out[0].error = "A_ref is numerically singular";
    }
    return out;
  }

  for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) {
    TrialRecord& rec = out[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      AlgorithmConfig algo = cfg.algorithms[i];
      algo.rank = c.r;
      algo.seed = seed;
      algo.record_objective = false;
      if (algo.algorithm_id == AlgorithmId::hals_sparse && !algo.sparsity_target)
        algo.sparsity_target = sparsity_rate(inst.S_ref);
      const RunResult res = run_algorithm(inst.Y, algo, &inst.A_ref);
      const PairingResult pr = pair_sources(res.factors.S, inst.S_ref, inst.Z);
      rec.mean_sdr_db = pr.mean_sdr_db;
      rec.per_source_sdr_db.assign(pr.per_source_sdr_db.data(), pr.per_source_sdr_db.data() + pr.per_source_sdr_db.size());
      rec.final_objective = res.objective.empty() ? std::numeric_limits<double>::quiet_NaN() : res.objective.back();
      rec.iterations_run = res.iterations;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    rec.wall_time_seconds = seconds_since(t0);
  }
  return out;
}

}  // namespace detail

/// Runs every cell × algorithm × trial. Records are ordered by cell (grid
/// order), then algorithm (config order), then trial, independent of the
/// number of workers. Failures become error rows.
inline std::vector<TrialRecord> run_campaign(const BenchmarkConfig& cfg, const CampaignOptions& opts = {}) {
  cfg.validate();
  Matrix nmr_sources;
  if (cfg.sources == SourceModel::nmr) {
    if (cfg.grid.n.size() != 1) throw Error(ErrorCode::InvalidArgument, "nmr campaigns take a single n");
    nmr_sources = gen_nmr_sources(load_peak_corpus(cfg.nmr_corpus), cfg.grid.n.front(), cfg.fwhm_samples);
  }
  const std::vector<CellCoords> cells = expand_grid(cfg, nmr_sources.rows());
  const std::size_t trials = static_cast<std::size_t>(cfg.trials_per_cell);
  const std::size_t jobs = cells.size() * trials;

  std::vector<std::vector<TrialRecord>> results(jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      results[job] = detail::run_job(cfg, cells[job / trials], static_cast<int>(job % trials),
                                     cfg.sources == SourceModel::nmr ? &nmr_sources : nullptr);
      const std::size_t finished = ++done;
      if (opts.progress) {
        std::lock_guard lock(progress_mutex);
        opts.progress(finished, jobs);
      }
    }
  };
  const int workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(std::max<std::size_t>(jobs, 1))));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const std::size_t per_job = std::max<std::size_t>(cfg.algorithms.size(), 1);
  std::vector<TrialRecord> records;
  records.reserve(jobs * per_job);
  for (std::size_t cell = 0; cell < cells.size(); ++cell)
    for (std::size_t a = 0; a < per_job; ++a)
      for (std::size_t t = 0; t < trials; ++t) records.push_back(results[cell * trials + t][a]);
  return records;
}

// --- Summary ------------------------------------------------------------------------

struct SummaryRow {
  CellCoords cell;
  std::string algorithm_id;
  std::string metric;
  int count = 0;
  int errors = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double sem = std::numeric_limits<double>::quiet_NaN();
};

/// Mean, median and standard error of the mean per (cell, algorithm), in
/// order of first appearance. Error rows are counted, not averaged.
inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<double>> values;
  for (const auto& rec : records) {
    auto it = std::find_if(rows.begin(), rows.end(),
                           [&](const SummaryRow& s) { return s.cell == rec.cell && s.algorithm_id == rec.algorithm_id; });
    std::size_t idx;
    if (it == rows.end()) {
      SummaryRow s;
      s.cell = rec.cell;
      s.algorithm_id = rec.algorithm_id;
      s.metric = rec.algorithm_id == kInstanceOnly ? "cond_a_ref" : "mean_sdr_db";
      rows.push_back(s);
      values.emplace_back();
      idx = rows.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - rows.begin());
    }
    if (rec.ok)
      values[idx].push_back(rec.value());
    else
      ++rows[idx].errors;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<double>& v = values[i];
    SummaryRow& s = rows[i];
    s.count = static_cast<int>(v.size());
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sem = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
  return rows;
}

// --- Files --------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> cell_fields(const CellCoords& c) {
  return {std::to_string(c.r),       std::to_string(c.m),         std::to_string(c.n),
          format_double(c.p_S),      format_double(c.alpha_A),    format_double(c.snr_db)};
}

inline CellCoords cell_from_fields(const std::vector<std::string>& f) {
  CellCoords c;
  c.r = static_cast<Index>(parse_double(f.at(0)));
  c.m = static_cast<Index>(parse_double(f.at(1)));
  c.n = static_cast<Index>(parse_double(f.at(2)));
  c.p_S = parse_double(f.at(3));
  c.alpha_A = parse_double(f.at(4));
  c.snr_db = parse_double(f.at(5));
  return c;
}

inline std::string join_values(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace detail

/// One row per record. Wall-clock times are kept out of this file (see
/// timings_csv) so that equal configurations give byte-identical output.
inline std::string results_csv(const std::vector<TrialRecord>& records) {
  std::string out = csv_row({"r", "m", "n", "p_S", "alpha_A", "snr_db", "algorithm_id", "trial", "seed", "status",
                             "mean_sdr_db", "per_source_sdr_db", "final_objective", "iterations_run", "cond_a_ref",
                             "error"});
  for (const auto& rec : records) {
    auto f = detail::cell_fields(rec.cell);
    f.insert(f.end(), {rec.algorithm_id, std::to_string(rec.trial), std::to_string(rec.seed), rec.ok ? "ok" : "error",
                       format_double(rec.mean_sdr_db), detail::join_values(rec.per_source_sdr_db),
                       format_double(rec.final_objective), std::to_string(rec.iterations_run),
                       format_double(rec.cond_a_ref), rec.error});
    out += csv_row(f);
  }
  return out;
}

inline std::string timings_csv(const std::vector<TrialRecord>& records) {
  std::string out = csv_row({"r", "m", "n", "p_S", "alpha_A", "snr_db", "algorithm_id", "trial", "wall_time_seconds"});
  for (const auto& rec : records) {
    auto f = detail::cell_fields(rec.cell);
    f.insert(f.end(), {rec.algorithm_id, std::to_string(rec.trial), format_double(rec.wall_time_seconds)});
    out += csv_row(f);
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = csv_row(
      {"r", "m", "n", "p_S", "alpha_A", "snr_db", "algorithm_id", "metric", "count", "errors", "mean", "median", "sem"});
  for (const auto& s : rows) {
    auto f = detail::cell_fields(s.cell);
    f.insert(f.end(), {s.algorithm_id, s.metric, std::to_string(s.count), std::to_string(s.errors),
                       format_double(s.mean), format_double(s.median), format_double(s.sem)});
    out += csv_row(f);
  }
  return out;
}

inline std::vector<SummaryRow> parse_summary_csv(std::string_view text) {
  const auto table = parse_csv(text);
  if (table.empty()) throw Error(ErrorCode::EmptyInput, "summary CSV is empty");
  const std::vector<std::string> expected{"r",         "m",      "n",     "p_S",    "alpha_A", "snr_db", "algorithm_id",
                                          "metric",    "count",  "errors", "mean",  "median",  "sem"};
  if (table.front() != expected) throw Error(ErrorCode::InvalidArgument, "summary CSV has an unexpected header");
  std::vector<SummaryRow> rows;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& f = table[i];
    if (f.size() != expected.size()) throw Error(ErrorCode::InvalidArgument, "summary CSV row with wrong field count");
    SummaryRow s;
    s.cell = detail::cell_from_fields(f);
    s.algorithm_id = f[6];
    s.metric = f[7];
    s.count = std::stoi(f[8]);
    s.errors = std::stoi(f[9]);
    s.mean = parse_double(f[10]);
    s.median = parse_double(f[11]);
    s.sem = parse_double(f[12]);
    rows.push_back(s);
  }
  return rows;
}

/// Writes results.csv, timings.csv, summary.csv and manifest.json into `dir`.
inline void write_campaign(const BenchmarkConfig& cfg, const std::vector<TrialRecord>& records,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto summary = summarize(records);
  write_text_file(dir / "results.csv", results_csv(records));
  write_text_file(dir / "timings.csv", timings_csv(records));
  write_text_file(dir / "summary.csv", summary_csv(summary));
  std::size_t errors = 0;
  for (const auto& rec : records) errors += rec.ok ? 0 : 1;
  const Json manifest{{"software", {{"name", "ngmca"}, {"version", kSoftwareVersion}}},
                      {"config", to_json(cfg)},
                      {"records", records.size()},
                      {"error_records", errors},
                      {"files", {"results.csv", "timings.csv", "summary.csv"}}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace ngmca
