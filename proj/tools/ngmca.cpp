// Command-line front end: generate instances, run one algorithm, score a
// factorization, run benchmark campaigns and plot their summaries.
//
// Exit status: 0 on success, 1 for usage errors (bad flags, invalid
// configuration values, unknown plot axis), 2 for runtime failures.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "ngmca/bench.hpp"
#include "ngmca/io.hpp"
#include "ngmca/metrics.hpp"
#include "ngmca/plot.hpp"

namespace {

using namespace ngmca;

int cmd_generate(const std::string& spec_path, const std::string& out) {
  const InstanceSpec spec = instance_spec_from_json(read_json_file(spec_path));
  write_container(out, instance_container(gen_instance(spec)));
  return 0;
}

int cmd_run(const std::string& algorithm, const std::string& instance_path, const std::string& config_path,
            const std::string& out) {
  const ProblemInstance inst = instance_from_container(read_container(instance_path));
  Json j = config_path.empty() ? Json::object() : read_json_file(config_path);
  if (!algorithm.empty()) j["algorithm_id"] = algorithm;
  if (!j.contains("rank")) j["rank"] = inst.spec.r;
  if (!j.contains("seed")) j["seed"] = inst.spec.seed;
  AlgorithmConfig cfg = algorithm_config_from_json(j);
  if (cfg.algorithm_id == AlgorithmId::hals_sparse && !cfg.sparsity_target)
    cfg.sparsity_target = sparsity_rate(inst.S_ref);

  const RunResult res = run_algorithm(inst.Y, cfg, &inst.A_ref);
  Container c;
  c.header = {{"kind", "factors"},
              {"config", to_json(cfg)},
              {"iterations", res.iterations},
              {"reinitializations", res.reinitializations},
              {"collapsed_sources", res.collapsed_sources},
              {"final_objective", res.objective.empty() ? 0.0 : res.objective.back()}};
  c.matrices = {{"A", res.factors.A}, {"S", res.factors.S}, {"lambda", Matrix(res.lambda.transpose())}};
  write_container(out, c);
  return 0;
}

int cmd_eval(const std::string& factors_path, const std::string& instance_path, const std::string& out) {
  const ProblemInstance inst = instance_from_container(read_container(instance_path));
  const Container factors = read_container(factors_path);
  if (factors.header.value("kind", "") != "factors")
    throw Error(ErrorCode::Io, factors_path + " does not hold factors");
  const Matrix& s = factors.get("S");
  const PairingResult pr = pair_sources(s, inst.S_ref, inst.Z);
  Json per = Json::array();
  for (Index i = 0; i < pr.per_source_sdr_db.size(); ++i) per.push_back(pr.per_source_sdr_db(i));
  Json result{{"mean_sdr_db", pr.mean_sdr_db},
              {"per_source_sdr_db", per},
              {"permutation", pr.permutation},
              {"final_objective", half_squared_residual(inst.Y, factors.get("A"), s)},
              {"cond_a_ref", nullptr}};
  try {
    result["cond_a_ref"] = condition_number(inst.A_ref);
  } catch (const Error&) {
  }
  if (!inst.spec.noiseless()) result["measured_snr_db"] = measure_snr(inst.Y, inst.A_ref * inst.S_ref);
  write_text_file(out, result.dump(2) + "\n");
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out, bool paper_scale, int workers, bool quiet) {
  BenchmarkConfig cfg = benchmark_config_from_json(read_json_file(config_path));
  if (paper_scale) apply_paper_scale(cfg);
  if (!out.empty()) cfg.output_dir = out;
  CampaignOptions opts;
  opts.workers = workers;
  if (!quiet)
    opts.progress = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu trials", done, total);
      if (done == total) std::fputc('\n', stderr);
    };
  const auto records = run_campaign(cfg, opts);
  write_campaign(cfg, records, cfg.output_dir);
  std::size_t errors = 0;
  for (const auto& r : records) errors += r.ok ? 0 : 1;
  if (!quiet)
    std::fprintf(stderr, "%zu records (%zu errors) written to %s\n", records.size(), errors,
                 cfg.output_dir.string().c_str());
  return 0;
}

int cmd_plot(const std::string& summary_path, const std::string& x_axis, const std::string& out) {
  emit_plot(parse_summary_csv(read_text_file(summary_path)), x_axis, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse non-negative blind source separation"};
  app.require_subcommand(1);

  std::string spec_path, out, algorithm, instance_path, config_path, factors_path, summary_path, x_axis;
  bool paper_scale = false, quiet = false;
  int workers = 1;

  auto* generate = app.add_subcommand("generate", "Draw a synthetic problem instance");
  generate->add_option("--spec", spec_path, "InstanceSpec JSON")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "Output container")->required();

  auto* run = app.add_subcommand("run", "Factorize an instance with one algorithm");
  run->add_option("--algorithm", algorithm, "ngmca_naive, ngmca_s, ngmca_h, als, mu, hals_sparse or oracle");
  run->add_option("--instance", instance_path, "Instance container")->required()->check(CLI::ExistingFile);
  run->add_option("--config", config_path, "AlgorithmConfig JSON")->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output factors container")->required();

  auto* eval = app.add_subcommand("eval", "Score factors against the instance references");
  eval->add_option("--factors", factors_path, "Factors container")->required()->check(CLI::ExistingFile);
  eval->add_option("--instance", instance_path, "Instance container")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Output JSON")->required();

  auto* bench = app.add_subcommand("bench", "Run a benchmark campaign");
  bench->add_option("--config", config_path, "BenchmarkConfig JSON")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "Output directory (overrides output_dir)");
  bench->add_flag("--paper-scale", paper_scale, "Use m = n = 200 and 48 trials per cell");
  bench->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  bench->add_flag("--quiet", quiet, "No progress output");

  auto* plot = app.add_subcommand("plot", "Plot a campaign summary as SVG");
  plot->add_option("--summary", summary_path, "summary.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("--x", x_axis, "Swept parameter for the horizontal axis")->required();
  plot->add_option("--out", out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*generate) return cmd_generate(spec_path, out);
    if (*run) return cmd_run(algorithm, instance_path, config_path, out);
    if (*eval) return cmd_eval(factors_path, instance_path, out);
    if (*bench) return cmd_bench(config_path, out, paper_scale, workers, quiet);
    if (*plot) return cmd_plot(summary_path, x_axis, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool usage = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::UnknownAxis;
    return usage ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
