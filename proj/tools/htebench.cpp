// htebench: generate benchmark datasets, run estimator experiments, and
// emit report tables from the records they produce.

#include <cstdint>
#include <iostream>

#include <CLI11.hpp>

#include "hte/harness/config.hpp"
#include "hte/harness/report.hpp"
#include "hte/harness/runner.hpp"
#include "hte/kernels/kernels.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;  // 0 = keep the config's master seed
  std::string preset;      // "" = keep the config's scale
  int workers = 0;
};

hte::harness::ExperimentConfig resolve(const CommonOptions& options) {
  hte::harness::ExperimentConfig config;
  if (!options.config_path.empty()) {
    config = hte::harness::load_config(options.config_path);
  } else {
    config = hte::harness::desk_suite(options.seed != 0 ? options.seed : 1);
  }
  if (options.seed != 0) config.master_seed = options.seed;
  if (!options.preset.empty()) {
    config.scale = options.preset == "paper" ? hte::harness::Scale::Paper : hte::harness::Scale::Desk;
  }
  if (options.workers > 0) config.workers = options.workers;
  return config;
}

void add_common_flags(CLI::App* cmd, CommonOptions& options, bool needs_out) {
  cmd->add_option("--config", options.config_path, "experiment config (JSON); omit for the built-in desk suite");
  cmd->add_option("--seed", options.seed, "master seed override");
  cmd->add_option("--preset", options.preset, "scale preset override: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--workers", options.workers, "worker thread count (default: hardware)");
  if (needs_out) cmd->add_option("--out", options.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-synthetic benchmark harness for heterogeneous treatment effect estimators"};
  app.require_subcommand(1);

  CommonOptions generate_options, run_options;
  std::string report_records, report_out = "report";

  auto* generate = app.add_subcommand("generate", "emit datasets (covariates, schemas, draws) to files");
  add_common_flags(generate, generate_options, /*needs_out=*/true);

  auto* run = app.add_subcommand("run", "execute the experiment and persist records");
  add_common_flags(run, run_options, /*needs_out=*/true);

  auto* report = app.add_subcommand("report", "emit aggregate tables and plot data from a records file");
  report->add_option("--records", report_records, "records.csv produced by `run`")->required();
  report->add_option("--out", report_out, "report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) {
      hte::harness::generate_datasets(resolve(generate_options), generate_options.out_dir);
      std::cout << "datasets written to " << generate_options.out_dir << "\n";
    } else if (run->parsed()) {
      const auto config = resolve(run_options);
      std::cout << "kernel backend: " << hte::kernels::backend_name(hte::kernels::active_backend())
                << "\n";
      const auto artifacts = hte::harness::run_experiment(config, run_options.out_dir);
      std::cout << "records: " << artifacts.records_csv.string() << "\n"
                << "timings: " << artifacts.timings_csv.string() << "\n"
                << "manifest: " << artifacts.manifest_json.string() << "\n";
    } else if (report->parsed()) {
      const auto artifacts = hte::harness::write_report(report_records, report_out);
      std::cout << "aggregate: " << artifacts.aggregate_csv.string() << "\n"
                << "scatter: " << artifacts.scatter_csv.string() << "\n"
                << "histograms: " << artifacts.histograms_csv.string() << "\n"
                << "percentile runs: " << artifacts.percentile_runs_csv.string() << "\n"
                << "transformed comparison: " << artifacts.transformed_comparison_csv.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
