#pragma once

// Experiment execution: enumerates (setting x draw x estimator x repetition)
// tasks, derives one seed per task, runs them over a worker pool, and
// persists records (canonical order), timings, prediction dumps, and a
// manifest. Results are independent of the worker count.

#include <filesystem>

#include "hte/harness/config.hpp"

namespace hte::harness {

struct RunArtifacts {
  std::filesystem::path records_csv;
  std::filesystem::path timings_csv;
  std::filesystem::path manifest_json;
  std::filesystem::path predictions_dir;
};

RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// `generate` subcommand: write every setting's covariates (+ schema sidecar)
// and draw files under out_dir/<setting>/.
void generate_datasets(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace hte::harness
