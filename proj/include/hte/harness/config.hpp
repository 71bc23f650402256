#pragma once

// Experiment configuration: a list of DGP settings crossed with a list of
// named estimators, run counts, seeds, and the desk/paper scale presets.
// Configs load from JSON; unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hte/data/dataset.hpp"
#include "hte/strategies/strategies.hpp"

namespace hte::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scale { Desk, Paper };
const char* scale_name(Scale scale);

struct SettingConfig {
  std::string name;
  std::string dgp;  // ihdp | ihdp-additive | acic-none | acic-low | acic-high
  std::size_t n = 0;        // 0 = default for (dgp, scale)
  int n_draws = 0;          // 0 = default for (dgp, scale)
  std::optional<double> noise_std;
  bool feed_transformed = false;  // estimators receive the dichotomized design
  std::vector<std::string> estimators;  // empty = the experiment-level list
  std::optional<data::SplitPolicy> split;
  std::optional<std::filesystem::path> covariates_csv;  // real covariates, schema sidecar required
};

struct ExperimentConfig {
  std::vector<SettingConfig> settings;
  std::vector<std::string> estimators;
  int repetitions = 0;      // 0 = default for scale
  int mlp_repetitions = 0;  // 0 = same as repetitions
  std::uint64_t master_seed = 1;
  Scale scale = Scale::Desk;
  int workers = 0;  // 0 = hardware concurrency
  bool dump_predictions = true;
  // Per-estimator learner overrides, e.g. {"trf": {"n_trees": 400}}.
  std::map<std::string, std::map<std::string, double>> estimator_overrides;
};

ExperimentConfig load_config(const std::filesystem::path& json_path);

// The desk-scale suite covering both DGP families; what the acceptance runs
// use. Returned fully explicit (counts and estimator lists filled in).
ExperimentConfig desk_suite(std::uint64_t master_seed);

// Fills unset counts from the scale defaults and validates names.
void resolve_defaults(ExperimentConfig& config);

// Resolved estimator spec for one (experiment, estimator name): named spec,
// scale profile, then JSON overrides.
strategies::EstimatorSpec resolve_estimator(const ExperimentConfig& config, const std::string& name);

// Stable identity of the data-generating side of a setting (dgp, n, noise,
// knobs). Settings sharing a fingerprint share draws, which is what makes
// the raw-vs-transformed comparison pair up draw by draw. The IHDP additive
// variant deliberately shares the original's fingerprint stream so its draws
// reuse the same coefficient vectors.
std::uint64_t dgp_fingerprint(const SettingConfig& setting);

}  // namespace hte::harness
