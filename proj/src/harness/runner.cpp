#include "hte/harness/runner.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "hte/common/format.hpp"
#include "hte/common/parallel.hpp"
#include "hte/common/rng.hpp"
#include "hte/data/io.hpp"
#include "hte/dgp/ihdp.hpp"
#include "hte/dgp/knobbed.hpp"
#include "hte/harness/records.hpp"

namespace hte::harness {

namespace {

using data::CovariateMatrix;
using data::SimulationDraw;

bool is_ihdp_family(const std::string& dgp) { return dgp == "ihdp" || dgp == "ihdp-additive"; }

bool is_mlp_estimator(const std::string& name) {
  return strategies::spec_by_name(name).base == strategies::BaseLearner::Mlp;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Fixed population (covariates and, for the IHDP replica, treatment) shared
// by every draw of a setting.
struct Population {
  CovariateMatrix covariates;
  std::vector<std::uint8_t> treatment;  // IHDP only
  std::vector<double> propensity;       // IHDP only
};

Population build_population(const SettingConfig& setting, std::uint64_t master_seed) {
  const std::uint64_t fp = dgp_fingerprint(setting);
  Population population;
  if (setting.covariates_csv) {
    const auto schema = data::load_schema(setting.covariates_csv->string() + ".schema.json");
    population.covariates = data::load_covariates(*setting.covariates_csv, schema);
    if (population.covariates.n_rows() != setting.n) {
      throw ConfigError("setting '" + setting.name + "': covariate file has " +
                        std::to_string(population.covariates.n_rows()) + " rows, config says " +
                        std::to_string(setting.n));
    }
  } else if (is_ihdp_family(setting.dgp)) {
    population.covariates = data::synthesize_covariates(
        setting.n, data::CovariateProfile::ihdp_like(rng::derive_seed(master_seed, {fp, 0})),
        rng::derive_seed(master_seed, {fp, 1}));
  } else {
    population.covariates = data::synthesize_covariates(
        setting.n, data::CovariateProfile::acic_like(rng::derive_seed(master_seed, {fp, 0})),
        rng::derive_seed(master_seed, {fp, 1}));
  }

  if (is_ihdp_family(setting.dgp)) {
    // Logistic imbalance on the first three covariates, treated share
    // matched to 139/747.
    const std::size_t drivers[] = {0, 1, 2};
    auto assignment = data::assign_logistic_treatment(population.covariates, drivers, 0.5,
                                                      139.0 / 747.0,
                                                      rng::derive_seed(master_seed, {fp, 2}));
    population.treatment = std::move(assignment.w);
    population.propensity = std::move(assignment.propensity);
  }
  return population;
}

struct GeneratedDraw {
  SimulationDraw draw;
  int regenerations = 0;
};

GeneratedDraw generate_draw(const SettingConfig& setting, const Population& population,
                            int draw_index, std::uint64_t master_seed) {
  const std::uint64_t fp = dgp_fingerprint(setting);
  const std::uint64_t seed =
      rng::derive_seed(master_seed, {fp, 3, static_cast<std::uint64_t>(draw_index)});
  GeneratedDraw out;
  if (is_ihdp_family(setting.dgp)) {
    dgp::IhdpConfig config;
    config.variant =
        setting.dgp == "ihdp" ? dgp::IhdpVariant::Original : dgp::IhdpVariant::AdditiveTE;
    if (setting.noise_std) config.noise_std = *setting.noise_std;
    auto result = dgp::generate_ihdp_draw(population.covariates, population.treatment,
                                          population.propensity, config, *setting.split, seed);
    out.draw = std::move(result.draw);
    out.regenerations = result.regenerations;
  } else {
    dgp::KnobConfig config = dgp::knob_preset(setting.dgp);
    if (setting.noise_std) config.noise_std = *setting.noise_std;
    auto result = dgp::generate_knobbed_draw(population.covariates, config, *setting.split, seed);
    out.draw = std::move(result.draw);
  }
  return out;
}

// Everything a fit task needs, prepared once per (setting, draw).
struct PreparedDraw {
  strategies::TrainingSet train;
  Matrix x_test;
  std::vector<std::size_t> test_indices;
  std::vector<double> tau_test;
  double sigma_tau = 0.0;
  double sigma_mu0 = 0.0;
  int regenerations = 0;
};

PreparedDraw prepare_draw(const SettingConfig& setting, const GeneratedDraw& generated) {
  const SimulationDraw& draw = generated.draw;

  // Estimators see the raw design unless the setting feeds the transformed
  // one; the transform reproduces the DGP-side dichotomization (train-row
  // medians).
  Matrix design = draw.covariates.values;
  if (setting.feed_transformed) {
    design = dgp::dichotomize_counts(
                 draw.covariates, dgp::DichotomizePolicy::median_over(draw.split.train_indices))
                 .values;
  }

  PreparedDraw prepared;
  prepared.regenerations = generated.regenerations;

  data::SimulationDraw view = draw;  // cheap relative to fits; keeps the API by-value
  view.covariates.values = design;
  prepared.train = strategies::training_view(view, design);

  const auto& test = draw.split.test_indices;
  prepared.test_indices = test;
  prepared.x_test = Matrix(test.size(), design.cols());
  prepared.tau_test.reserve(test.size());
  std::vector<double> mu0_test;
  mu0_test.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = design.row(test[i]);
    std::copy(row.begin(), row.end(), prepared.x_test.row(i).begin());
    prepared.tau_test.push_back(draw.tau[test[i]]);
    mu0_test.push_back(draw.mu0[test[i]]);
  }
  prepared.sigma_tau = metrics::sigma_of(prepared.tau_test);
  prepared.sigma_mu0 = metrics::sigma_of(mu0_test);
  return prepared;
}

struct Task {
  std::size_t setting_index;
  int draw_index;
  std::size_t estimator_index;
  int repetition;
  std::uint64_t seed;
};

int resolved_workers(const ExperimentConfig& config) {
  if (config.workers > 0) return config.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void dump_predictions(const std::filesystem::path& file, std::span<const std::size_t> test_indices,
                      std::span<const double> tau_true, std::span<const double> tau_hat) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write prediction dump: " + file.string());
  out << "test_index,tau_true,tau_hat\n";
  for (std::size_t i = 0; i < tau_true.size(); ++i) {
    out << test_indices[i] << ',' << to_g17(tau_true[i]) << ',' << to_g17(tau_hat[i]) << "\n";
  }
}

nlohmann::json manifest_json(const ExperimentConfig& config,
                             const std::map<std::string, int>& regenerations) {
  nlohmann::json manifest;
  manifest["master_seed"] = config.master_seed;
  manifest["scale"] = scale_name(config.scale);
  manifest["repetitions"] = config.repetitions;
  manifest["mlp_repetitions"] = config.mlp_repetitions;
  manifest["settings"] = nlohmann::json::array();
  for (const auto& setting : config.settings) {
    nlohmann::json entry;
    entry["name"] = setting.name;
    entry["dgp"] = setting.dgp;
    entry["n"] = setting.n;
    entry["n_draws"] = setting.n_draws;
    entry["feed_transformed"] = setting.feed_transformed;
    entry["estimators"] = setting.estimators;
    entry["fingerprint"] = dgp_fingerprint(setting);
    if (setting.noise_std) entry["noise_std"] = *setting.noise_std;
    entry["regenerated_draws"] =
        regenerations.count(setting.name) ? regenerations.at(setting.name) : 0;
    manifest["settings"].push_back(std::move(entry));
  }
  return manifest;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const int workers = resolved_workers(config);

  // Phase 1: populations and draws. Settings sharing a DGP identity share
  // generated draws; the IHDP additive variant regenerates its own surfaces
  // but reuses the original's coefficient streams by fingerprint.
  std::map<std::string, Population> populations;  // keyed by fingerprint+dgp family
  auto population_key = [](const SettingConfig& s) {
    return std::to_string(dgp_fingerprint(s)) + "|" + (is_ihdp_family(s.dgp) ? "ihdp" : s.dgp);
  };
  for (const auto& setting : config.settings) {
    const std::string key = population_key(setting);
    if (!populations.count(key)) {
      populations.emplace(key, build_population(setting, config.master_seed));
    }
  }

  auto draw_key = [&](const SettingConfig& s, int k) {
    return std::to_string(dgp_fingerprint(s)) + "|" + s.dgp +
           "|ft=" + std::to_string(s.feed_transformed) + "|" + std::to_string(k);
  };
  std::map<std::string, PreparedDraw> prepared;
  {
    std::vector<std::pair<std::string, std::pair<const SettingConfig*, int>>> jobs;
    for (const auto& setting : config.settings) {
      for (int k = 0; k < setting.n_draws; ++k) {
        const std::string key = draw_key(setting, k);
        if (!prepared.count(key)) {
          prepared.emplace(key, PreparedDraw{});
          jobs.push_back({key, {&setting, k}});
        }
      }
    }
    parallel_for(jobs.size(), workers, [&](std::size_t j) {
      const auto& [key, job] = jobs[j];
      const auto& [setting, k] = job;
      const auto generated =
          generate_draw(*setting, populations.at(population_key(*setting)), k, config.master_seed);
      prepared.at(key) = prepare_draw(*setting, generated);
    });
  }

  // Phase 2: fit tasks in canonical order.
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < config.settings.size(); ++s) {
    const auto& setting = config.settings[s];
    const std::uint64_t fp = dgp_fingerprint(setting);
    for (int k = 0; k < setting.n_draws; ++k) {
      for (std::size_t e = 0; e < setting.estimators.size(); ++e) {
        const std::string& estimator = setting.estimators[e];
        const int reps = is_mlp_estimator(estimator) ? config.mlp_repetitions : config.repetitions;
        for (int r = 0; r < reps; ++r) {
          const std::uint64_t seed = rng::derive_seed(
              config.master_seed, {0xf17, fp, static_cast<std::uint64_t>(k), fnv1a(estimator),
                                   static_cast<std::uint64_t>(r)});
          tasks.push_back({s, k, e, r, seed});
        }
      }
    }
  }

  const std::filesystem::path predictions_dir = out_dir / "predictions";
  if (config.dump_predictions) {
    for (const auto& setting : config.settings) {
      std::filesystem::create_directories(predictions_dir / setting.name);
    }
  }

  std::vector<metrics::RunRecord> records(tasks.size());
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    const SettingConfig& setting = config.settings[task.setting_index];
    const std::string& estimator_name = setting.estimators[task.estimator_index];
    const PreparedDraw& draw = prepared.at(draw_key(setting, task.draw_index));

    metrics::RunRecord& record = records[t];
    record.setting = setting.name;
    record.draw_id = task.draw_index;
    record.repetition = task.repetition;
    record.estimator = estimator_name;
    record.seed = task.seed;
    record.n_test = static_cast<int>(draw.tau_test.size());
    record.sigma_tau = draw.sigma_tau;
    record.sigma_mu0 = draw.sigma_mu0;

    try {
      const auto spec = resolve_estimator(config, estimator_name);
      const auto start = std::chrono::steady_clock::now();
      const auto model = strategies::fit_estimator(draw.train, spec, task.seed);
      const std::vector<double> tau_hat = strategies::predict_cate(model, draw.x_test);
      record.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.rmse = metrics::rmse(tau_hat, draw.tau_test);
      record.nrmse = metrics::normalized_rmse(record.rmse, record.sigma_tau);
      if (!std::isfinite(record.rmse)) {
        record.status = "error";
        return;
      }
      if (config.dump_predictions && task.repetition == 0) {
        dump_predictions(predictions_dir / setting.name /
                             ("draw" + std::to_string(task.draw_index) + "_" + estimator_name + ".csv"),
                         draw.test_indices, draw.tau_test, tau_hat);
      }
    } catch (const std::exception&) {
      record.status = "error";
    }
  });

  RunArtifacts artifacts;
  artifacts.records_csv = out_dir / "records.csv";
  artifacts.timings_csv = out_dir / "timings.csv";
  artifacts.manifest_json = out_dir / "manifest.json";
  artifacts.predictions_dir = predictions_dir;

  write_records(artifacts.records_csv, records);
  write_timings(artifacts.timings_csv, records);

  std::map<std::string, int> regenerations;
  for (const auto& setting : config.settings) {
    int total = 0;
    for (int k = 0; k < setting.n_draws; ++k) {
      total += prepared.at(draw_key(setting, k)).regenerations;
    }
    regenerations[setting.name] = total;
  }
  std::ofstream manifest_out(artifacts.manifest_json);
  manifest_out << manifest_json(config, regenerations).dump(2) << "\n";
  return artifacts;
}

void generate_datasets(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  for (const auto& setting : config.settings) {
    const std::filesystem::path dir = out_dir / setting.name;
    std::filesystem::create_directories(dir);
    const Population population = build_population(setting, config.master_seed);
    data::write_covariates(dir / "covariates.csv", population.covariates);
    for (int k = 0; k < setting.n_draws; ++k) {
      const auto generated = generate_draw(setting, population, k, config.master_seed);
      data::write_draw(dir / ("draw_" + std::to_string(k) + ".csv"), generated.draw);
    }
  }
}

}  // namespace hte::harness
