#include "hte/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "hte/common/rng.hpp"

namespace hte::harness {

using nlohmann::json;

const char* scale_name(Scale scale) { return scale == Scale::Desk ? "desk" : "paper"; }

namespace {

void require_known_keys(const json& object, const std::set<std::string>& allowed,
                        const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

data::SplitPolicy parse_split(const json& object) {
  require_known_keys(object, {"kind", "fraction", "prefix"}, "split");
  const std::string kind = object.at("kind").get<std::string>();
  if (kind == "holdout_fraction") {
    return data::SplitPolicy::holdout_fraction(object.at("fraction").get<double>());
  }
  if (kind == "fixed_prefix") {
    return data::SplitPolicy::fixed_prefix(object.at("prefix").get<std::size_t>());
  }
  throw ConfigError("unknown split kind: '" + kind + "'");
}

bool is_ihdp(const std::string& dgp) { return dgp == "ihdp" || dgp == "ihdp-additive"; }
bool is_acic(const std::string& dgp) {
  return dgp == "acic-none" || dgp == "acic-low" || dgp == "acic-high";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw ConfigError("cannot open config: " + json_path.string());
  json parsed;
  try {
    in >> parsed;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + json_path.string() + ": " + e.what());
  }

  require_known_keys(parsed,
                     {"settings", "estimators", "repetitions", "mlp_repetitions", "master_seed",
                      "scale", "workers", "dump_predictions", "estimator_overrides"},
                     "config");

  ExperimentConfig config;
  config.master_seed = parsed.value("master_seed", std::uint64_t{1});
  config.repetitions = parsed.value("repetitions", 0);
  config.mlp_repetitions = parsed.value("mlp_repetitions", 0);
  config.workers = parsed.value("workers", 0);
  config.dump_predictions = parsed.value("dump_predictions", true);
  if (parsed.contains("scale")) {
    const std::string scale = parsed["scale"].get<std::string>();
    if (scale == "desk") {
      config.scale = Scale::Desk;
    } else if (scale == "paper") {
      config.scale = Scale::Paper;
    } else {
      throw ConfigError("unknown scale: '" + scale + "'");
    }
  }
  if (parsed.contains("estimators")) {
    config.estimators = parsed["estimators"].get<std::vector<std::string>>();
  }
  if (parsed.contains("estimator_overrides")) {
    for (const auto& [name, overrides] : parsed["estimator_overrides"].items()) {
      for (const auto& [key, value] : overrides.items()) {
        if (!value.is_number()) throw ConfigError("estimator override '" + key + "' must be numeric");
        config.estimator_overrides[name][key] = value.get<double>();
      }
    }
  }

  if (!parsed.contains("settings") || !parsed["settings"].is_array() || parsed["settings"].empty()) {
    throw ConfigError("config must declare a non-empty 'settings' array");
  }
  for (const auto& entry : parsed["settings"]) {
    require_known_keys(entry,
                       {"name", "dgp", "n", "n_draws", "noise_std", "feed_transformed",
                        "estimators", "split", "covariates_csv"},
                       "setting");
    SettingConfig setting;
    setting.dgp = entry.at("dgp").get<std::string>();
    setting.name = entry.value("name", setting.dgp);
    setting.n = entry.value("n", std::size_t{0});
    setting.n_draws = entry.value("n_draws", 0);
    if (entry.contains("noise_std")) setting.noise_std = entry["noise_std"].get<double>();
    setting.feed_transformed = entry.value("feed_transformed", false);
    if (entry.contains("estimators")) {
      setting.estimators = entry["estimators"].get<std::vector<std::string>>();
    }
    if (entry.contains("split")) setting.split = parse_split(entry["split"]);
    if (entry.contains("covariates_csv")) {
      setting.covariates_csv = entry["covariates_csv"].get<std::string>();
    }
    config.settings.push_back(std::move(setting));
  }

  resolve_defaults(config);
  return config;
}

void resolve_defaults(ExperimentConfig& config) {
  if (config.repetitions == 0) config.repetitions = config.scale == Scale::Desk ? 3 : 5;
  if (config.mlp_repetitions == 0) {
    config.mlp_repetitions = config.scale == Scale::Desk ? config.repetitions : 10;
  }

  std::set<std::string> names;
  for (auto& setting : config.settings) {
    if (!is_ihdp(setting.dgp) && !is_acic(setting.dgp)) {
      throw ConfigError("unknown dgp: '" + setting.dgp + "'");
    }
    if (!names.insert(setting.name).second) {
      throw ConfigError("duplicate setting name: '" + setting.name + "'");
    }
    if (setting.n == 0) {
      setting.n = is_ihdp(setting.dgp) ? 747 : (config.scale == Scale::Desk ? 2000 : 4802);
    }
    if (setting.n_draws == 0) {
      setting.n_draws = is_ihdp(setting.dgp) ? (config.scale == Scale::Desk ? 20 : 100) : 10;
    }
    if (!setting.split) {
      if (is_ihdp(setting.dgp)) {
        setting.split = data::SplitPolicy::holdout_fraction(0.10);
      } else {
        // Keep the published train share: 4000/4802 at full size.
        const auto n_test = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::llround(static_cast<double>(setting.n) * 802.0 / 4802.0)));
        setting.split = data::SplitPolicy::fixed_prefix(setting.n - n_test);
      }
    }
    if (setting.estimators.empty()) setting.estimators = config.estimators;
    if (setting.estimators.empty()) {
      throw ConfigError("setting '" + setting.name + "' has no estimators");
    }
    for (const auto& estimator : setting.estimators) {
      strategies::spec_by_name(estimator);  // validates the name
    }
  }
}

strategies::EstimatorSpec resolve_estimator(const ExperimentConfig& config, const std::string& name) {
  strategies::EstimatorSpec spec = strategies::spec_by_name(name);

  if (config.scale == Scale::Desk) {
    spec.forest.n_trees = 200;
    spec.mlp.representation_layers = {50, 50, 50};
    spec.mlp.hypothesis_layers = {25, 25};
    spec.mlp.max_epochs = 200;
  } else {
    spec.forest.n_trees = 2000;
    spec.mlp.representation_layers = {200, 200, 200};
    spec.mlp.hypothesis_layers = {100, 100};
    spec.mlp.max_epochs = 300;
  }

  const auto overrides = config.estimator_overrides.find(name);
  if (overrides == config.estimator_overrides.end()) return spec;
  for (const auto& [key, value] : overrides->second) {
    if (key == "n_trees") {
      spec.forest.n_trees = static_cast<int>(value);
    } else if (key == "min_leaf") {
      spec.forest.min_leaf = static_cast<int>(value);
    } else if (key == "mtry") {
      spec.forest.mtry = static_cast<int>(value);
    } else if (key == "max_depth") {
      spec.forest.max_depth = static_cast<int>(value);
    } else if (key == "honest") {
      spec.forest.honest = value != 0.0;
    } else if (key == "bootstrap_fraction") {
      spec.forest.bootstrap_fraction = value;
    } else if (key == "learning_rate") {
      spec.mlp.learning_rate = value;
    } else if (key == "minibatch_size") {
      spec.mlp.minibatch_size = static_cast<int>(value);
    } else if (key == "l2_penalty") {
      spec.mlp.l2_penalty = value;
    } else if (key == "validation_fraction") {
      spec.mlp.validation_fraction = value;
    } else if (key == "patience") {
      spec.mlp.patience = static_cast<int>(value);
    } else if (key == "max_epochs") {
      spec.mlp.max_epochs = static_cast<int>(value);
    } else if (key == "rep_layers") {
      spec.mlp.representation_layers.assign(static_cast<std::size_t>(value),
                                            spec.mlp.representation_layers.empty()
                                                ? 50
                                                : spec.mlp.representation_layers.front());
    } else if (key == "rep_units") {
      for (int& w : spec.mlp.representation_layers) w = static_cast<int>(value);
    } else if (key == "hyp_layers") {
      spec.mlp.hypothesis_layers.assign(static_cast<std::size_t>(value),
                                        spec.mlp.hypothesis_layers.empty()
                                            ? 25
                                            : spec.mlp.hypothesis_layers.front());
    } else if (key == "hyp_units") {
      for (int& w : spec.mlp.hypothesis_layers) w = static_cast<int>(value);
    } else if (key == "cross_fit") {
      spec.cross_fit = value != 0.0;
    } else if (key == "cross_fit_folds") {
      spec.cross_fit_folds = static_cast<int>(value);
    } else if (key == "propensity_clip") {
      spec.propensity_clip = value;
    } else {
      throw ConfigError("unknown estimator override: '" + key + "'");
    }
  }
  return spec;
}

std::uint64_t dgp_fingerprint(const SettingConfig& setting) {
  // The additive IHDP variant shares the original's stochastic identity so
  // both settings realize the same coefficient draws.
  const std::string family = is_ihdp(setting.dgp) ? "ihdp" : setting.dgp;
  std::string text = family + "|n=" + std::to_string(setting.n);
  if (setting.noise_std) text += "|noise=" + std::to_string(*setting.noise_std);
  if (setting.covariates_csv) text += "|cov=" + setting.covariates_csv->string();
  return fnv1a(text);
}

ExperimentConfig desk_suite(std::uint64_t master_seed) {
  ExperimentConfig config;
  config.master_seed = master_seed;
  config.scale = Scale::Desk;

  auto add_setting = [&](std::string name, std::string dgp, std::vector<std::string> estimators,
                         bool feed_transformed = false) {
    SettingConfig setting;
    setting.name = std::move(name);
    setting.dgp = std::move(dgp);
    setting.estimators = std::move(estimators);
    setting.feed_transformed = feed_transformed;
    config.settings.push_back(std::move(setting));
  };

  add_setting("ihdp", "ihdp", {"tnet", "tarnet", "trf", "srf", "cf", "rrf", "rnet"});
  add_setting("ihdp-additive", "ihdp-additive", {"trf", "srf", "cf"});
  add_setting("acic-none", "acic-none", {"trf", "srf", "rrf"});
  add_setting("acic-low", "acic-low", {"trf", "srf", "rrf"});
  add_setting("acic-high", "acic-high", {"trf", "srf", "rrf", "tarnet"});
  add_setting("acic-high-transformed", "acic-high", {"trf", "tarnet"}, /*feed_transformed=*/true);

  resolve_defaults(config);
  return config;
}

}  // namespace hte::harness
