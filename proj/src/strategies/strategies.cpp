#include "hte/strategies/strategies.hpp"

#include <algorithm>
#include <cmath>

#include "hte/common/rng.hpp"

namespace hte::strategies {

bool is_indirect(Strategy strategy) {
  return strategy == Strategy::TLearner || strategy == Strategy::SLearner ||
         strategy == Strategy::TarNet;
}

const char* strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::TLearner:
      return "t-learner";
    case Strategy::SLearner:
      return "s-learner";
    case Strategy::TarNet:
      return "tarnet";
    case Strategy::RLearner:
      return "r-learner";
    case Strategy::CausalForest:
      return "causal-forest";
  }
  return "unknown";
}

EstimatorSpec spec_by_name(const std::string& name) {
  EstimatorSpec spec;
  spec.name = name;
  if (name == "trf") {
    spec.strategy = Strategy::TLearner;
    spec.base = BaseLearner::Forest;
  } else if (name == "srf") {
    spec.strategy = Strategy::SLearner;
    spec.base = BaseLearner::Forest;
  } else if (name == "cf") {
    spec.strategy = Strategy::CausalForest;
    spec.base = BaseLearner::Forest;
  } else if (name == "rrf") {
    spec.strategy = Strategy::RLearner;
    spec.base = BaseLearner::Forest;
  } else if (name == "tnet") {
    spec.strategy = Strategy::TLearner;
    spec.base = BaseLearner::Mlp;
  } else if (name == "tarnet") {
    spec.strategy = Strategy::TarNet;
    spec.base = BaseLearner::Mlp;
  } else if (name == "rnet") {
    spec.strategy = Strategy::RLearner;
    spec.base = BaseLearner::Mlp;
  } else {
    throw StrategyError("unknown estimator name: '" + name + "'");
  }
  return spec;
}

std::vector<std::string> known_estimator_names() {
  return {"trf", "srf", "cf", "rrf", "tnet", "tarnet", "rnet"};
}

TrainingSet training_view(const data::SimulationDraw& draw, const Matrix& design) {
  TrainingSet train;
  const auto& idx = draw.split.train_indices;
  train.x = Matrix(idx.size(), design.cols());
  train.y.reserve(idx.size());
  train.w.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = design.row(idx[i]);
    std::copy(row.begin(), row.end(), train.x.row(i).begin());
    train.y.push_back(draw.outcome[idx[i]]);
    train.w.push_back(draw.treatment[idx[i]]);
  }
  return train;
}

std::vector<double> RegressionModel::predict(const Matrix& x) const {
  if (forest) return learners::predict_forest(*forest, x);
  if (mlp) return learners::predict_mlp(*mlp, x);
  throw StrategyError("regression model has no fitted backend");
}

namespace {

void check_spec(const EstimatorSpec& spec) {
  if (spec.strategy == Strategy::TarNet && spec.base != BaseLearner::Mlp) {
    throw StrategyError("tarnet requires the mlp base");
  }
  if (spec.strategy == Strategy::CausalForest && spec.base != BaseLearner::Forest) {
    throw StrategyError("causal forest requires the forest base");
  }
  if (!(spec.propensity_clip > 0.0 && spec.propensity_clip < 0.5)) {
    throw StrategyError("propensity_clip must lie in (0, 0.5)");
  }
}

RegressionModel fit_regression(const Matrix& x, std::span<const double> y,
                               std::span<const double> weights, const EstimatorSpec& spec,
                               std::uint64_t seed) {
  RegressionModel model;
  if (spec.base == BaseLearner::Forest) {
    learners::ForestParams params = spec.forest;
    params.seed = seed;
    model.forest = learners::fit_forest(x, y, weights, params);
  } else {
    learners::MlpParams params = spec.mlp;
    params.seed = seed;
    learners::MlpTrainingData train;
    train.x = &x;
    train.y = y;
    train.weights = weights;
    model.mlp = learners::fit_mlp(train, params, learners::MlpArchitecture::PlainRegressor);
  }
  return model;
}

Matrix with_treatment_column(const Matrix& x, std::span<const std::uint8_t> w) {
  Matrix joint(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    std::copy(row.begin(), row.end(), joint.row(i).begin());
    joint(i, x.cols()) = static_cast<double>(w[i]);
  }
  return joint;
}

Matrix with_constant_column(const Matrix& x, double value) {
  Matrix out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    std::copy(row.begin(), row.end(), out.row(i).begin());
    out(i, x.cols()) = value;
  }
  return out;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = x.row(rows[i]);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

CATEModel fit_t_learner(const TrainingSet& train, const EstimatorSpec& spec, std::uint64_t seed) {
  std::vector<std::size_t> controls, treated;
  for (std::size_t i = 0; i < train.w.size(); ++i) {
    (train.w[i] ? treated : controls).push_back(i);
  }
  if (controls.empty() || treated.empty()) {
    throw StrategyError("t-learner: one treatment arm is empty");
  }

  auto fit_arm = [&](const std::vector<std::size_t>& arm, std::uint64_t arm_seed) {
    const Matrix x_arm = gather_rows(train.x, arm);
    std::vector<double> y_arm;
    y_arm.reserve(arm.size());
    for (std::size_t i : arm) y_arm.push_back(train.y[i]);
    return fit_regression(x_arm, y_arm, {}, spec, arm_seed);
  };

  TLearnerModel model;
  model.mu0 = fit_arm(controls, rng::derive_seed(seed, {0}));
  model.mu1 = fit_arm(treated, rng::derive_seed(seed, {1}));
  return CATEModel{spec.strategy, spec.base, std::move(model)};
}

CATEModel fit_s_learner(const TrainingSet& train, const EstimatorSpec& spec, std::uint64_t seed) {
  const Matrix joint = with_treatment_column(train.x, train.w);
  SLearnerModel model;
  model.joint = fit_regression(joint, train.y, {}, spec, rng::derive_seed(seed, {2}));
  return CATEModel{spec.strategy, spec.base, std::move(model)};
}

CATEModel fit_tarnet(const TrainingSet& train, const EstimatorSpec& spec, std::uint64_t seed) {
  learners::MlpParams params = spec.mlp;
  params.seed = rng::derive_seed(seed, {3});
  learners::MlpTrainingData data;
  data.x = &train.x;
  data.y = train.y;
  data.heads = train.w;
  TarNetModel model;
  model.net = learners::fit_mlp(data, params, learners::MlpArchitecture::SharedRepresentationTwoHeads);
  return CATEModel{spec.strategy, spec.base, std::move(model)};
}

}  // namespace

NuisanceEstimates estimate_nuisances(const TrainingSet& train, const EstimatorSpec& spec,
                                     std::uint64_t seed) {
  if (train.y.empty()) throw StrategyError("estimate_nuisances: empty training set");
  NuisanceEstimates nuisances;
  const std::size_t n = train.y.size();
  std::vector<double> w_real(n);
  for (std::size_t i = 0; i < n; ++i) w_real[i] = static_cast<double>(train.w[i]);

  // The nuisance fits are plain predictive regressions; when mtry is left
  // on automatic they get the wider sqrt(d)+20 candidate set regression
  // forests ship with, which the Robinson residuals need to stay orthogonal.
  EstimatorSpec nuisance_spec = spec;
  if (nuisance_spec.base == BaseLearner::Forest && nuisance_spec.forest.mtry == 0) {
    const auto d = static_cast<double>(train.x.cols());
    nuisance_spec.forest.mtry = static_cast<int>(
        std::min(d, std::ceil(std::sqrt(d)) + 20.0));
  }

  if (!spec.cross_fit) {
    // In-sample fits, matching the no-cross-fitting configuration. Forest
    // nuisances are read back out-of-bag so a unit's own label cannot leak
    // into its residual (the standard forest behaviour); network nuisances
    // rely on early stopping.
    if (spec.base == BaseLearner::Forest) {
      learners::ForestParams params = nuisance_spec.forest;
      params.keep_inbag = true;
      params.seed = rng::derive_seed(seed, {10});
      const auto m_model = learners::fit_forest(train.x, train.y, {}, params);
      params.seed = rng::derive_seed(seed, {11});
      const auto e_model = learners::fit_forest(train.x, w_real, {}, params);
      nuisances.m_hat = learners::predict_forest_oob(m_model, train.x);
      nuisances.e_hat = learners::predict_forest_oob(e_model, train.x);
    } else {
      const RegressionModel m_model =
          fit_regression(train.x, train.y, {}, nuisance_spec, rng::derive_seed(seed, {10}));
      const RegressionModel e_model =
          fit_regression(train.x, w_real, {}, nuisance_spec, rng::derive_seed(seed, {11}));
      nuisances.m_hat = m_model.predict(train.x);
      nuisances.e_hat = e_model.predict(train.x);
    }
  } else {
    const int k = std::max(2, spec.cross_fit_folds);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng::Rng fold_stream(rng::derive_seed(seed, {12}));
    fold_stream.shuffle(order);
    nuisances.fold_of_sample.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) {
      nuisances.fold_of_sample[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    nuisances.m_hat.assign(n, 0.0);
    nuisances.e_hat.assign(n, 0.0);
    for (int fold = 0; fold < k; ++fold) {
      std::vector<std::size_t> in_fold, out_of_fold;
      for (std::size_t i = 0; i < n; ++i) {
        (nuisances.fold_of_sample[i] == fold ? in_fold : out_of_fold).push_back(i);
      }
      if (in_fold.empty() || out_of_fold.empty()) {
        throw StrategyError("cross-fitting fold is degenerate");
      }
      const Matrix x_fit = gather_rows(train.x, out_of_fold);
      std::vector<double> y_fit, w_fit;
      for (std::size_t i : out_of_fold) {
        y_fit.push_back(train.y[i]);
        w_fit.push_back(w_real[i]);
      }
      const RegressionModel m_model =
          fit_regression(x_fit, y_fit, {}, nuisance_spec, rng::derive_seed(seed, {13, static_cast<std::uint64_t>(fold)}));
      const RegressionModel e_model =
          fit_regression(x_fit, w_fit, {}, nuisance_spec, rng::derive_seed(seed, {14, static_cast<std::uint64_t>(fold)}));
      const Matrix x_predict = gather_rows(train.x, in_fold);
      const std::vector<double> m_pred = m_model.predict(x_predict);
      const std::vector<double> e_pred = e_model.predict(x_predict);
      for (std::size_t pos = 0; pos < in_fold.size(); ++pos) {
        nuisances.m_hat[in_fold[pos]] = m_pred[pos];
        nuisances.e_hat[in_fold[pos]] = e_pred[pos];
      }
    }
  }

  for (double& e : nuisances.e_hat) {
    e = std::clamp(e, spec.propensity_clip, 1.0 - spec.propensity_clip);
  }
  return nuisances;
}

namespace {

struct Residuals {
  std::vector<double> y_res;  // Y - m_hat
  std::vector<double> w_res;  // W - e_hat; bounded away from 0 by the clip
};

Residuals residualize(const TrainingSet& train, const NuisanceEstimates& nuisances) {
  Residuals res;
  const std::size_t n = train.y.size();
  res.y_res.resize(n);
  res.w_res.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.y_res[i] = train.y[i] - nuisances.m_hat[i];
    res.w_res[i] = static_cast<double>(train.w[i]) - nuisances.e_hat[i];
  }
  return res;
}

}  // namespace

CATEModel fit_r_learner(const TrainingSet& train, const EstimatorSpec& spec,
                        const NuisanceEstimates& nuisances, std::uint64_t seed) {
  const Residuals res = residualize(train, nuisances);
  const std::size_t n = train.y.size();

  // Minimizing sum ((y-m) - (w-e) tau(x))^2 equals the weighted regression
  // of the pseudo-outcome (y-m)/(w-e) with weights (w-e)^2; both bases fit
  // that form.
  std::vector<double> pseudo(n), weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    pseudo[i] = res.y_res[i] / res.w_res[i];
    weight[i] = res.w_res[i] * res.w_res[i];
  }

  RLearnerModel model;
  model.tau = fit_regression(train.x, pseudo, weight, spec, rng::derive_seed(seed, {5}));
  return CATEModel{spec.strategy, spec.base, std::move(model)};
}

CATEModel fit_causal_forest(const TrainingSet& train, const EstimatorSpec& spec,
                            const NuisanceEstimates& nuisances, std::uint64_t seed) {
  const Residuals res = residualize(train, nuisances);

  learners::ForestParams params = spec.forest;
  params.honest = true;
  params.seed = rng::derive_seed(seed, {7});
  CausalForestModel model;
  model.forest = learners::fit_moment_forest(train.x, res.y_res, res.w_res, params);
  return CATEModel{spec.strategy, spec.base, std::move(model)};
}

CATEModel fit_estimator(const TrainingSet& train, const EstimatorSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  if (train.y.size() != train.x.rows() || train.w.size() != train.x.rows()) {
    throw StrategyError("fit_estimator: inconsistent training set");
  }
  if (train.y.empty()) throw StrategyError("fit_estimator: empty training set");
  switch (spec.strategy) {
    case Strategy::TLearner:
      return fit_t_learner(train, spec, seed);
    case Strategy::SLearner:
      return fit_s_learner(train, spec, seed);
    case Strategy::TarNet:
      return fit_tarnet(train, spec, seed);
    case Strategy::RLearner:
      return fit_r_learner(train, spec, estimate_nuisances(train, spec, rng::derive_seed(seed, {4})),
                           seed);
    case Strategy::CausalForest:
      return fit_causal_forest(train, spec,
                               estimate_nuisances(train, spec, rng::derive_seed(seed, {6})), seed);
  }
  throw StrategyError("unhandled strategy");
}

std::vector<double> predict_mu0(const CATEModel& model, const Matrix& x) {
  if (const auto* t = std::get_if<TLearnerModel>(&model.impl)) return t->mu0.predict(x);
  if (const auto* s = std::get_if<SLearnerModel>(&model.impl)) {
    return s->joint.predict(with_constant_column(x, 0.0));
  }
  if (const auto* tar = std::get_if<TarNetModel>(&model.impl)) {
    return learners::predict_mlp(tar->net, x, learners::Head::Head0);
  }
  throw StrategyError("direct strategies expose no potential-outcome predictions");
}

std::vector<double> predict_mu1(const CATEModel& model, const Matrix& x) {
  if (const auto* t = std::get_if<TLearnerModel>(&model.impl)) return t->mu1.predict(x);
  if (const auto* s = std::get_if<SLearnerModel>(&model.impl)) {
    return s->joint.predict(with_constant_column(x, 1.0));
  }
  if (const auto* tar = std::get_if<TarNetModel>(&model.impl)) {
    return learners::predict_mlp(tar->net, x, learners::Head::Head1);
  }
  throw StrategyError("direct strategies expose no potential-outcome predictions");
}

std::vector<double> predict_cate(const CATEModel& model, const Matrix& x) {
  if (is_indirect(model.strategy)) {
    std::vector<double> tau = predict_mu1(model, x);
    const std::vector<double> mu0 = predict_mu0(model, x);
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] -= mu0[i];
    return tau;
  }
  if (const auto* r = std::get_if<RLearnerModel>(&model.impl)) return r->tau.predict(x);
  if (const auto* cf = std::get_if<CausalForestModel>(&model.impl)) {
    return learners::predict_forest(cf->forest, x);
  }
  throw StrategyError("unhandled model kind");
}

std::vector<double> r_loss_terms_direct(std::span<const double> y, std::span<const double> m_hat,
                                        std::span<const std::uint8_t> w, std::span<const double> e_hat,
                                        std::span<const double> tau) {
  std::vector<double> terms(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double residual = (y[i] - m_hat[i]) - (static_cast<double>(w[i]) - e_hat[i]) * tau[i];
    terms[i] = residual * residual;
  }
  return terms;
}

std::vector<double> r_loss_terms_weighted(std::span<const double> y, std::span<const double> m_hat,
                                          std::span<const std::uint8_t> w,
                                          std::span<const double> e_hat, std::span<const double> tau) {
  std::vector<double> terms(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(w[i]) - e_hat[i];
    const double pseudo = (y[i] - m_hat[i]) / d;
    terms[i] = d * d * (pseudo - tau[i]) * (pseudo - tau[i]);
  }
  return terms;
}

}  // namespace hte::strategies
