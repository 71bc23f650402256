#pragma once

// The five CATE estimation strategies: T-learner backends and S-learner
// backends (indirect, potential-outcome regressions), the two-head
// shared-representation network (indirect), and the Robinson-style direct
// estimators (R-learner on either base, honest moment forest).

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hte/data/dataset.hpp"
#include "hte/learners/forest.hpp"
#include "hte/learners/mlp.hpp"

namespace hte::strategies {

class StrategyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Strategy { TLearner, SLearner, TarNet, RLearner, CausalForest };
enum class BaseLearner { Forest, Mlp };

bool is_indirect(Strategy strategy);
const char* strategy_name(Strategy strategy);

struct EstimatorSpec {
  std::string name;
  Strategy strategy = Strategy::TLearner;
  BaseLearner base = BaseLearner::Forest;
  learners::ForestParams forest;
  learners::MlpParams mlp;
  bool cross_fit = false;  // RLearner/CausalForest nuisances
  int cross_fit_folds = 5;
  double propensity_clip = 0.01;
};

// Named estimators addressable from harness configs:
// trf, srf, cf, rrf, tnet, tarnet, rnet.
EstimatorSpec spec_by_name(const std::string& name);
std::vector<std::string> known_estimator_names();

// Fitting operates on plain training arrays so the harness can hand any
// design (raw or transformed) to the estimator.
struct TrainingSet {
  Matrix x;
  std::vector<double> y;
  std::vector<std::uint8_t> w;
};

TrainingSet training_view(const data::SimulationDraw& draw, const Matrix& design);

struct NuisanceEstimates {
  std::vector<double> m_hat;              // estimate of E[Y|X] on the training rows
  std::vector<double> e_hat;              // estimate of e(x), clipped to [clip, 1-clip]
  std::vector<int> fold_of_sample;        // empty when fitted in-sample
};

NuisanceEstimates estimate_nuisances(const TrainingSet& train, const EstimatorSpec& spec,
                                     std::uint64_t seed);

// A fitted regression usable behind either base learner.
struct RegressionModel {
  std::optional<learners::ForestModel> forest;
  std::optional<learners::MlpModel> mlp;
  std::vector<double> predict(const Matrix& x) const;
};

struct TLearnerModel {
  RegressionModel mu0;
  RegressionModel mu1;
};
struct SLearnerModel {
  RegressionModel joint;  // fitted on [X, W]
};
struct TarNetModel {
  learners::MlpModel net;
};
struct RLearnerModel {
  RegressionModel tau;
};
struct CausalForestModel {
  learners::ForestModel forest;
};

struct CATEModel {
  Strategy strategy = Strategy::TLearner;
  BaseLearner base = BaseLearner::Forest;
  std::variant<TLearnerModel, SLearnerModel, TarNetModel, RLearnerModel, CausalForestModel> impl;
};

CATEModel fit_estimator(const TrainingSet& train, const EstimatorSpec& spec, std::uint64_t seed);

// Second stages with caller-supplied nuisances (fit_estimator wires them to
// estimate_nuisances; tests inject oracles here).
CATEModel fit_r_learner(const TrainingSet& train, const EstimatorSpec& spec,
                        const NuisanceEstimates& nuisances, std::uint64_t seed);
CATEModel fit_causal_forest(const TrainingSet& train, const EstimatorSpec& spec,
                            const NuisanceEstimates& nuisances, std::uint64_t seed);

std::vector<double> predict_cate(const CATEModel& model, const Matrix& x);
// Present iff the strategy is indirect; direct strategies throw.
std::vector<double> predict_mu0(const CATEModel& model, const Matrix& x);
std::vector<double> predict_mu1(const CATEModel& model, const Matrix& x);

// The two algebraically identical writings of the Robinson objective,
// exposed per sample: direct ((y-m) - (w-e)*tau)^2 versus weighted
// (w-e)^2 * ((y-m)/(w-e) - tau)^2.
std::vector<double> r_loss_terms_direct(std::span<const double> y, std::span<const double> m_hat,
                                        std::span<const std::uint8_t> w, std::span<const double> e_hat,
                                        std::span<const double> tau);
std::vector<double> r_loss_terms_weighted(std::span<const double> y, std::span<const double> m_hat,
                                          std::span<const std::uint8_t> w,
                                          std::span<const double> e_hat, std::span<const double> tau);

}  // namespace hte::strategies
