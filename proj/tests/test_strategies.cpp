#include <doctest.h>

#include <cmath>

#include "hte/common/rng.hpp"
#include "hte/strategies/strategies.hpp"

using namespace hte;
using strategies::BaseLearner;
using strategies::EstimatorSpec;
using strategies::Strategy;
using strategies::TrainingSet;

namespace {

EstimatorSpec fast_spec(const std::string& name) {
  EstimatorSpec spec = strategies::spec_by_name(name);
  spec.forest.n_trees = 40;
  spec.mlp.representation_layers = {16, 16};
  spec.mlp.hypothesis_layers = {8};
  spec.mlp.max_epochs = 40;
  spec.mlp.minibatch_size = 50;
  return spec;
}

// Zero-noise two-arm data with constant potential outcomes.
TrainingSet constant_arms(std::size_t n, double c0, double c1, rng::Rng& stream) {
  TrainingSet train;
  train.x = Matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) train.x(i, j) = stream.normal();
    const bool treated = stream.bernoulli(0.4);
    train.w.push_back(treated ? 1 : 0);
    train.y.push_back(treated ? c1 : c0);
  }
  return train;
}

TrainingSet smooth_effect_data(std::size_t n, rng::Rng& stream, double noise = 0.0) {
  // mu0 = x0, tau = sin(x0) + 1; e = 0.5.
  TrainingSet train;
  train.x = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    train.x(i, 0) = stream.uniform(-2.0, 2.0);
    train.x(i, 1) = stream.normal();
    const bool treated = stream.bernoulli(0.5);
    const double tau = std::sin(train.x(i, 0)) + 1.0;
    train.w.push_back(treated ? 1 : 0);
    train.y.push_back(train.x(i, 0) + (treated ? tau : 0.0) + noise * stream.normal());
  }
  return train;
}

}  // namespace

TEST_CASE("estimator name registry") {
  for (const auto& name : strategies::known_estimator_names()) {
    CHECK_NOTHROW(strategies::spec_by_name(name));
  }
  CHECK_THROWS_AS(strategies::spec_by_name("xlearner"), strategies::StrategyError);

  CHECK(strategies::spec_by_name("tarnet").base == BaseLearner::Mlp);
  CHECK(strategies::spec_by_name("cf").strategy == Strategy::CausalForest);

  auto bad = strategies::spec_by_name("tarnet");
  bad.base = BaseLearner::Forest;
  rng::Rng stream(1);
  const auto train = constant_arms(60, 0.0, 1.0, stream);
  CHECK_THROWS_AS(strategies::fit_estimator(train, bad, 1), strategies::StrategyError);
}

TEST_CASE("t-learner on constant arms recovers the constant effect") {
  rng::Rng stream(2);
  const auto train = constant_arms(120, 1.0, 3.5, stream);
  const auto model = strategies::fit_estimator(train, fast_spec("trf"), 5);
  for (double tau : strategies::predict_cate(model, train.x)) {
    CHECK(tau == doctest::Approx(2.5).epsilon(1e-6));
  }
}

TEST_CASE("t-learner rejects an empty arm") {
  rng::Rng stream(3);
  auto train = constant_arms(50, 0.0, 1.0, stream);
  for (auto& w : train.w) w = 0;
  CHECK_THROWS_AS(strategies::fit_estimator(train, fast_spec("trf"), 1), strategies::StrategyError);
}

TEST_CASE("indirect identity: predict_tau equals predict_mu1 - predict_mu0 bitwise") {
  rng::Rng stream(4);
  const auto train = smooth_effect_data(150, stream, 0.2);
  Matrix x_new(30, 2);
  for (std::size_t i = 0; i < 30; ++i) {
    x_new(i, 0) = stream.uniform(-2.0, 2.0);
    x_new(i, 1) = stream.normal();
  }

  for (const char* name : {"trf", "srf", "tnet", "tarnet"}) {
    const auto model = strategies::fit_estimator(train, fast_spec(name), 9);
    const auto tau = strategies::predict_cate(model, x_new);
    const auto mu0 = strategies::predict_mu0(model, x_new);
    const auto mu1 = strategies::predict_mu1(model, x_new);
    for (std::size_t i = 0; i < tau.size(); ++i) {
      CHECK(tau[i] == mu1[i] - mu0[i]);
    }
  }
}

TEST_CASE("direct strategies expose no potential-outcome predictions") {
  rng::Rng stream(5);
  const auto train = smooth_effect_data(120, stream);
  const auto model = strategies::fit_estimator(train, fast_spec("cf"), 3);
  CHECK_THROWS_AS(strategies::predict_mu0(model, train.x), strategies::StrategyError);
  CHECK_THROWS_AS(strategies::predict_mu1(model, train.x), strategies::StrategyError);
}

TEST_CASE("pointwise indirect error bound holds at every point") {
  rng::Rng stream(6);
  const auto train = smooth_effect_data(200, stream, 0.5);
  Matrix x_new(50, 2);
  std::vector<double> mu0_true(50), mu1_true(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x_new(i, 0) = stream.uniform(-2.0, 2.0);
    x_new(i, 1) = stream.normal();
    mu0_true[i] = x_new(i, 0);
    mu1_true[i] = x_new(i, 0) + std::sin(x_new(i, 0)) + 1.0;
  }

  const auto model = strategies::fit_estimator(train, fast_spec("trf"), 11);
  const auto tau_hat = strategies::predict_cate(model, x_new);
  const auto mu0_hat = strategies::predict_mu0(model, x_new);
  const auto mu1_hat = strategies::predict_mu1(model, x_new);
  for (std::size_t i = 0; i < 50; ++i) {
    const double tau_err = tau_hat[i] - (mu1_true[i] - mu0_true[i]);
    const double e1 = mu1_hat[i] - mu1_true[i];
    const double e0 = mu0_hat[i] - mu0_true[i];
    CHECK(tau_err * tau_err <= 2.0 * e1 * e1 + 2.0 * e0 * e0 + 1e-12);
  }
}

TEST_CASE("s-learner that never splits on treatment predicts zero effect") {
  rng::Rng stream(7);
  const std::size_t n = 150;
  TrainingSet train;
  train.x = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    train.x(i, 0) = stream.normal();
    train.x(i, 1) = stream.normal();
    train.w.push_back(stream.bernoulli(0.5) ? 1 : 0);
    train.y.push_back(train.x(i, 0));  // treatment-free target
  }

  auto spec = fast_spec("srf");
  spec.forest.mtry = 3;  // all features including the appended W column
  const auto model = strategies::fit_estimator(train, spec, 13);

  const auto& forest = std::get<strategies::SLearnerModel>(model.impl).joint.forest;
  REQUIRE(forest.has_value());
  bool splits_on_w = false;
  for (const auto& tree : forest->trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature == 2) splits_on_w = true;
    }
  }
  CHECK_FALSE(splits_on_w);
  for (double tau : strategies::predict_cate(model, train.x)) CHECK(tau == 0.0);
}

TEST_CASE("nuisance estimation: sanity, clipping, cross-fitting bookkeeping") {
  rng::Rng stream(8);
  const auto train = smooth_effect_data(400, stream, 0.3);

  SUBCASE("randomized treatment gives a near-half propensity estimate") {
    const auto nuisances = strategies::estimate_nuisances(train, fast_spec("rrf"), 3);
    double mean_e = 0.0;
    for (double e : nuisances.e_hat) {
      mean_e += e;
      CHECK(e >= 0.01);
      CHECK(e <= 0.99);
    }
    mean_e /= static_cast<double>(nuisances.e_hat.size());
    CHECK(mean_e > 0.4);
    CHECK(mean_e < 0.6);
    CHECK(nuisances.fold_of_sample.empty());  // in-sample by default
  }

  SUBCASE("cross-fitting partitions samples into non-degenerate folds") {
    auto spec = fast_spec("rrf");
    spec.cross_fit = true;
    spec.cross_fit_folds = 5;
    const auto nuisances = strategies::estimate_nuisances(train, spec, 3);
    REQUIRE(nuisances.fold_of_sample.size() == train.y.size());
    std::vector<int> counts(5, 0);
    for (int fold : nuisances.fold_of_sample) {
      REQUIRE(fold >= 0);
      REQUIRE(fold < 5);
      ++counts[static_cast<std::size_t>(fold)];
    }
    for (int c : counts) CHECK(c > 0);
  }
}

TEST_CASE("r-learner with perfect nuisances and zero effect fits zero") {
  rng::Rng stream(9);
  const std::size_t n = 200;
  TrainingSet train;
  train.x = Matrix(n, 2);
  strategies::NuisanceEstimates oracle;
  for (std::size_t i = 0; i < n; ++i) {
    train.x(i, 0) = stream.normal();
    train.x(i, 1) = stream.normal();
    const bool treated = stream.bernoulli(0.5);
    train.w.push_back(treated ? 1 : 0);
    const double mu = 2.0 * train.x(i, 0);
    train.y.push_back(mu);  // tau == 0, zero noise
    oracle.m_hat.push_back(mu);
    oracle.e_hat.push_back(0.5);
  }

  const auto model = strategies::fit_r_learner(train, fast_spec("rrf"), oracle, 5);
  for (double tau : strategies::predict_cate(model, train.x)) {
    CHECK(std::abs(tau) <= 1e-6);
  }
}

TEST_CASE("the two writings of the R objective agree per sample") {
  rng::Rng stream(10);
  const auto train = smooth_effect_data(150, stream, 0.4);
  const auto spec = fast_spec("rrf");
  const auto nuisances = strategies::estimate_nuisances(train, spec, 21);
  const auto model = strategies::fit_r_learner(train, spec, nuisances, 21);
  const auto tau_hat = strategies::predict_cate(model, train.x);

  const auto direct =
      strategies::r_loss_terms_direct(train.y, nuisances.m_hat, train.w, nuisances.e_hat, tau_hat);
  const auto weighted =
      strategies::r_loss_terms_weighted(train.y, nuisances.m_hat, train.w, nuisances.e_hat, tau_hat);
  REQUIRE(direct.size() == weighted.size());
  for (std::size_t i = 0; i < direct.size(); ++i) {
    CHECK(std::abs(direct[i] - weighted[i]) <= 1e-12 * (1.0 + std::abs(direct[i])));
  }
}

TEST_CASE("causal forest with perfect nuisances recovers a constant effect") {
  rng::Rng stream(11);
  const std::size_t n = 250;
  const double tau = 1.75;
  TrainingSet train;
  train.x = Matrix(n, 3);
  strategies::NuisanceEstimates oracle;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) train.x(i, j) = stream.normal();
    const bool treated = stream.bernoulli(0.4);
    train.w.push_back(treated ? 1 : 0);
    const double mu0 = train.x(i, 1);
    train.y.push_back(mu0 + (treated ? tau : 0.0));
    oracle.m_hat.push_back(mu0 + 0.4 * tau);  // E[Y|X] under e = 0.4
    oracle.e_hat.push_back(0.4);
  }

  const auto model = strategies::fit_causal_forest(train, fast_spec("cf"), oracle, 3);
  for (double t : strategies::predict_cate(model, train.x)) {
    CHECK(t == doctest::Approx(tau).epsilon(1e-8));
  }
}

TEST_CASE("causal forest and r-forest agree on a smooth one-dimensional effect") {
  rng::Rng stream(12);
  const auto train = smooth_effect_data(500, stream, 0.2);

  auto spec_cf = fast_spec("cf");
  auto spec_rrf = fast_spec("rrf");
  spec_cf.forest.n_trees = 100;
  spec_rrf.forest.n_trees = 100;

  const auto cf = strategies::fit_estimator(train, spec_cf, 31);
  const auto rrf = strategies::fit_estimator(train, spec_rrf, 31);

  Matrix x_new(100, 2);
  std::vector<double> tau_true(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x_new(i, 0) = stream.uniform(-2.0, 2.0);
    x_new(i, 1) = stream.normal();
    tau_true[i] = std::sin(x_new(i, 0)) + 1.0;
  }
  const auto tau_cf = strategies::predict_cate(cf, x_new);
  const auto tau_rrf = strategies::predict_cate(rrf, x_new);

  double mean_gap = 0.0, mean_tau = 0.0, ss_tau = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    mean_gap += std::abs(tau_cf[i] - tau_rrf[i]);
    mean_tau += tau_true[i];
  }
  mean_gap /= 100.0;
  mean_tau /= 100.0;
  for (double t : tau_true) ss_tau += (t - mean_tau) * (t - mean_tau);
  const double sd_tau = std::sqrt(ss_tau / 100.0);
  CHECK(mean_gap < 0.5 * sd_tau);
}

TEST_CASE("fits are deterministic under a fixed seed") {
  rng::Rng stream(13);
  const auto train = smooth_effect_data(150, stream, 0.3);
  for (const char* name : {"trf", "cf", "tarnet"}) {
    const auto a = strategies::fit_estimator(train, fast_spec(name), 77);
    const auto b = strategies::fit_estimator(train, fast_spec(name), 77);
    CHECK(strategies::predict_cate(a, train.x) == strategies::predict_cate(b, train.x));
  }
}
