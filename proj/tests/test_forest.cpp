#include <doctest.h>

#include <cmath>

#include "hte/common/rng.hpp"
#include "hte/learners/forest.hpp"

using namespace hte;
using learners::ForestParams;

namespace {

Matrix random_design(std::size_t n, std::size_t d, rng::Rng& stream) {
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = stream.normal();
  }
  return x;
}

ForestParams small_forest(int n_trees = 50) {
  ForestParams params;
  params.n_trees = n_trees;
  params.seed = 7;
  return params;
}

}  // namespace

TEST_CASE("constant targets give constant predictions") {
  rng::Rng stream(1);
  const Matrix x = random_design(80, 4, stream);
  const std::vector<double> y(80, 3.25);
  const auto model = learners::fit_forest(x, y, {}, small_forest());
  for (double p : learners::predict_forest(model, x)) CHECK(p == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("deep trees represent an axis-aligned step exactly at training points") {
  rng::Rng stream(2);
  const std::size_t n = 200;
  Matrix x = random_design(n, 3, stream);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = x(i, 0) > 0.0 ? 1.0 : -1.0;

  ForestParams params = small_forest(100);
  params.min_leaf = 1;
  params.bootstrap_fraction = 1.0;  // every tree sees every point
  const auto model = learners::fit_forest(x, y, {}, params);
  const auto predictions = learners::predict_forest(model, x);
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) mse += (predictions[i] - y[i]) * (predictions[i] - y[i]);
  mse /= static_cast<double>(n);
  CHECK(mse < 1e-3);
}

TEST_CASE("predictions stay within the training label range") {
  rng::Rng stream(3);
  const Matrix x = random_design(150, 5, stream);
  std::vector<double> y(150);
  for (double& v : y) v = 10.0 * stream.normal();
  double lo = y[0], hi = y[0];
  for (double v : y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  for (bool honest : {false, true}) {
    ForestParams params = small_forest();
    params.honest = honest;
    const auto model = learners::fit_forest(x, y, {}, params);
    const Matrix x_new = random_design(100, 5, stream);
    for (double p : learners::predict_forest(model, x_new)) {
      CHECK(p >= lo);
      CHECK(p <= hi);
    }
  }
}

TEST_CASE("repeated prediction and repeated fits are identical") {
  rng::Rng stream(4);
  const Matrix x = random_design(60, 4, stream);
  std::vector<double> y(60);
  for (double& v : y) v = stream.normal();

  const auto model_a = learners::fit_forest(x, y, {}, small_forest());
  const auto model_b = learners::fit_forest(x, y, {}, small_forest());
  const auto pred_a = learners::predict_forest(model_a, x);
  const auto pred_b = learners::predict_forest(model_b, x);
  CHECK(pred_a == pred_b);
  CHECK(pred_a == learners::predict_forest(model_a, x));
}

TEST_CASE("tree growth is independent of the thread count") {
  rng::Rng stream(12);
  const Matrix x = random_design(120, 5, stream);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) y[i] = x(i, 1) + 0.1 * stream.normal();

  ForestParams serial = small_forest();
  ForestParams threaded = small_forest();
  threaded.n_threads = 4;
  const auto pred_serial = learners::predict_forest(learners::fit_forest(x, y, {}, serial), x);
  const auto pred_threaded = learners::predict_forest(learners::fit_forest(x, y, {}, threaded), x);
  CHECK(pred_serial == pred_threaded);
}

TEST_CASE("training-point predictions are invariant under monotone feature transforms") {
  rng::Rng stream(5);
  const std::size_t n = 120;
  Matrix x = random_design(n, 4, stream);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 2) + 0.2 * stream.normal();
  }

  ForestParams params = small_forest(40);
  const auto base = learners::predict_forest(learners::fit_forest(x, y, {}, params), x);

  // Strictly increasing transform of feature 0; identical split decisions
  // mean identical training-point predictions.
  Matrix transformed = x;
  for (std::size_t i = 0; i < n; ++i) transformed(i, 0) = std::exp(x(i, 0)) + 3.0 * x(i, 0);
  const auto after =
      learners::predict_forest(learners::fit_forest(transformed, y, {}, params), transformed);
  CHECK(base == after);
}

TEST_CASE("a training set too small to split yields a flagged constant model") {
  Matrix x(4, 2);
  const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
  ForestParams params = small_forest();
  params.min_leaf = 5;
  const auto model = learners::fit_forest(x, y, {}, params);
  CHECK(model.degenerate);
  for (double p : learners::predict_forest(model, x)) CHECK(p == doctest::Approx(2.5));
}

TEST_CASE("sample weights steer the fit") {
  // Two clusters on feature 0 with conflicting labels; weights pick a side.
  const std::size_t n = 60;
  Matrix x(n, 1);
  std::vector<double> y(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i % 2);
    y[i] = i < n / 2 ? 0.0 : 10.0;
    w[i] = i < n / 2 ? 1.0 : 0.0;
  }
  ForestParams params = small_forest();
  const auto model = learners::fit_forest(x, y, w, params);
  for (double p : learners::predict_forest(model, x)) CHECK(p == doctest::Approx(0.0));
}

TEST_CASE("weight errors are rejected") {
  Matrix x(10, 1);
  std::vector<double> y(10, 1.0);
  std::vector<double> w(10, 1.0);
  w[3] = -0.5;
  CHECK_THROWS_AS(learners::fit_forest(x, y, w, small_forest()), learners::LearnerError);
  const std::vector<double> wrong_len(9, 1.0);
  CHECK_THROWS_AS(learners::fit_forest(x, y, wrong_len, small_forest()), learners::LearnerError);
}

TEST_CASE("moment forest: constant effect with perfect nuisances is recovered exactly") {
  rng::Rng stream(6);
  const std::size_t n = 300;
  const Matrix x = random_design(n, 4, stream);
  const double tau = 1.75;

  // Y = mu0(x) + W*tau, e(x) = 0.4, m(x) = mu0(x) + e*tau; residuals are
  // then (W - e) * tau exactly.
  std::vector<double> y_res(n), w_res(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = stream.bernoulli(0.4) ? 1.0 : 0.0;
    w_res[i] = w - 0.4;
    y_res[i] = w_res[i] * tau;
  }

  learners::ForestParams params;
  params.n_trees = 50;
  params.honest = true;
  params.seed = 3;
  const auto model = learners::fit_moment_forest(x, y_res, w_res, params);
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature < 0) CHECK(node.value == doctest::Approx(tau).epsilon(1e-8));
    }
  }
  for (double p : learners::predict_forest(model, x)) CHECK(p == doctest::Approx(tau).epsilon(1e-8));
}

TEST_CASE("moment forest predictions stay within the training pseudo-outcome range") {
  rng::Rng stream(8);
  const std::size_t n = 250;
  const Matrix x = random_design(n, 4, stream);
  std::vector<double> y_res(n), w_res(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = stream.bernoulli(0.5) ? 1.0 : 0.0;
    const double e = 0.5;
    w_res[i] = w - e;
    y_res[i] = w_res[i] * (1.0 + x(i, 0)) + 0.3 * stream.normal();
  }
  learners::ForestParams params;
  params.n_trees = 60;
  params.honest = true;
  params.seed = 4;
  const auto model = learners::fit_moment_forest(x, y_res, w_res, params);
  const Matrix x_new = random_design(80, 4, stream);
  for (double p : learners::predict_forest(model, x_new)) {
    CHECK(p >= model.y_min);
    CHECK(p <= model.y_max);
  }
}
