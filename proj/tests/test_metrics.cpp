#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hte/metrics/metrics.hpp"

using namespace hte;

namespace {

metrics::RunRecord make_record(const std::string& setting, int draw, int rep,
                               const std::string& estimator, double rmse) {
  metrics::RunRecord r;
  r.setting = setting;
  r.draw_id = draw;
  r.repetition = rep;
  r.estimator = estimator;
  r.rmse = rmse;
  r.sigma_tau = 1.0;
  r.sigma_mu0 = 1.0;
  return r;
}

}  // namespace

TEST_CASE("rmse: exact, constant offset, hand oracle") {
  const std::vector<double> tau{0.0, 0.0};
  CHECK(metrics::rmse(tau, tau) == 0.0);

  const std::vector<double> shifted{2.5, 2.5};
  const std::vector<double> base{0.0, 0.0};
  CHECK(metrics::rmse(shifted, base) == doctest::Approx(2.5));

  const std::vector<double> est{1.0, 3.0};
  CHECK(metrics::rmse(est, base) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));

  const std::vector<double> wrong_len{1.0};
  CHECK_THROWS_AS(metrics::rmse(est, wrong_len), metrics::MetricsError);
}

TEST_CASE("sigma_of: constants, {0,2}, scale equivariance, shift invariance") {
  const std::vector<double> constant{3.0, 3.0, 3.0};
  CHECK(metrics::sigma_of(constant) == 0.0);

  const std::vector<double> pair{0.0, 2.0};
  CHECK(metrics::sigma_of(pair) == doctest::Approx(1.0));

  const std::vector<double> values{0.4, -1.2, 2.2, 0.0};
  const double base = metrics::sigma_of(values);
  std::vector<double> scaled(values), shifted(values);
  for (double& v : scaled) v *= -3.0;
  for (double& v : shifted) v += 17.0;
  CHECK(metrics::sigma_of(scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));
  CHECK(metrics::sigma_of(shifted) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("normalized rmse and its undefined flag") {
  const auto defined = metrics::normalized_rmse(2.0, 4.0);
  CHECK(defined.defined);
  CHECK(defined.value == 0.5);

  const auto undefined = metrics::normalized_rmse(2.0, 0.0);
  CHECK_FALSE(undefined.defined);

  // Scale invariance: scaling tau and tau_hat by a > 0 scales rmse and
  // sigma alike, leaving the ratio unchanged.
  const std::vector<double> tau{1.0, 2.0, 5.0};
  const std::vector<double> tau_hat{1.5, 1.0, 6.0};
  std::vector<double> tau_scaled(tau), tau_hat_scaled(tau_hat);
  for (double& v : tau_scaled) v *= 7.0;
  for (double& v : tau_hat_scaled) v *= 7.0;
  const auto a = metrics::normalized_rmse(metrics::rmse(tau_hat, tau), metrics::sigma_of(tau));
  const auto b = metrics::normalized_rmse(metrics::rmse(tau_hat_scaled, tau_scaled),
                                          metrics::sigma_of(tau_scaled));
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
}

TEST_CASE("aggregate: single record, hand stderr, heavy tail, two-level scheme") {
  SUBCASE("single record") {
    const std::vector<metrics::RunRecord> records{make_record("s", 0, 0, "e", 2.5)};
    const auto rows = metrics::aggregate(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_rmse == 2.5);
    CHECK(rows[0].stderr_rmse == 0.0);
    CHECK(rows[0].draw_count == 1);
  }

  SUBCASE("two draws {1,3}: mean 2, stderr 1") {
    const std::vector<metrics::RunRecord> records{make_record("s", 0, 0, "e", 1.0),
                                                  make_record("s", 1, 0, "e", 3.0)};
    const auto rows = metrics::aggregate(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_rmse == doctest::Approx(2.0));
    CHECK(rows[0].stderr_rmse == doctest::Approx(1.0));
    CHECK(rows[0].median_rmse == doctest::Approx(2.0));
  }

  SUBCASE("heavy-tail demo {1,1,1,1,100}: mean 20.8, median 1, flagged") {
    std::vector<metrics::RunRecord> records;
    const double values[] = {1.0, 1.0, 1.0, 1.0, 100.0};
    for (int k = 0; k < 5; ++k) records.push_back(make_record("s", k, 0, "e", values[k]));
    const auto rows = metrics::aggregate(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_rmse == doctest::Approx(20.8));
    CHECK(rows[0].median_rmse == doctest::Approx(1.0));
    CHECK(rows[0].heavy_tail_flag);
    CHECK(rows[0].mean_median_ratio == doctest::Approx(20.8));
  }

  SUBCASE("duplicating repetitions leaves draw-level means unchanged") {
    std::vector<metrics::RunRecord> records{make_record("s", 0, 0, "e", 1.0),
                                            make_record("s", 1, 0, "e", 3.0)};
    auto doubled = records;
    for (auto r : records) {
      r.repetition = 1;
      doubled.push_back(r);
    }
    const auto a = metrics::aggregate(records);
    const auto b = metrics::aggregate(doubled);
    CHECK(a[0].mean_rmse == b[0].mean_rmse);
    CHECK(a[0].median_rmse == b[0].median_rmse);
  }

  SUBCASE("order invariance") {
    std::vector<metrics::RunRecord> records;
    for (int k = 0; k < 7; ++k) records.push_back(make_record("s", k, 0, "e", 1.0 + k));
    auto reversed = records;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(metrics::aggregate(records)[0].mean_rmse == metrics::aggregate(reversed)[0].mean_rmse);
  }

  SUBCASE("error rows are excluded but counted") {
    std::vector<metrics::RunRecord> records{make_record("s", 0, 0, "e", 1.0)};
    auto failed = make_record("s", 1, 0, "e", 999.0);
    failed.status = "error";
    records.push_back(failed);
    const auto rows = metrics::aggregate(records);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].mean_rmse == 1.0);
    CHECK(rows[0].error_count == 1);
  }
}

TEST_CASE("percentile_runs nearest-rank selection") {
  std::vector<metrics::RunRecord> records;
  for (int k = 1; k <= 100; ++k) {
    auto r = make_record("s", k, 0, "e", 1.0);
    r.sigma_tau = static_cast<double>(k);
    records.push_back(r);
  }
  const double ps[] = {10.0, 50.0, 90.0, 100.0};
  const auto selection = metrics::percentile_runs(records, metrics::PercentileKey::SigmaTau, ps);
  CHECK(selection.at(10.0) == 10);
  CHECK(selection.at(50.0) == 50);
  CHECK(selection.at(90.0) == 90);
  CHECK(selection.at(100.0) == 100);

  SUBCASE("single draw: every percentile selects it") {
    const std::vector<metrics::RunRecord> one{make_record("s", 7, 0, "e", 1.0)};
    const double all[] = {0.0, 50.0, 100.0};
    const auto map = metrics::percentile_runs(one, metrics::PercentileKey::SigmaTau, all);
    for (const auto& [p, draw] : map) CHECK(draw == 7);
  }

  SUBCASE("ties resolve to the lower draw id") {
    std::vector<metrics::RunRecord> tied{make_record("s", 3, 0, "e", 1.0),
                                         make_record("s", 1, 0, "e", 1.0)};
    const double p50[] = {50.0};
    CHECK(metrics::percentile_runs(tied, metrics::PercentileKey::SigmaTau, p50).at(50.0) == 1);
  }
}

TEST_CASE("histogram: counts sum to n and match the grid examples") {
  SUBCASE("single value occupies one bin") {
    const std::vector<double> values{3.0};
    const auto h = metrics::histogram(values, 4);
    int total = 0;
    for (int c : h.counts) total += c;
    CHECK(total == 1);
  }

  SUBCASE("values {1,9} in 2 bins give counts [1,1]") {
    const std::vector<double> values{1.0, 9.0};
    const auto h = metrics::histogram(values, 2);
    REQUIRE(h.counts.size() == 2);
    CHECK(h.counts[0] == 1);
    CHECK(h.counts[1] == 1);
  }

  SUBCASE("counts are preserved for any bin count") {
    std::vector<double> values;
    for (int i = 0; i < 57; ++i) values.push_back(0.01 * i * i);
    for (int bins : {1, 2, 5, 13}) {
      const auto h = metrics::histogram(values, bins);
      int total = 0;
      for (int c : h.counts) total += c;
      CHECK(total == 57);
    }
  }
}
