#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hte/data/dataset.hpp"
#include "hte/data/io.hpp"

using namespace hte;
using data::ColumnKind;

namespace {

data::CovariateMatrix small_matrix() {
  data::CovariateMatrix m;
  m.values = Matrix(3, 2);
  m.values(0, 0) = 0.5;
  m.values(1, 0) = -1.25;
  m.values(2, 0) = 3.0;
  m.values(0, 1) = 1.0;
  m.values(1, 1) = 0.0;
  m.values(2, 1) = 1.0;
  m.kinds = {ColumnKind::Continuous, ColumnKind::Binary};
  m.names = {"a", "b"};
  return m;
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "htebench_test_data";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("covariate validation accepts well-formed input and names offenders") {
  auto m = small_matrix();
  CHECK_NOTHROW(data::validate(m));
  CHECK(m.n_rows() == 3);
  CHECK(m.n_cols() == 2);

  m.values(1, 1) = 2.0;  // binary violation
  CHECK_THROWS_WITH_AS(data::validate(m), doctest::Contains("row 1, column 1"), data::DataError);

  m = small_matrix();
  m.kinds[0] = ColumnKind::Count;
  m.values(1, 0) = -1.25;
  CHECK_THROWS_AS(data::validate(m), data::DataError);
}

TEST_CASE("make_split matches the documented sizes") {
  SUBCASE("10% holdout of 747") {
    const auto split = data::make_split(747, data::SplitPolicy::holdout_fraction(0.10));
    CHECK(split.test_indices.size() == 75);
    CHECK(split.train_indices.size() == 672);
  }
  SUBCASE("fixed prefix 4000 of 4802") {
    const auto split = data::make_split(4802, data::SplitPolicy::fixed_prefix(4000));
    CHECK(split.train_indices.size() == 4000);
    CHECK(split.test_indices.size() == 802);
    CHECK(split.train_indices.front() == 0);
    CHECK(split.test_indices.front() == 4000);
  }
  SUBCASE("two points, half and half") {
    const auto split = data::make_split(2, data::SplitPolicy::holdout_fraction(0.5));
    CHECK(split.train_indices.size() == 1);
    CHECK(split.test_indices.size() == 1);
  }
  SUBCASE("degenerate splits are rejected") {
    CHECK_THROWS_AS(data::make_split(10, data::SplitPolicy::holdout_fraction(0.0)), data::DataError);
    CHECK_THROWS_AS(data::make_split(10, data::SplitPolicy::fixed_prefix(10)), data::DataError);
  }
}

TEST_CASE("split partitions are disjoint and cover for a sweep of policies") {
  for (std::size_t n : {5u, 17u, 100u, 747u}) {
    for (double f : {0.1, 0.25, 0.5}) {
      const auto split = data::make_split(n, data::SplitPolicy::holdout_fraction(f));
      CHECK_NOTHROW(data::validate(split, n));
      CHECK(split.train_indices.size() + split.test_indices.size() == n);
      CHECK(split.test_indices.size() ==
            static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
    }
  }
}

TEST_CASE("synthesize_covariates is deterministic and kind-correct") {
  const auto profile = data::CovariateProfile::ihdp_like(3);
  const auto a = data::synthesize_covariates(747, profile, 11);
  const auto b = data::synthesize_covariates(747, profile, 11);
  CHECK(a == b);
  CHECK(a.n_rows() == 747);
  CHECK(a.n_cols() == 25);
  CHECK_NOTHROW(data::validate(a));

  const auto c = data::synthesize_covariates(747, profile, 12);
  CHECK(c.values(0, 0) != a.values(0, 0));

  data::CovariateProfile tiny;
  tiny.columns.push_back({});
  const auto single = data::synthesize_covariates(1, tiny, 5);
  CHECK(single.n_rows() == 1);
  CHECK(single.n_cols() == 1);

  data::CovariateProfile bad;
  bad.columns.push_back({ColumnKind::Binary, "p", 0.0, 1.0, 1.5, 1.0});
  CHECK_THROWS_AS(data::synthesize_covariates(5, bad, 1), data::DataError);
}

TEST_CASE("covariate files round-trip bit-exactly through the serializer") {
  const auto dir = temp_dir();
  const auto profile = data::CovariateProfile::acic_like(1);
  const auto original = data::synthesize_covariates(50, profile, 21);

  const auto csv = dir / "cov.csv";
  data::write_covariates(csv, original);
  const auto schema = data::load_schema(csv.string() + ".schema.json");
  const auto loaded = data::load_covariates(csv, schema);
  CHECK(loaded == original);
}

TEST_CASE("load_covariates rejects kind violations with a location") {
  const auto dir = temp_dir();
  const auto csv = dir / "bad.csv";
  {
    std::ofstream out(csv);
    out << "a,b\n0.5,0\n1.5,2\n";
  }
  data::ColumnSchema schema;
  schema.kinds = {ColumnKind::Continuous, ColumnKind::Binary};
  CHECK_THROWS_WITH_AS(data::load_covariates(csv, schema), doctest::Contains("row 1, column 1"),
                       data::DataError);

  data::ColumnSchema narrow;
  narrow.kinds = {ColumnKind::Continuous};
  CHECK_THROWS_AS(data::load_covariates(csv, narrow), data::DataError);
}

TEST_CASE("draw files round-trip through the serializer") {
  const auto dir = temp_dir();
  data::SimulationDraw draw;
  draw.covariates = small_matrix();
  draw.treatment = {1, 0, 1};
  draw.mu0 = {0.25, -1.0, 2.0};
  draw.mu1 = {1.25, 0.5, 2.5};
  draw.tau = {1.0, 1.5, 0.5};
  draw.propensity = {0.3, 0.4, 0.5};
  draw.outcome = {1.3, -0.9, 2.6};
  draw.split.train_indices = {0, 1};
  draw.split.test_indices = {2};
  CHECK_NOTHROW(data::validate(draw));

  const auto path = dir / "draw.csv";
  data::write_draw(path, draw);
  const auto loaded = data::load_draw(path, draw.covariates);
  CHECK(loaded.outcome == draw.outcome);
  CHECK(loaded.mu0 == draw.mu0);
  CHECK(loaded.mu1 == draw.mu1);
  CHECK(loaded.tau == draw.tau);
  CHECK(loaded.propensity == draw.propensity);
  CHECK(loaded.treatment == draw.treatment);
  CHECK(loaded.split.test_indices == draw.split.test_indices);
}

TEST_CASE("simulation draw invariants are enforced") {
  data::SimulationDraw draw;
  draw.covariates = small_matrix();
  draw.treatment = {1, 0, 1};
  draw.mu0 = {0.0, 0.0, 0.0};
  draw.mu1 = {1.0, 1.0, 1.0};
  draw.tau = {1.0, 1.0, 0.5};  // violates tau = mu1 - mu0
  draw.propensity = {0.3, 0.4, 0.5};
  draw.outcome = {1.0, 0.0, 1.0};
  draw.split.train_indices = {0, 1};
  draw.split.test_indices = {2};
  CHECK_THROWS_AS(data::validate(draw), data::DataError);

  draw.tau[2] = 1.0;
  CHECK_NOTHROW(data::validate(draw));
  draw.propensity[0] = 1.0;  // must be strictly inside (0,1)
  CHECK_THROWS_AS(data::validate(draw), data::DataError);
}

TEST_CASE("logistic treatment assignment hits the target share") {
  const auto x = data::synthesize_covariates(747, data::CovariateProfile::ihdp_like(3), 11);
  const std::size_t drivers[] = {0, 1, 2};
  const auto assignment = data::assign_logistic_treatment(x, drivers, 0.5, 139.0 / 747.0, 9);

  double mean_propensity = 0.0;
  for (double e : assignment.propensity) {
    CHECK(e > 0.0);
    CHECK(e < 1.0);
    mean_propensity += e;
  }
  mean_propensity /= 747.0;
  CHECK(mean_propensity == doctest::Approx(139.0 / 747.0).epsilon(1e-6));

  int treated = 0;
  for (auto w : assignment.w) treated += w;
  CHECK(treated > 90);   // ~139 expected
  CHECK(treated < 190);
}
