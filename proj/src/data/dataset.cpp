#include "hte/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hte/common/rng.hpp"

namespace hte::data {

const char* column_kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Continuous:
      return "continuous";
    case ColumnKind::Binary:
      return "binary";
    case ColumnKind::Count:
      return "count";
  }
  return "unknown";
}

ColumnKind column_kind_from_name(const std::string& name) {
  if (name == "continuous") return ColumnKind::Continuous;
  if (name == "binary") return ColumnKind::Binary;
  if (name == "count") return ColumnKind::Count;
  throw DataError("unknown column kind: '" + name + "'");
}

namespace {

std::string cell_location(std::size_t row, std::size_t col, const std::string& name) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col) + " ('" + name + "')";
}

}  // namespace

void validate(const CovariateMatrix& covariates) {
  const std::size_t n = covariates.n_rows();
  const std::size_t d = covariates.n_cols();
  if (n < 1 || d < 1) throw DataError("covariate matrix must have n >= 1 and d >= 1");
  if (covariates.kinds.size() != d) throw DataError("column kind list length does not match column count");
  if (covariates.names.size() != d) throw DataError("column name list length does not match column count");
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = covariates.values(i, j);
      if (!std::isfinite(v)) {
        throw DataError("non-finite covariate at " + cell_location(i, j, covariates.names[j]));
      }
      switch (covariates.kinds[j]) {
        case ColumnKind::Binary:
          if (v != 0.0 && v != 1.0) {
            throw DataError("binary column contains value " + std::to_string(v) + " at " +
                            cell_location(i, j, covariates.names[j]));
          }
          break;
        case ColumnKind::Count:
          if (v < 0.0 || v != std::floor(v)) {
            throw DataError("count column contains value " + std::to_string(v) + " at " +
                            cell_location(i, j, covariates.names[j]));
          }
          break;
        case ColumnKind::Continuous:
          break;
      }
    }
  }
}

void validate(const TrainTestSplit& split, std::size_t n) {
  if (split.train_indices.empty() || split.test_indices.empty()) {
    throw DataError("degenerate split: one side is empty");
  }
  std::vector<std::uint8_t> seen(n, 0);
  auto check = [&](const std::vector<std::size_t>& indices) {
    for (std::size_t idx : indices) {
      if (idx >= n) throw DataError("split index " + std::to_string(idx) + " out of range");
      if (seen[idx]) throw DataError("split sides overlap at index " + std::to_string(idx));
      seen[idx] = 1;
    }
  };
  check(split.train_indices);
  check(split.test_indices);
}

SplitPolicy SplitPolicy::holdout_fraction(double f) {
  SplitPolicy p;
  p.kind = Kind::HoldoutFraction;
  p.fraction = f;
  return p;
}

SplitPolicy SplitPolicy::fixed_prefix(std::size_t k) {
  SplitPolicy p;
  p.kind = Kind::FixedPrefix;
  p.prefix = k;
  return p;
}

SplitPolicy SplitPolicy::explicit_indices(TrainTestSplit split) {
  SplitPolicy p;
  p.kind = Kind::ExplicitIndices;
  p.explicit_split = std::move(split);
  return p;
}

TrainTestSplit make_split(std::size_t n, const SplitPolicy& policy) {
  TrainTestSplit split;
  switch (policy.kind) {
    case SplitPolicy::Kind::HoldoutFraction: {
      // Pre-determined hold-out: the trailing round(f*n) rows are the test set.
      const auto n_test = static_cast<std::size_t>(std::llround(policy.fraction * static_cast<double>(n)));
      if (n_test == 0 || n_test >= n) throw DataError("degenerate holdout split");
      for (std::size_t i = 0; i < n - n_test; ++i) split.train_indices.push_back(i);
      for (std::size_t i = n - n_test; i < n; ++i) split.test_indices.push_back(i);
      break;
    }
    case SplitPolicy::Kind::FixedPrefix: {
      if (policy.prefix == 0 || policy.prefix >= n) throw DataError("degenerate prefix split");
      for (std::size_t i = 0; i < policy.prefix; ++i) split.train_indices.push_back(i);
      for (std::size_t i = policy.prefix; i < n; ++i) split.test_indices.push_back(i);
      break;
    }
    case SplitPolicy::Kind::ExplicitIndices:
      split = policy.explicit_split;
      break;
  }
  validate(split, n);
  return split;
}

void validate(const SimulationDraw& draw) {
  validate(draw.covariates);
  const std::size_t n = draw.covariates.n_rows();
  if (draw.treatment.size() != n || draw.outcome.size() != n || draw.mu0.size() != n ||
      draw.mu1.size() != n || draw.tau.size() != n || draw.propensity.size() != n) {
    throw DataError("simulation draw vectors must all have length n");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (draw.treatment[i] != 0 && draw.treatment[i] != 1) throw DataError("treatment must be binary");
    if (draw.tau[i] != draw.mu1[i] - draw.mu0[i]) {
      throw DataError("tau[i] != mu1[i] - mu0[i] at index " + std::to_string(i));
    }
    if (!(draw.propensity[i] > 0.0 && draw.propensity[i] < 1.0)) {
      throw DataError("propensity must lie strictly in (0,1)");
    }
  }
  validate(draw.split, n);
}

CovariateProfile CovariateProfile::ihdp_like(std::uint64_t profile_seed) {
  rng::Rng generator(rng::derive_seed(profile_seed, {0x1d4}));
  CovariateProfile profile;
  for (int j = 0; j < 6; ++j) {
    ColumnProfile col;
    col.kind = ColumnKind::Continuous;
    col.name = "x" + std::to_string(profile.columns.size());
    profile.columns.push_back(col);
  }
  for (int j = 0; j < 19; ++j) {
    ColumnProfile col;
    col.kind = ColumnKind::Binary;
    col.name = "x" + std::to_string(profile.columns.size());
    col.p = generator.uniform(0.1, 0.9);
    profile.columns.push_back(col);
  }
  return profile;
}

CovariateProfile CovariateProfile::acic_like(std::uint64_t profile_seed) {
  rng::Rng generator(rng::derive_seed(profile_seed, {0xac1c}));
  CovariateProfile profile;
  for (int j = 0; j < 20; ++j) {
    ColumnProfile col;
    col.kind = ColumnKind::Continuous;
    col.name = "x" + std::to_string(profile.columns.size());
    profile.columns.push_back(col);
  }
  for (int j = 0; j < 11; ++j) {
    ColumnProfile col;
    col.kind = ColumnKind::Binary;
    col.name = "x" + std::to_string(profile.columns.size());
    col.p = generator.uniform(0.2, 0.8);
    profile.columns.push_back(col);
  }
  for (int j = 0; j < 27; ++j) {
    ColumnProfile col;
    col.kind = ColumnKind::Count;
    col.name = "x" + std::to_string(profile.columns.size());
    col.lambda = generator.uniform(1.0, 6.0);
    profile.columns.push_back(col);
  }
  return profile;
}

CovariateMatrix synthesize_covariates(std::size_t n, const CovariateProfile& profile, std::uint64_t seed) {
  if (n < 1) throw DataError("synthesize_covariates: n must be >= 1");
  if (profile.columns.empty()) throw DataError("synthesize_covariates: profile has no columns");
  for (const auto& col : profile.columns) {
    if (col.kind == ColumnKind::Binary && !(col.p > 0.0 && col.p < 1.0)) {
      throw DataError("invalid profile: Bernoulli probability must lie in (0,1)");
    }
    if (col.kind == ColumnKind::Count && col.lambda < 0.0) {
      throw DataError("invalid profile: Poisson rate must be >= 0");
    }
    if (col.kind == ColumnKind::Continuous && col.sd < 0.0) {
      throw DataError("invalid profile: continuous sd must be >= 0");
    }
  }

  const std::size_t d = profile.columns.size();
  CovariateMatrix covariates;
  covariates.values = Matrix(n, d);
  covariates.kinds.reserve(d);
  covariates.names.reserve(d);
  for (const auto& col : profile.columns) {
    covariates.kinds.push_back(col.kind);
    covariates.names.push_back(col.name);
  }

  // Column-scoped streams: adding or reordering columns does not perturb the
  // draws of the others.
  for (std::size_t j = 0; j < d; ++j) {
    rng::Rng generator(rng::derive_seed(seed, {0xc0, j}));
    const auto& col = profile.columns[j];
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      switch (col.kind) {
        case ColumnKind::Continuous:
          v = generator.normal(col.mean, col.sd);
          break;
        case ColumnKind::Binary:
          v = generator.bernoulli(col.p) ? 1.0 : 0.0;
          break;
        case ColumnKind::Count:
          v = static_cast<double>(generator.poisson(col.lambda));
          break;
      }
      covariates.values(i, j) = v;
    }
  }
  validate(covariates);
  return covariates;
}

TreatmentAssignment assign_logistic_treatment(const CovariateMatrix& covariates,
                                              std::span<const std::size_t> driver_columns,
                                              double slope,
                                              double target_treated_fraction,
                                              std::uint64_t seed) {
  if (!(target_treated_fraction > 0.0 && target_treated_fraction < 1.0)) {
    throw DataError("target treated fraction must lie in (0,1)");
  }
  const std::size_t n = covariates.n_rows();
  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t col : driver_columns) {
      if (col >= covariates.n_cols()) throw DataError("treatment driver column out of range");
      score[i] += slope * covariates.values(i, col);
    }
  }

  auto mean_propensity = [&](double intercept) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += 1.0 / (1.0 + std::exp(-(score[i] + intercept)));
    return total / static_cast<double>(n);
  };

  // Bisection on the intercept; mean propensity is monotone in it.
  double lo = -30.0, hi = 30.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mean_propensity(mid) < target_treated_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double intercept = 0.5 * (lo + hi);

  TreatmentAssignment assignment;
  assignment.intercept = intercept;
  assignment.w.resize(n);
  assignment.propensity.resize(n);
  rng::Rng generator(rng::derive_seed(seed, {0x77}));
  for (std::size_t i = 0; i < n; ++i) {
    double e = 1.0 / (1.0 + std::exp(-(score[i] + intercept)));
    e = std::clamp(e, 1e-12, 1.0 - 1e-12);
    assignment.propensity[i] = e;
    assignment.w[i] = generator.bernoulli(e) ? 1 : 0;
  }
  return assignment;
}

}  // namespace hte::data
