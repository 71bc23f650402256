#pragma once

// Core dataset representations shared by all DGPs and estimators: covariate
// tables with per-column kind metadata, train/test splits, and simulation
// draws carrying the ground truth surfaces next to the observed data.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hte/common/matrix.hpp"

namespace hte::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { Continuous, Binary, Count };

const char* column_kind_name(ColumnKind kind);
ColumnKind column_kind_from_name(const std::string& name);

struct CovariateMatrix {
  Matrix values;  // n x d, row-major
  std::vector<ColumnKind> kinds;
  std::vector<std::string> names;

  std::size_t n_rows() const { return values.rows(); }
  std::size_t n_cols() const { return values.cols(); }

  bool operator==(const CovariateMatrix&) const = default;
};

// Throws DataError naming the offending cell on any invariant violation:
// empty matrix, non-{0,1} value in a Binary column, negative or non-integer
// value in a Count column, non-finite entries.
void validate(const CovariateMatrix& covariates);

struct TrainTestSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

void validate(const TrainTestSplit& split, std::size_t n);

struct SplitPolicy {
  enum class Kind { HoldoutFraction, FixedPrefix, ExplicitIndices };
  Kind kind = Kind::HoldoutFraction;
  double fraction = 0.1;      // HoldoutFraction: round(fraction * n) trailing rows form the test set
  std::size_t prefix = 0;     // FixedPrefix: first `prefix` rows train, rest test
  TrainTestSplit explicit_split;  // ExplicitIndices

  static SplitPolicy holdout_fraction(double f);
  static SplitPolicy fixed_prefix(std::size_t k);
  static SplitPolicy explicit_indices(TrainTestSplit split);
};

// Deterministic partition per policy; throws DataError on a degenerate
// (empty-sided) result.
TrainTestSplit make_split(std::size_t n, const SplitPolicy& policy);

// One realization of a DGP. The covariates member always holds the raw
// design; transformed designs used inside a DGP are reconstructed on demand
// (see dgp::dichotomize_counts).
struct SimulationDraw {
  CovariateMatrix covariates;
  std::vector<std::uint8_t> treatment;  // W
  std::vector<double> outcome;          // Y
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::vector<double> tau;
  std::vector<double> propensity;
  TrainTestSplit split;
  std::uint64_t draw_seed = 0;
};

// Checks vector lengths, tau == mu1 - mu0 exactly, propensities in (0,1),
// and split validity.
void validate(const SimulationDraw& draw);

// ---- Synthetic covariates ------------------------------------------------

struct ColumnProfile {
  ColumnKind kind = ColumnKind::Continuous;
  std::string name;
  double mean = 0.0;    // Continuous
  double sd = 1.0;      // Continuous
  double p = 0.5;       // Binary: Bernoulli(p), p in (0,1)
  double lambda = 1.0;  // Count: Poisson(lambda)
};

struct CovariateProfile {
  std::vector<ColumnProfile> columns;

  // 6 standard-normal continuous columns plus 19 binary columns whose
  // Bernoulli probabilities are fixed in the profile (drawn once, uniform on
  // [0.1, 0.9], from the profile seed). Mirrors the mixed character of the
  // n=747, d=25 infant-health covariates without redistributing them.
  static CovariateProfile ihdp_like(std::uint64_t profile_seed = 0);

  // 20 continuous, 11 binary, 27 count columns (d=58), count rates on
  // [1, 6]; the count-heavy mix that the dichotomization experiment needs.
  static CovariateProfile acic_like(std::uint64_t profile_seed = 0);
};

// Deterministic given (profile, seed); output satisfies validate().
CovariateMatrix synthesize_covariates(std::size_t n, const CovariateProfile& profile, std::uint64_t seed);

// ---- Treatment assignment over fixed covariates ---------------------------

struct TreatmentAssignment {
  std::vector<std::uint8_t> w;
  std::vector<double> propensity;
  double intercept = 0.0;  // tuned so the expected treated fraction matches
};

// Logistic propensity on `driver_columns` with the intercept tuned by
// bisection so mean(e(x)) equals target_treated_fraction; used by the IHDP
// replica to mimic its n1/n ~ 0.186 imbalance.
TreatmentAssignment assign_logistic_treatment(const CovariateMatrix& covariates,
                                              std::span<const std::size_t> driver_columns,
                                              double slope,
                                              double target_treated_fraction,
                                              std::uint64_t seed);

}  // namespace hte::data
