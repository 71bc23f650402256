#pragma once

// ACIC-style DGP family with explicit experimental knobs: treatment-effect
// heterogeneity (none/low/high), confounding strength, overlap clamping,
// response-surface composition, and the count-dichotomization transform.
// Surfaces are additive, mu_w(x) = f0(x) + w * f_tau(x), with f0/f_tau built
// from randomly sampled linear, pairwise-product, and exp-of-linear terms.

#include <cstdint>
#include <optional>
#include <vector>

#include "hte/common/rng.hpp"
#include "hte/data/dataset.hpp"

namespace hte::dgp {

enum class Heterogeneity { None, Low, High };

const char* heterogeneity_name(Heterogeneity h);

struct KnobConfig {
  Heterogeneity heterogeneity = Heterogeneity::Low;
  double confounding_strength = 1.0;
  double overlap_clamp = 0.1;  // propensities clipped to [clamp, 1-clamp]
  int linear_terms = 8;        // f0 composition
  int interaction_terms = 4;
  int exponential_terms = 3;
  int tau_sparsity = 2;  // covariates entering f_tau under Low
  double noise_std = 1.0;
  bool dichotomize_inputs = true;  // evaluate surfaces on the transformed design
  // sd(f_tau)/sd(f0) targets for the Low and High regimes.
  double low_tau_scale = 0.25;
  double high_tau_scale = 1.0;
};

void validate(const KnobConfig& config, std::size_t d);

// ---- Count dichotomization -------------------------------------------------

struct DichotomizePolicy {
  enum class Kind { Median, Explicit };
  Kind kind = Kind::Median;
  // Median: rows over which medians are computed (empty = all rows).
  std::vector<std::size_t> median_rows;
  // Explicit: (column, threshold) pairs; every Count column must be covered
  // and naming a non-Count column is an error.
  std::vector<std::pair<std::size_t, double>> thresholds;

  static DichotomizePolicy median();
  static DichotomizePolicy median_over(std::vector<std::size_t> rows);
  static DichotomizePolicy explicit_thresholds(std::vector<std::pair<std::size_t, double>> t);
};

// Replaces every Count column c with the indicator [value > threshold_c];
// other columns pass through unchanged and transformed columns become
// Binary. A matrix without Count columns is returned unchanged.
data::CovariateMatrix dichotomize_counts(const data::CovariateMatrix& covariates,
                                         const DichotomizePolicy& policy);

// ---- Response surfaces ------------------------------------------------------

struct SurfaceTerm {
  enum class Shape { Linear, Product, ExpOfLinear };
  Shape shape = Shape::Linear;
  std::vector<std::size_t> columns;
  std::vector<double> inner_coeffs;  // per column; ExpOfLinear exponent weights
  double coefficient = 1.0;          // outer multiplier
};

struct ResponseSurfaces {
  std::vector<SurfaceTerm> f0_terms;
  std::vector<SurfaceTerm> ftau_terms;  // empty under Heterogeneity::None
  double tau_constant_raw = 0.0;        // None: relative constant effect, scaled by sd(f0)
  Heterogeneity heterogeneity = Heterogeneity::None;

  std::vector<double> evaluate_f0(const data::CovariateMatrix& design) const;
  // Raw (unscaled) effect surface; the draw generator rescales it to the
  // configured sd ratio. Constant under None.
  std::vector<double> evaluate_ftau_raw(const data::CovariateMatrix& design) const;
};

// Term lists sampled deterministically from the seed; the heterogeneity
// structure invariants (None = no terms, Low = tau_sparsity distinct linear
// columns, High = linear + product + exp terms) hold by construction.
ResponseSurfaces build_response_family(const KnobConfig& config, std::size_t d, std::uint64_t seed);

// e(x) = clamp(logistic(strength * standardized f0(x) + intercept), c, 1-c)
// with the intercept tuned so the mean pre-clamp propensity is 0.5.
struct KnobbedTreatment {
  std::vector<std::uint8_t> w;
  std::vector<double> propensity;
};
KnobbedTreatment assign_treatment(const data::CovariateMatrix& design, const ResponseSurfaces& surfaces,
                                  const KnobConfig& config, std::uint64_t seed);

struct KnobbedDraw {
  data::SimulationDraw draw;
  ResponseSurfaces surfaces;
  double tau_scale = 0.0;  // multiplier applied to the raw effect surface
};

// Full draw: surfaces evaluated on the (optionally dichotomized) design,
// treatment assigned from f0, noise added on the factual surface. The draw
// stores the raw covariates; the transformed design is reproducible via
// dichotomize_counts with the train-row median policy.
KnobbedDraw generate_knobbed_draw(const data::CovariateMatrix& covariates, const KnobConfig& config,
                                  const data::SplitPolicy& split_policy, std::uint64_t seed);

// Presets emulating the knob values of the no/low/high heterogeneity
// settings with exponential response surfaces. These are transparent
// emulations, not replicas of any published setting.
KnobConfig knob_preset(const std::string& name);  // "acic-none" | "acic-low" | "acic-high"

}  // namespace hte::dgp
