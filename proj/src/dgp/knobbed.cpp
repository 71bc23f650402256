#include "hte/dgp/knobbed.hpp"

#include <algorithm>
#include <cmath>

namespace hte::dgp {

const char* heterogeneity_name(Heterogeneity h) {
  switch (h) {
    case Heterogeneity::None:
      return "none";
    case Heterogeneity::Low:
      return "low";
    case Heterogeneity::High:
      return "high";
  }
  return "unknown";
}

void validate(const KnobConfig& config, std::size_t d) {
  if (!(config.overlap_clamp > 0.0 && config.overlap_clamp <= 0.5)) {
    throw data::DataError("overlap_clamp must lie in (0, 0.5]");
  }
  if (config.linear_terms < 0 || config.interaction_terms < 0 || config.exponential_terms < 0) {
    throw data::DataError("surface term counts must be >= 0");
  }
  if (config.tau_sparsity < 0 || static_cast<std::size_t>(config.tau_sparsity) > d) {
    throw data::DataError("tau_sparsity must lie in [0, d]");
  }
  if (config.noise_std < 0.0) throw data::DataError("noise_std must be >= 0");
}

DichotomizePolicy DichotomizePolicy::median() { return DichotomizePolicy{}; }

DichotomizePolicy DichotomizePolicy::median_over(std::vector<std::size_t> rows) {
  DichotomizePolicy p;
  p.median_rows = std::move(rows);
  return p;
}

DichotomizePolicy DichotomizePolicy::explicit_thresholds(std::vector<std::pair<std::size_t, double>> t) {
  DichotomizePolicy p;
  p.kind = Kind::Explicit;
  p.thresholds = std::move(t);
  return p;
}

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

data::CovariateMatrix dichotomize_counts(const data::CovariateMatrix& covariates,
                                         const DichotomizePolicy& policy) {
  const std::size_t n = covariates.n_rows();
  const std::size_t d = covariates.n_cols();

  std::vector<std::optional<double>> threshold(d);
  if (policy.kind == DichotomizePolicy::Kind::Explicit) {
    for (const auto& [col, value] : policy.thresholds) {
      if (col >= d) throw data::DataError("dichotomize threshold column out of range");
      if (covariates.kinds[col] != data::ColumnKind::Count) {
        throw data::DataError("threshold requested for non-count column " + std::to_string(col) +
                              " ('" + covariates.names[col] + "')");
      }
      threshold[col] = value;
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (covariates.kinds[j] == data::ColumnKind::Count && !threshold[j]) {
        throw data::DataError("no threshold for count column " + std::to_string(j));
      }
    }
  } else {
    const std::vector<std::size_t>* rows = &policy.median_rows;
    std::vector<std::size_t> all_rows;
    if (rows->empty()) {
      all_rows.resize(n);
      for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
      rows = &all_rows;
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (covariates.kinds[j] != data::ColumnKind::Count) continue;
      std::vector<double> column;
      column.reserve(rows->size());
      for (std::size_t i : *rows) column.push_back(covariates.values(i, j));
      threshold[j] = median_of(std::move(column));
    }
  }

  data::CovariateMatrix out = covariates;
  for (std::size_t j = 0; j < d; ++j) {
    if (!threshold[j]) continue;
    for (std::size_t i = 0; i < n; ++i) {
      out.values(i, j) = covariates.values(i, j) > *threshold[j] ? 1.0 : 0.0;
    }
    out.kinds[j] = data::ColumnKind::Binary;
  }
  return out;
}

namespace {

// Keeps exp-of-linear terms within a range where the surface stays well
// inside the exactness bound of the output grid below.
constexpr double kExpArgumentLimit = 10.0;

double evaluate_term(const SurfaceTerm& term, const data::CovariateMatrix& design, std::size_t row) {
  double inner = 0.0;
  switch (term.shape) {
    case SurfaceTerm::Shape::Linear:
      return term.coefficient * design.values(row, term.columns[0]);
    case SurfaceTerm::Shape::Product: {
      double product = term.coefficient;
      for (std::size_t c : term.columns) product *= design.values(row, c);
      return product;
    }
    case SurfaceTerm::Shape::ExpOfLinear:
      for (std::size_t k = 0; k < term.columns.size(); ++k) {
        inner += term.inner_coeffs[k] * design.values(row, term.columns[k]);
      }
      inner = std::clamp(inner, -kExpArgumentLimit, kExpArgumentLimit);
      return term.coefficient * std::exp(inner);
  }
  return 0.0;
}

std::vector<double> evaluate_terms(const std::vector<SurfaceTerm>& terms,
                                   const data::CovariateMatrix& design) {
  std::vector<double> values(design.n_rows(), 0.0);
  for (const auto& term : terms) {
    for (std::size_t i = 0; i < design.n_rows(); ++i) values[i] += evaluate_term(term, design, i);
  }
  return values;
}

double population_sd(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

// Surface values are snapped to a 2^-26 grid. Sums and differences of grid
// multiples of this magnitude are exact in double arithmetic, which makes
// mu1 - mu0 == f_tau hold bitwise and gives sigma_tau exactly zero under
// constant effects.
double quantize(double v) { return std::round(v * 67108864.0) / 67108864.0; }

SurfaceTerm make_linear_term(std::size_t column, double coefficient) {
  SurfaceTerm term;
  term.shape = SurfaceTerm::Shape::Linear;
  term.columns = {column};
  term.coefficient = coefficient;
  return term;
}

}  // namespace

std::vector<double> ResponseSurfaces::evaluate_f0(const data::CovariateMatrix& design) const {
  return evaluate_terms(f0_terms, design);
}

std::vector<double> ResponseSurfaces::evaluate_ftau_raw(const data::CovariateMatrix& design) const {
  if (heterogeneity == Heterogeneity::None) {
    return std::vector<double>(design.n_rows(), tau_constant_raw);
  }
  return evaluate_terms(ftau_terms, design);
}

ResponseSurfaces build_response_family(const KnobConfig& config, std::size_t d, std::uint64_t seed) {
  validate(config, d);
  rng::Rng stream(rng::derive_seed(seed, {0xfa3}));

  ResponseSurfaces surfaces;
  surfaces.heterogeneity = config.heterogeneity;

  auto random_column = [&] { return static_cast<std::size_t>(stream.uniform_int(d)); };
  auto signed_coeff = [&](double lo, double hi) {
    const double magnitude = stream.uniform(lo, hi);
    return stream.bernoulli(0.5) ? magnitude : -magnitude;
  };

  for (int t = 0; t < config.linear_terms; ++t) {
    surfaces.f0_terms.push_back(make_linear_term(random_column(), signed_coeff(0.2, 1.0)));
  }
  for (int t = 0; t < config.interaction_terms; ++t) {
    SurfaceTerm term;
    term.shape = SurfaceTerm::Shape::Product;
    const auto cols = stream.sample_without_replacement(d, std::min<std::size_t>(2, d));
    term.columns = cols;
    term.coefficient = signed_coeff(0.2, 1.0);
    surfaces.f0_terms.push_back(term);
  }
  for (int t = 0; t < config.exponential_terms; ++t) {
    SurfaceTerm term;
    term.shape = SurfaceTerm::Shape::ExpOfLinear;
    const auto cols = stream.sample_without_replacement(d, std::min<std::size_t>(2, d));
    term.columns = cols;
    for (std::size_t k = 0; k < term.columns.size(); ++k) {
      term.inner_coeffs.push_back(signed_coeff(0.1, 0.5));
    }
    term.coefficient = signed_coeff(0.2, 1.0);
    surfaces.f0_terms.push_back(term);
  }

  switch (config.heterogeneity) {
    case Heterogeneity::None:
      surfaces.tau_constant_raw = signed_coeff(0.25, 1.0);
      break;
    case Heterogeneity::Low: {
      // Sparse-linear in exactly tau_sparsity distinct covariates, with
      // coefficients bounded away from zero.
      const auto cols = stream.sample_without_replacement(d, config.tau_sparsity);
      for (std::size_t c : cols) {
        surfaces.ftau_terms.push_back(make_linear_term(c, signed_coeff(0.5, 1.5)));
      }
      break;
    }
    case Heterogeneity::High: {
      const auto cols = stream.sample_without_replacement(d, config.tau_sparsity);
      for (std::size_t c : cols) {
        surfaces.ftau_terms.push_back(make_linear_term(c, signed_coeff(0.5, 1.5)));
      }
      const int n_products = std::max(1, config.interaction_terms / 2);
      for (int t = 0; t < n_products; ++t) {
        SurfaceTerm term;
        term.shape = SurfaceTerm::Shape::Product;
        term.columns = stream.sample_without_replacement(d, std::min<std::size_t>(2, d));
        term.coefficient = signed_coeff(0.5, 1.5);
        surfaces.ftau_terms.push_back(term);
      }
      const int n_exp = std::max(1, config.exponential_terms / 2);
      for (int t = 0; t < n_exp; ++t) {
        SurfaceTerm term;
        term.shape = SurfaceTerm::Shape::ExpOfLinear;
        term.columns = stream.sample_without_replacement(d, std::min<std::size_t>(2, d));
        for (std::size_t k = 0; k < term.columns.size(); ++k) {
          term.inner_coeffs.push_back(signed_coeff(0.1, 0.5));
        }
        term.coefficient = signed_coeff(0.5, 1.5);
        surfaces.ftau_terms.push_back(term);
      }
      break;
    }
  }
  return surfaces;
}

KnobbedTreatment assign_treatment(const data::CovariateMatrix& design, const ResponseSurfaces& surfaces,
                                  const KnobConfig& config, std::uint64_t seed) {
  const std::size_t n = design.n_rows();
  const std::vector<double> f0 = surfaces.evaluate_f0(design);

  KnobbedTreatment treatment;
  treatment.propensity.assign(n, 0.5);
  treatment.w.resize(n);

  const double sd = population_sd(f0);
  if (config.confounding_strength != 0.0 && sd > 0.0) {
    double mean = 0.0;
    for (double v : f0) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
      score[i] = config.confounding_strength * (f0[i] - mean) / sd;
    }

    auto mean_propensity = [&](double intercept) {
      double total = 0.0;
      for (double s : score) total += 1.0 / (1.0 + std::exp(-(s + intercept)));
      return total / static_cast<double>(n);
    };
    double lo = -30.0, hi = 30.0;
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = 0.5 * (lo + hi);
      (mean_propensity(mid) < 0.5 ? lo : hi) = mid;
    }
    const double intercept = 0.5 * (lo + hi);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = 1.0 / (1.0 + std::exp(-(score[i] + intercept)));
      treatment.propensity[i] = std::clamp(e, config.overlap_clamp, 1.0 - config.overlap_clamp);
    }
  }

  rng::Rng stream(rng::derive_seed(seed, {0x7e4}));
  for (std::size_t i = 0; i < n; ++i) {
    treatment.w[i] = stream.bernoulli(treatment.propensity[i]) ? 1 : 0;
  }
  return treatment;
}

KnobbedDraw generate_knobbed_draw(const data::CovariateMatrix& covariates, const KnobConfig& config,
                                  const data::SplitPolicy& split_policy, std::uint64_t seed) {
  validate(config, covariates.n_cols());
  const std::size_t n = covariates.n_rows();

  KnobbedDraw result;
  data::SimulationDraw& draw = result.draw;
  draw.split = data::make_split(n, split_policy);

  const data::CovariateMatrix design =
      config.dichotomize_inputs
          ? dichotomize_counts(covariates, DichotomizePolicy::median_over(draw.split.train_indices))
          : covariates;

  result.surfaces = build_response_family(config, covariates.n_cols(), rng::derive_seed(seed, {0x5f}));

  std::vector<double> f0 = result.surfaces.evaluate_f0(design);
  std::vector<double> ftau = result.surfaces.evaluate_ftau_raw(design);
  for (double& v : f0) v = quantize(v);

  const double f0_sd = population_sd(f0);
  const double scale_reference = f0_sd > 0.0 ? f0_sd : 1.0;

  double tau_scale = 1.0;
  switch (config.heterogeneity) {
    case Heterogeneity::None:
      tau_scale = scale_reference;
      break;
    case Heterogeneity::Low:
    case Heterogeneity::High: {
      const double ratio = config.heterogeneity == Heterogeneity::Low ? config.low_tau_scale
                                                                      : config.high_tau_scale;
      const double ftau_sd = population_sd(ftau);
      tau_scale = ftau_sd > 0.0 ? ratio * scale_reference / ftau_sd : 1.0;
      break;
    }
  }
  result.tau_scale = tau_scale;

  draw.covariates = covariates;  // estimators see the raw design by default
  draw.draw_seed = seed;
  draw.mu0 = f0;
  draw.tau.resize(n);
  draw.mu1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    draw.tau[i] = quantize(tau_scale * ftau[i]);
    draw.mu1[i] = draw.mu0[i] + draw.tau[i];
  }

  auto treatment = assign_treatment(design, result.surfaces, config, rng::derive_seed(seed, {0x60}));
  draw.treatment = std::move(treatment.w);
  draw.propensity = std::move(treatment.propensity);

  rng::Rng noise_stream(rng::derive_seed(seed, {0x61}));
  draw.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double factual = draw.treatment[i] ? draw.mu1[i] : draw.mu0[i];
    draw.outcome[i] = factual + noise_stream.normal(0.0, config.noise_std);
  }

  data::validate(draw);
  return result;
}

KnobConfig knob_preset(const std::string& name) {
  KnobConfig config;
  if (name == "acic-none") {
    config.heterogeneity = Heterogeneity::None;
  } else if (name == "acic-low") {
    config.heterogeneity = Heterogeneity::Low;
  } else if (name == "acic-high") {
    config.heterogeneity = Heterogeneity::High;
  } else {
    throw data::DataError("unknown knob preset: '" + name + "'");
  }
  return config;
}

}  // namespace hte::dgp
