#include "hte/dgp/ihdp.hpp"

#include <cmath>

#include "hte/common/rng.hpp"
#include "hte/kernels/kernels.hpp"

namespace hte::dgp {

void validate(const IhdpConfig& config) {
  if (config.coefficient_support.size() != config.coefficient_probs.size() ||
      config.coefficient_support.empty()) {
    throw data::DataError("coefficient support and probabilities must have equal nonzero length");
  }
  double total = 0.0;
  for (double p : config.coefficient_probs) {
    if (p < 0.0) throw data::DataError("coefficient probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw data::DataError("coefficient probabilities must sum to 1");
  if (config.noise_std < 0.0) throw data::DataError("noise_std must be >= 0");
}

std::vector<double> sample_beta(std::size_t d, const IhdpConfig& config, rng::Rng& stream) {
  if (d < 1) throw data::DataError("sample_beta: d must be >= 1");
  std::vector<double> beta(d);
  for (std::size_t j = 0; j < d; ++j) {
    beta[j] = config.coefficient_support[stream.categorical(config.coefficient_probs)];
  }
  return beta;
}

RawSurfaces compute_surfaces(const data::CovariateMatrix& covariates, std::span<const double> beta,
                             double offset_value, double exp_guard) {
  const std::size_t n = covariates.n_rows();
  const std::size_t d = covariates.n_cols();
  if (beta.size() != d) throw data::DataError("beta length must equal the number of covariates");

  // (x_i + A_i) . beta = x_i . beta + offset_value * sum(beta) since A is a
  // constant matrix.
  const double offset_shift = offset_value * kernels::sum(beta.data(), d);

  RawSurfaces surfaces;
  surfaces.mu0_raw.resize(n);
  surfaces.mu1_raw.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double linear = kernels::dot(covariates.values.row(i).data(), beta.data(), d);
    const double exponent = linear + offset_shift;
    if (std::abs(exponent) > exp_guard) {
      throw SurfaceOverflow("exp argument " + std::to_string(exponent) + " exceeds guard at row " +
                            std::to_string(i));
    }
    surfaces.mu0_raw[i] = std::exp(exponent);
    surfaces.mu1_raw[i] = linear;
  }
  return surfaces;
}

double calibrate_omega(std::span<const double> mu1_raw, std::span<const double> mu0,
                       std::span<const std::uint8_t> treated, double target_att) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < treated.size(); ++i) {
    if (treated[i]) {
      total += mu1_raw[i] - mu0[i];
      ++count;
    }
  }
  if (count == 0) throw data::DataError("calibrate_omega: no treated units");
  return total / static_cast<double>(count) - target_att;
}

IhdpDraw generate_ihdp_draw(const data::CovariateMatrix& covariates,
                            std::span<const std::uint8_t> treatment,
                            std::span<const double> propensity, const IhdpConfig& config,
                            const data::SplitPolicy& split_policy, std::uint64_t seed) {
  validate(config);
  const std::size_t n = covariates.n_rows();
  if (treatment.size() != n || propensity.size() != n) {
    throw data::DataError("treatment/propensity length must equal the number of rows");
  }

  IhdpDraw result;
  rng::Rng beta_stream(rng::derive_seed(seed, {0xbe7a}));

  RawSurfaces surfaces;
  for (int attempt = 0;; ++attempt) {
    result.beta = sample_beta(covariates.n_cols(), config, beta_stream);
    try {
      surfaces = compute_surfaces(covariates, result.beta, config.offset_value, config.exp_guard);
      result.regenerations = attempt;
      break;
    } catch (const SurfaceOverflow&) {
      if (attempt + 1 >= config.max_regenerations) throw;
    }
  }

  // Calibration always runs on the Original surfaces; the additive variant
  // reuses the calibrated linear component as its effect.
  result.omega = calibrate_omega(surfaces.mu1_raw, surfaces.mu0_raw, treatment, config.target_att);

  data::SimulationDraw& draw = result.draw;
  draw.covariates = covariates;
  draw.treatment.assign(treatment.begin(), treatment.end());
  draw.propensity.assign(propensity.begin(), propensity.end());
  draw.draw_seed = seed;
  draw.mu0.resize(n);
  draw.mu1.resize(n);
  draw.tau.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu0 = surfaces.mu0_raw[i];
    const double mu1_linear = surfaces.mu1_raw[i] - result.omega;
    draw.mu0[i] = mu0;
    draw.mu1[i] = config.variant == IhdpVariant::Original ? mu1_linear : mu1_linear + mu0;
    draw.tau[i] = draw.mu1[i] - draw.mu0[i];
  }

  rng::Rng noise_stream(rng::derive_seed(seed, {0x401e}));
  draw.outcome.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double factual = treatment[i] ? draw.mu1[i] : draw.mu0[i];
    draw.outcome[i] = factual + noise_stream.normal(0.0, config.noise_std);
  }

  draw.split = data::make_split(n, split_policy);
  data::validate(draw);
  return result;
}

double sigma_tau_of_draw(const data::SimulationDraw& draw) {
  const auto& test = draw.split.test_indices;
  if (test.empty()) throw data::DataError("sigma_tau_of_draw: empty test set");
  double mean = 0.0;
  for (std::size_t idx : test) mean += draw.tau[idx];
  mean /= static_cast<double>(test.size());
  double ss = 0.0;
  for (std::size_t idx : test) {
    const double centered = draw.tau[idx] - mean;
    ss += centered * centered;
  }
  return std::sqrt(ss / static_cast<double>(test.size()));
}

}  // namespace hte::dgp
