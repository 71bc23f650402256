#pragma once

// The IHDP-style semi-synthetic response surfaces: an exponential control
// surface mu0(x) = exp((x + A) beta) against a linear treated surface
// mu1(x) = x beta - omega, with omega calibrated per draw so the average
// effect on the treated equals a fixed target. The additive variant keeps
// mu0 and replaces mu1 with mu1 + mu0, which turns the effect into the
// simple linear function x beta - omega.

#include <cstdint>
#include <span>
#include <vector>

#include "hte/common/rng.hpp"
#include "hte/data/dataset.hpp"

namespace hte::dgp {

enum class IhdpVariant { Original, AdditiveTE };

struct IhdpConfig {
  std::vector<double> coefficient_support{0.0, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> coefficient_probs{0.6, 0.1, 0.1, 0.1, 0.1};
  double offset_value = 0.5;  // fills the constant offset matrix A
  double noise_std = 1.0;
  double target_att = 4.0;
  IhdpVariant variant = IhdpVariant::Original;
  // Draws whose exponent magnitude exceeds this are flagged and regenerated
  // with a fresh beta rather than silently producing non-finite surfaces.
  double exp_guard = 700.0;
  int max_regenerations = 64;
};

void validate(const IhdpConfig& config);

class SurfaceOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One entry i.i.d. from the configured support; deterministic given the
// stream state.
std::vector<double> sample_beta(std::size_t d, const IhdpConfig& config, rng::Rng& stream);

struct RawSurfaces {
  std::vector<double> mu0_raw;  // exp((x_i + A_i) . beta)
  std::vector<double> mu1_raw;  // x_i . beta, before the omega shift
};

// Throws SurfaceOverflow if any exponent magnitude exceeds config.exp_guard.
RawSurfaces compute_surfaces(const data::CovariateMatrix& covariates, std::span<const double> beta,
                             double offset_value, double exp_guard = 700.0);

// omega such that mean over treated units of (mu1_raw - omega - mu0) equals
// target_att. Throws if no unit is treated.
double calibrate_omega(std::span<const double> mu1_raw, std::span<const double> mu0,
                       std::span<const std::uint8_t> treated, double target_att);

struct IhdpDraw {
  data::SimulationDraw draw;
  std::vector<double> beta;
  double omega = 0.0;
  int regenerations = 0;  // overflow-guard retries consumed
};

// Assembles a full draw over fixed covariates/treatment/propensity. Beta is
// resampled from the draw seed, omega recalibrated, and outcome noise added
// on the factual surface.
IhdpDraw generate_ihdp_draw(const data::CovariateMatrix& covariates,
                            std::span<const std::uint8_t> treatment,
                            std::span<const double> propensity, const IhdpConfig& config,
                            const data::SplitPolicy& split_policy, std::uint64_t seed);

// Population standard deviation of the true CATE over the test rows.
double sigma_tau_of_draw(const data::SimulationDraw& draw);

}  // namespace hte::dgp
