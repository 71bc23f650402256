#pragma once

// Evaluation metrics and run-level aggregation: RMSE of CATE, population
// sigma over a test set, normalized RMSE with an explicit undefined flag,
// nearest-rank percentile run selection, histograms, and the two-level
// mean/stderr/median aggregation that first averages repetitions within a
// draw and only then aggregates across draws.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hte::metrics {

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double rmse(std::span<const double> estimate, std::span<const double> truth);

// Population (1/n) standard deviation.
double sigma_of(std::span<const double> values);

struct Nrmse {
  double value = 0.0;
  bool defined = false;  // false when sigma_tau == 0
};

Nrmse normalized_rmse(double rmse_value, double sigma_tau);

struct RunRecord {
  std::string setting;
  int draw_id = 0;
  int repetition = 0;
  std::string estimator;
  std::string status = "ok";  // "ok" | "error"
  double rmse = 0.0;
  Nrmse nrmse;
  double sigma_tau = 0.0;
  double sigma_mu0 = 0.0;
  int n_test = 0;
  std::uint64_t seed = 0;
  double fit_seconds = 0.0;  // kept out of the canonical records file
};

struct AggregateRow {
  std::string estimator;
  std::string group;
  double mean_rmse = 0.0;
  double stderr_rmse = 0.0;  // sample sd across draw means / sqrt(#draws)
  double median_rmse = 0.0;
  int draw_count = 0;
  int error_count = 0;
  double mean_median_ratio = 0.0;
  bool heavy_tail_flag = false;  // mean >= 1.5 * median
};

// Groups by (estimator, setting). Repetitions of the same draw are averaged
// first; error-status records are excluded from the statistics and counted.
std::vector<AggregateRow> aggregate(std::span<const RunRecord> records);

// For each percentile p (0..100), the draw whose key value is nearest the
// nearest-rank percentile of the key distribution; ties resolve to the
// lower draw id. Keys with repetitions are collapsed by draw first.
enum class PercentileKey { SigmaTau, SigmaMu0 };
std::map<double, int> percentile_runs(std::span<const RunRecord> records, PercentileKey key,
                                      std::span<const double> percentiles);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1
  std::vector<int> counts;    // n_bins, sums to the input size
};

// Uniform bins spanning [min, max] of the values (degenerate range widens
// to a unit interval); values on internal edges fall to the left bin and the
// maximum falls in the last bin.
Histogram histogram(std::span<const double> values, int n_bins);

}  // namespace hte::metrics
