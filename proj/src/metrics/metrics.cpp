#include "hte/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hte/kernels/kernels.hpp"

namespace hte::metrics {

double rmse(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) throw MetricsError("rmse: length mismatch");
  if (estimate.empty()) throw MetricsError("rmse: empty input");
  const double ss = kernels::sumsq_diff(estimate.data(), truth.data(), estimate.size());
  return std::sqrt(ss / static_cast<double>(estimate.size()));
}

double sigma_of(std::span<const double> values) {
  if (values.empty()) throw MetricsError("sigma_of: empty input");
  const double mean = kernels::sum(values.data(), values.size()) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

Nrmse normalized_rmse(double rmse_value, double sigma_tau) {
  Nrmse out;
  if (sigma_tau > 0.0) {
    out.value = rmse_value / sigma_tau;
    out.defined = true;
  }
  return out;
}

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Repetitions collapse to one value per draw before any cross-draw statistic.
std::map<int, double> draw_means(std::span<const RunRecord* const> records,
                                 double (*key)(const RunRecord&)) {
  std::map<int, std::pair<double, int>> sums;
  for (const RunRecord* record : records) {
    auto& entry = sums[record->draw_id];
    entry.first += key(*record);
    entry.second += 1;
  }
  std::map<int, double> means;
  for (const auto& [draw, entry] : sums) means[draw] = entry.first / entry.second;
  return means;
}

}  // namespace

std::vector<AggregateRow> aggregate(std::span<const RunRecord> records) {
  if (records.empty()) throw MetricsError("aggregate: no records");

  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  std::map<std::pair<std::string, std::string>, int> errors;
  for (const RunRecord& record : records) {
    const auto key = std::make_pair(record.estimator, record.setting);
    if (record.status != "ok") {
      ++errors[key];
      continue;
    }
    groups[key].push_back(&record);
  }

  std::vector<AggregateRow> rows;
  for (const auto& [key, group] : groups) {
    const auto means = draw_means(group, [](const RunRecord& r) { return r.rmse; });
    std::vector<double> values;
    values.reserve(means.size());
    for (const auto& [draw, mean] : means) values.push_back(mean);

    AggregateRow row;
    row.estimator = key.first;
    row.group = key.second;
    row.draw_count = static_cast<int>(values.size());
    row.error_count = errors.count(key) ? errors.at(key) : 0;

    double total = 0.0;
    for (double v : values) total += v;
    row.mean_rmse = total / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - row.mean_rmse) * (v - row.mean_rmse);
      const double sample_sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      row.stderr_rmse = sample_sd / std::sqrt(static_cast<double>(values.size()));
    }
    row.median_rmse = median_of(values);
    row.mean_median_ratio = row.median_rmse > 0.0 ? row.mean_rmse / row.median_rmse : 0.0;
    row.heavy_tail_flag = row.median_rmse > 0.0 && row.mean_median_ratio >= 1.5;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<double, int> percentile_runs(std::span<const RunRecord> records, PercentileKey key,
                                      std::span<const double> percentiles) {
  if (records.empty()) throw MetricsError("percentile_runs: no records");

  std::vector<const RunRecord*> pointers;
  pointers.reserve(records.size());
  for (const RunRecord& r : records) {
    if (r.status == "ok") pointers.push_back(&r);
  }
  if (pointers.empty()) throw MetricsError("percentile_runs: no usable records");

  const auto key_fn = key == PercentileKey::SigmaTau
                          ? +[](const RunRecord& r) { return r.sigma_tau; }
                          : +[](const RunRecord& r) { return r.sigma_mu0; };
  const auto by_draw = draw_means(pointers, key_fn);

  std::vector<std::pair<double, int>> sorted;  // (key value, draw id)
  sorted.reserve(by_draw.size());
  for (const auto& [draw, value] : by_draw) sorted.emplace_back(value, draw);
  std::sort(sorted.begin(), sorted.end());

  std::map<double, int> selection;
  const std::size_t n = sorted.size();
  for (double p : percentiles) {
    if (p < 0.0 || p > 100.0) throw MetricsError("percentile out of range");
    // Nearest-rank percentile value, then the draw with the closest key;
    // exact distance ties resolve to the lower draw id.
    std::size_t rank = p <= 0.0 ? 1
                                : static_cast<std::size_t>(
                                      std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    const double target = sorted[rank - 1].first;

    double best_distance = std::numeric_limits<double>::infinity();
    int best_draw = sorted[0].second;
    for (const auto& [value, draw] : sorted) {
      const double distance = std::abs(value - target);
      if (distance < best_distance || (distance == best_distance && draw < best_draw)) {
        best_distance = distance;
        best_draw = draw;
      }
    }
    selection[p] = best_draw;
  }
  return selection;
}

Histogram histogram(std::span<const double> values, int n_bins) {
  if (values.empty()) throw MetricsError("histogram: empty input");
  if (n_bins < 1) throw MetricsError("histogram: need at least one bin");

  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) hi = lo + 1.0;

  Histogram h;
  h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
  const double width = (hi - lo) / n_bins;
  for (int b = 0; b <= n_bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + width * b;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (double v : values) {
    auto bin = static_cast<long long>((v - lo) / width);
    bin = std::clamp<long long>(bin, 0, n_bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

}  // namespace hte::metrics
