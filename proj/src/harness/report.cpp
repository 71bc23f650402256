#include "hte/harness/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <json.hpp>

#include "hte/common/format.hpp"
#include "hte/harness/config.hpp"
#include "hte/harness/records.hpp"
#include "hte/metrics/metrics.hpp"

namespace hte::harness {

namespace {

struct SettingInfo {
  std::string dgp;
  std::uint64_t fingerprint = 0;
  bool feed_transformed = false;
};

std::map<std::string, SettingInfo> load_manifest_settings(const std::filesystem::path& run_dir) {
  std::map<std::string, SettingInfo> settings;
  const auto manifest_path = run_dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) return settings;  // reports degrade gracefully without a manifest
  nlohmann::json manifest;
  in >> manifest;
  for (const auto& entry : manifest["settings"]) {
    SettingInfo info;
    info.dgp = entry.value("dgp", "");
    info.fingerprint = entry.value("fingerprint", std::uint64_t{0});
    info.feed_transformed = entry.value("feed_transformed", false);
    settings[entry.at("name").get<std::string>()] = info;
  }
  return settings;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open report file for writing: " + path.string());
  return out;
}

// Draw-level collapse: mean rmse over repetitions per (setting, estimator, draw).
struct DrawPoint {
  double rmse = 0.0;
  double sigma_tau = 0.0;
  double sigma_mu0 = 0.0;
};

std::map<std::tuple<std::string, std::string, int>, DrawPoint> collapse_draws(
    std::span<const metrics::RunRecord> records) {
  std::map<std::tuple<std::string, std::string, int>, std::pair<DrawPoint, int>> sums;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    auto& [point, count] = sums[{r.setting, r.estimator, r.draw_id}];
    point.rmse += r.rmse;
    point.sigma_tau = r.sigma_tau;
    point.sigma_mu0 = r.sigma_mu0;
    ++count;
  }
  std::map<std::tuple<std::string, std::string, int>, DrawPoint> out;
  for (auto& [key, entry] : sums) {
    entry.first.rmse /= entry.second;
    out[key] = entry.first;
  }
  return out;
}

}  // namespace

ReportArtifacts write_report(const std::filesystem::path& records_csv,
                             const std::filesystem::path& out_dir) {
  const auto records = read_records(records_csv);
  if (records.empty()) throw ConfigError("report: record set is empty");
  std::filesystem::create_directories(out_dir);
  const auto run_dir = records_csv.parent_path();
  const auto manifest_settings = load_manifest_settings(run_dir);

  ReportArtifacts artifacts;
  artifacts.aggregate_csv = out_dir / "aggregate.csv";
  artifacts.scatter_csv = out_dir / "scatter.csv";
  artifacts.histograms_csv = out_dir / "histograms.csv";
  artifacts.percentile_runs_csv = out_dir / "percentile_runs.csv";
  artifacts.transformed_comparison_csv = out_dir / "transformed_comparison.csv";

  // (a) aggregate table.
  {
    auto out = open_out(artifacts.aggregate_csv);
    out << "setting,estimator,draws,errors,mean_rmse,stderr_rmse,median_rmse,mean_median_ratio,"
           "heavy_tail\n";
    for (const auto& row : metrics::aggregate(records)) {
      out << row.group << ',' << row.estimator << ',' << row.draw_count << ',' << row.error_count
          << ',' << to_g17(row.mean_rmse) << ',' << to_g17(row.stderr_rmse) << ','
          << to_g17(row.median_rmse) << ',' << to_g17(row.mean_median_ratio) << ','
          << (row.heavy_tail_flag ? 1 : 0) << "\n";
    }
  }

  const auto by_draw = collapse_draws(records);

  // (b) rmse-vs-sigma scatter data.
  {
    auto out = open_out(artifacts.scatter_csv);
    out << "setting,estimator,draw_id,sigma_tau,sigma_mu0,rmse\n";
    for (const auto& [key, point] : by_draw) {
      const auto& [setting, estimator, draw_id] = key;
      out << setting << ',' << estimator << ',' << draw_id << ',' << to_g17(point.sigma_tau) << ','
          << to_g17(point.sigma_mu0) << ',' << to_g17(point.rmse) << "\n";
    }
  }

  // (c) histogram data over draw-level rmse.
  {
    auto out = open_out(artifacts.histograms_csv);
    out << "setting,estimator,bin_lo,bin_hi,count\n";
    std::map<std::pair<std::string, std::string>, std::vector<double>> values;
    for (const auto& [key, point] : by_draw) {
      values[{std::get<0>(key), std::get<1>(key)}].push_back(point.rmse);
    }
    for (const auto& [key, rmses] : values) {
      const auto h = metrics::histogram(rmses, 10);
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << key.first << ',' << key.second << ',' << to_g17(h.edges[b]) << ','
            << to_g17(h.edges[b + 1]) << ',' << h.counts[b] << "\n";
      }
    }
  }

  // (d) percentile-run selections, plus CATE dumps when the run kept them.
  {
    auto out = open_out(artifacts.percentile_runs_csv);
    out << "setting,estimator,key,percentile,draw_id\n";
    std::map<std::pair<std::string, std::string>, std::vector<metrics::RunRecord>> groups;
    for (const auto& r : records) groups[{r.setting, r.estimator}].push_back(r);
    const double percentiles[] = {10.0, 50.0, 90.0};
    for (const auto& [key, group] : groups) {
      // The additive IHDP setting stratifies by sigma_mu0; everything else
      // by sigma_tau. Degenerate keys (e.g. zero-heterogeneity settings)
      // still resolve via nearest-rank.
      const bool additive = manifest_settings.count(key.first) &&
                            manifest_settings.at(key.first).dgp == "ihdp-additive";
      const auto metric_key =
          additive ? metrics::PercentileKey::SigmaMu0 : metrics::PercentileKey::SigmaTau;
      const auto selection = metrics::percentile_runs(group, metric_key, percentiles);
      for (const auto& [p, draw_id] : selection) {
        out << key.first << ',' << key.second << ',' << (additive ? "sigma_mu0" : "sigma_tau")
            << ',' << to_g17(p) << ',' << draw_id << "\n";
        const auto dump = run_dir / "predictions" / key.first /
                          ("draw" + std::to_string(draw_id) + "_" + key.second + ".csv");
        if (std::filesystem::exists(dump)) {
          std::filesystem::copy_file(
              dump,
              out_dir / ("percentile_" + key.first + "_" + key.second + "_p" +
                         std::to_string(static_cast<int>(p)) + ".csv"),
              std::filesystem::copy_options::overwrite_existing);
        }
      }
    }
  }

  // (e) raw-vs-transformed comparison over settings sharing a DGP identity.
  {
    auto out = open_out(artifacts.transformed_comparison_csv);
    out << "estimator,raw_setting,transformed_setting,mean_rmse_raw,mean_rmse_transformed,"
           "relative_change\n";
    std::map<std::uint64_t, std::pair<std::string, std::string>> pairs;  // fp -> (raw, transformed)
    for (const auto& [name, info] : manifest_settings) {
      auto& pair = pairs[info.fingerprint];
      (info.feed_transformed ? pair.second : pair.first) = name;
    }
    const auto aggregates = metrics::aggregate(records);
    auto mean_of = [&](const std::string& setting,
                       const std::string& estimator) -> std::optional<double> {
      for (const auto& row : aggregates) {
        if (row.group == setting && row.estimator == estimator) return row.mean_rmse;
      }
      return std::nullopt;
    };
    for (const auto& [fp, pair] : pairs) {
      if (pair.first.empty() || pair.second.empty()) continue;
      std::set<std::string> estimators;
      for (const auto& r : records) {
        if (r.setting == pair.first || r.setting == pair.second) estimators.insert(r.estimator);
      }
      for (const auto& estimator : estimators) {
        const auto raw = mean_of(pair.first, estimator);
        const auto transformed = mean_of(pair.second, estimator);
        if (!raw || !transformed) continue;
        const double relative = *raw != 0.0 ? (*transformed - *raw) / *raw : 0.0;
        out << estimator << ',' << pair.first << ',' << pair.second << ',' << to_g17(*raw) << ','
            << to_g17(*transformed) << ',' << to_g17(relative) << "\n";
      }
    }
  }

  return artifacts;
}

}  // namespace hte::harness
