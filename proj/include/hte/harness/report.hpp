#pragma once

// Report generation over a finished run: aggregate tables, RMSE-by-sigma
// scatter data, histogram data, percentile-run selections with true/predicted
// CATE dumps, and the raw-vs-transformed comparison table. Every number is
// recomputed from the records file; the manifest (for setting pairing) and
// prediction dumps are read from the run directory beside it.

#include <filesystem>

namespace hte::harness {

struct ReportArtifacts {
  std::filesystem::path aggregate_csv;
  std::filesystem::path scatter_csv;
  std::filesystem::path histograms_csv;
  std::filesystem::path percentile_runs_csv;
  std::filesystem::path transformed_comparison_csv;
};

ReportArtifacts write_report(const std::filesystem::path& records_csv,
                             const std::filesystem::path& out_dir);

}  // namespace hte::harness
