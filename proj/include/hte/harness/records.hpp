#pragma once

// The records file is the canonical, deterministic output of a run: one row
// per task in TaskId order, floats at 17 significant digits. Wall-clock
// timings are deliberately kept in a sidecar so the records file is
// byte-identical across reruns.

#include <filesystem>
#include <span>
#include <vector>

#include "hte/metrics/metrics.hpp"

namespace hte::harness {

void write_records(const std::filesystem::path& path, std::span<const metrics::RunRecord> records);
std::vector<metrics::RunRecord> read_records(const std::filesystem::path& path);

void write_timings(const std::filesystem::path& path, std::span<const metrics::RunRecord> records);

}  // namespace hte::harness
