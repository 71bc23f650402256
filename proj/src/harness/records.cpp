#include "hte/harness/records.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hte/common/format.hpp"
#include "hte/harness/config.hpp"

namespace hte::harness {

namespace {

constexpr const char* kHeader = "setting,draw_id,repetition,estimator,status,rmse,nrmse,sigma_tau,sigma_mu0,n_test,seed";

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double_field(const std::string& text) {
  return text.empty() ? 0.0 : std::strtod(text.c_str(), nullptr);
}

}  // namespace

void write_records(const std::filesystem::path& path, std::span<const metrics::RunRecord> records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open records file for writing: " + path.string());
  out << kHeader << "\n";
  for (const auto& r : records) {
    out << r.setting << ',' << r.draw_id << ',' << r.repetition << ',' << r.estimator << ','
        << r.status << ',';
    if (r.status == "ok") {
      out << to_g17(r.rmse) << ',' << (r.nrmse.defined ? to_g17(r.nrmse.value) : "") << ','
          << to_g17(r.sigma_tau) << ',' << to_g17(r.sigma_mu0) << ',' << r.n_test;
    } else {
      out << ",,,," << r.n_test;
    }
    out << ',' << r.seed << "\n";
  }
}

std::vector<metrics::RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty records file: " + path.string());
  if (line != kHeader) throw ConfigError("unexpected records header in " + path.string());

  std::vector<metrics::RunRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 11) throw ConfigError("malformed records row: " + line);
    metrics::RunRecord r;
    r.setting = fields[0];
    r.draw_id = std::atoi(fields[1].c_str());
    r.repetition = std::atoi(fields[2].c_str());
    r.estimator = fields[3];
    r.status = fields[4];
    r.rmse = parse_double_field(fields[5]);
    r.nrmse.defined = !fields[6].empty();
    r.nrmse.value = parse_double_field(fields[6]);
    r.sigma_tau = parse_double_field(fields[7]);
    r.sigma_mu0 = parse_double_field(fields[8]);
    r.n_test = std::atoi(fields[9].c_str());
    r.seed = std::strtoull(fields[10].c_str(), nullptr, 10);
    records.push_back(std::move(r));
  }
  return records;
}

void write_timings(const std::filesystem::path& path, std::span<const metrics::RunRecord> records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open timings file for writing: " + path.string());
  out << "setting,draw_id,repetition,estimator,fit_seconds\n";
  for (const auto& r : records) {
    out << r.setting << ',' << r.draw_id << ',' << r.repetition << ',' << r.estimator << ','
        << to_g17(r.fit_seconds) << "\n";
  }
}

}  // namespace hte::harness
