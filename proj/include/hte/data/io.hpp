#pragma once

// Delimited-text covariate and draw files. Covariate files carry a header
// row of column names; column kinds travel in a JSON sidecar schema. All
// floats are written with 17 significant digits so that a write/load cycle
// is bit-exact. Index bases are 0-based in all files.

#include <filesystem>
#include <vector>

#include "hte/data/dataset.hpp"

namespace hte::data {

struct ColumnSchema {
  std::vector<ColumnKind> kinds;
  std::vector<std::string> names;  // optional; validated against the header when present
};

CovariateMatrix load_covariates(const std::filesystem::path& csv_path, const ColumnSchema& schema);

// Writes `<csv_path>` plus the sidecar `<csv_path>.schema.json`.
void write_covariates(const std::filesystem::path& csv_path, const CovariateMatrix& covariates);

ColumnSchema load_schema(const std::filesystem::path& schema_path);

// Draw files: index,w,y,mu0,mu1,tau,propensity,is_test. The covariates are
// stored separately via write_covariates.
void write_draw(const std::filesystem::path& csv_path, const SimulationDraw& draw);
SimulationDraw load_draw(const std::filesystem::path& csv_path, CovariateMatrix covariates);

}  // namespace hte::data
