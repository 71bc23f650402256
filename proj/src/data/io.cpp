#include "hte/data/io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hte/common/format.hpp"

namespace hte::data {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim = ',') {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, delim)) fields.push_back(field);
  if (!line.empty() && line.back() == delim) fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, std::size_t row, std::size_t col) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw DataError("cannot parse '" + text + "' as a number at row " + std::to_string(row) +
                    ", column " + std::to_string(col));
  }
  return v;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

CovariateMatrix load_covariates(const std::filesystem::path& csv_path, const ColumnSchema& schema) {
  auto in = open_for_read(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty covariate file: " + csv_path.string());
  const std::vector<std::string> header = split_line(line);
  const std::size_t d = schema.kinds.size();
  if (header.size() != d) {
    throw DataError("column count mismatch: file has " + std::to_string(header.size()) +
                    " columns, schema declares " + std::to_string(d));
  }
  if (!schema.names.empty()) {
    if (schema.names.size() != d) throw DataError("schema name list length mismatch");
    for (std::size_t j = 0; j < d; ++j) {
      if (schema.names[j] != header[j]) {
        throw DataError("header name '" + header[j] + "' does not match schema name '" +
                        schema.names[j] + "' at column " + std::to_string(j));
      }
    }
  }

  std::vector<double> rows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != d) {
      throw DataError("row " + std::to_string(n) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) rows.push_back(parse_double(fields[j], n, j));
    ++n;
  }
  if (n == 0) throw DataError("covariate file has no data rows: " + csv_path.string());

  CovariateMatrix covariates;
  covariates.values = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) covariates.values(i, j) = rows[i * d + j];
  }
  covariates.kinds = schema.kinds;
  covariates.names = header;
  validate(covariates);
  return covariates;
}

void write_covariates(const std::filesystem::path& csv_path, const CovariateMatrix& covariates) {
  auto out = open_for_write(csv_path);
  for (std::size_t j = 0; j < covariates.n_cols(); ++j) {
    out << (j == 0 ? "" : ",") << covariates.names[j];
  }
  out << "\n";
  for (std::size_t i = 0; i < covariates.n_rows(); ++i) {
    for (std::size_t j = 0; j < covariates.n_cols(); ++j) {
      out << (j == 0 ? "" : ",") << to_g17(covariates.values(i, j));
    }
    out << "\n";
  }

  nlohmann::json schema;
  schema["columns"] = nlohmann::json::array();
  for (std::size_t j = 0; j < covariates.n_cols(); ++j) {
    schema["columns"].push_back(
        {{"name", covariates.names[j]}, {"kind", column_kind_name(covariates.kinds[j])}});
  }
  auto schema_out = open_for_write(csv_path.string() + ".schema.json");
  schema_out << schema.dump(2) << "\n";
}

ColumnSchema load_schema(const std::filesystem::path& schema_path) {
  auto in = open_for_read(schema_path);
  nlohmann::json parsed;
  try {
    in >> parsed;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse schema " + schema_path.string() + ": " + e.what());
  }
  if (!parsed.contains("columns") || !parsed["columns"].is_array()) {
    throw DataError("schema must contain a 'columns' array");
  }
  ColumnSchema schema;
  for (const auto& col : parsed["columns"]) {
    schema.kinds.push_back(column_kind_from_name(col.at("kind").get<std::string>()));
    schema.names.push_back(col.value("name", ""));
  }
  return schema;
}

void write_draw(const std::filesystem::path& csv_path, const SimulationDraw& draw) {
  auto out = open_for_write(csv_path);
  out << "index,w,y,mu0,mu1,tau,propensity,is_test\n";
  const std::size_t n = draw.covariates.n_rows();
  std::vector<std::uint8_t> is_test(n, 0);
  for (std::size_t idx : draw.split.test_indices) is_test[idx] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << int(draw.treatment[i]) << ',' << to_g17(draw.outcome[i]) << ','
        << to_g17(draw.mu0[i]) << ',' << to_g17(draw.mu1[i]) << ',' << to_g17(draw.tau[i]) << ','
        << to_g17(draw.propensity[i]) << ',' << int(is_test[i]) << "\n";
  }
}

SimulationDraw load_draw(const std::filesystem::path& csv_path, CovariateMatrix covariates) {
  auto in = open_for_read(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty draw file: " + csv_path.string());

  SimulationDraw draw;
  draw.covariates = std::move(covariates);
  const std::size_t n = draw.covariates.n_rows();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != 8) throw DataError("draw row " + std::to_string(row) + " malformed");
    draw.treatment.push_back(static_cast<std::uint8_t>(parse_double(fields[1], row, 1)));
    draw.outcome.push_back(parse_double(fields[2], row, 2));
    draw.mu0.push_back(parse_double(fields[3], row, 3));
    draw.mu1.push_back(parse_double(fields[4], row, 4));
    draw.tau.push_back(parse_double(fields[5], row, 5));
    draw.propensity.push_back(parse_double(fields[6], row, 6));
    if (parse_double(fields[7], row, 7) != 0.0) {
      draw.split.test_indices.push_back(row);
    } else {
      draw.split.train_indices.push_back(row);
    }
    ++row;
  }
  if (row != n) throw DataError("draw row count does not match covariates");
  validate(draw);
  return draw;
}

}  // namespace hte::data
