#include "rankcf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rankcf/errors.hpp"
#include "rankcf/format.hpp"

namespace rankcf {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view label) {
  if (label == "train") return Split::train;
  if (label == "val") return Split::val;
  if (label == "test") return Split::test;
  throw ValidationError("unknown split label '" + std::string(label) + "'");
}

std::string_view to_string(TreatmentMode mode) {
  return mode == TreatmentMode::binary ? "binary" : "continuous";
}

TreatmentMode parse_treatment_mode(std::string_view text) {
  if (text == "binary") return TreatmentMode::binary;
  if (text == "continuous") return TreatmentMode::continuous;
  throw ValidationError("unknown treatment mode '" + std::string(text) + "'");
}

ObservationalDataset::ObservationalDataset(TreatmentMode mode, std::vector<double> treatments,
                                           std::vector<double> covariates, std::size_t dim,
                                           std::vector<double> outcomes,
                                           std::vector<Split> splits)
    : mode_(mode),
      dim_(dim),
      treatments_(std::move(treatments)),
      covariates_(std::move(covariates)),
      outcomes_(std::move(outcomes)),
      splits_(std::move(splits)) {
  const std::size_t n = outcomes_.size();
  if (n == 0) throw ValidationError("dataset must contain at least one row");
  if (dim_ == 0) throw ValidationError("covariate dimension must be at least 1");
  if (treatments_.size() != n || splits_.size() != n || covariates_.size() != n * dim_) {
    throw ValidationError("treatments, covariates, outcomes and splits must have N rows");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(treatments_[k]) || !std::isfinite(outcomes_[k])) {
      throw ValidationError("non-finite value in row " + std::to_string(k));
    }
  }
  for (std::size_t i = 0; i < covariates_.size(); ++i) {
    if (!std::isfinite(covariates_[i])) {
      throw ValidationError("non-finite covariate in row " + std::to_string(i / dim_));
    }
  }
  if (mode_ == TreatmentMode::binary) {
    bool any_train = false, train0 = false, train1 = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double x = treatments_[k];
      if (x != 0.0 && x != 1.0) {
        throw ValidationError("binary treatment must be 0 or 1 (row " + std::to_string(k) +
                              ")");
      }
      if (splits_[k] == Split::train) {
        any_train = true;
        (x == 1.0 ? train1 : train0) = true;
      }
    }
    // An evaluation-only table (no train rows) is allowed.
    if (any_train && !(train0 && train1)) {
      throw ValidationError("train split must contain both treatment arms");
    }
  }
}

std::vector<std::size_t> ObservationalDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (splits_[k] == split) out.push_back(k);
  }
  return out;
}

ObservationalDataset ObservationalDataset::select(std::span<const std::size_t> rows) const {
  std::vector<double> t, c, y;
  std::vector<Split> s;
  t.reserve(rows.size());
  y.reserve(rows.size());
  s.reserve(rows.size());
  c.reserve(rows.size() * dim_);
  for (std::size_t k : rows) {
    if (k >= size()) throw AlignmentError("row index out of range");
    t.push_back(treatments_[k]);
    y.push_back(outcomes_[k]);
    s.push_back(splits_[k]);
    auto z = covariates(k);
    c.insert(c.end(), z.begin(), z.end());
  }
  return ObservationalDataset(mode_, std::move(t), std::move(c), dim_, std::move(y),
                              std::move(s));
}

ObservationalDataset ObservationalDataset::subset(Split split) const {
  const auto rows = indices(split);
  if (rows.empty()) {
    throw ValidationError("split '" + std::string(to_string(split)) + "' is empty");
  }
  return select(rows);
}

ObservationalDataset ObservationalDataset::standardized(std::span<const double> shift,
                                                        std::span<const double> scale) const {
  if (shift.size() != dim_ || scale.size() != dim_) {
    throw AlignmentError("standardization vectors must have the covariate dimension");
  }
  std::vector<double> c(covariates_);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::size_t j = i % dim_;
    c[i] = (c[i] - shift[j]) / scale[j];
  }
  return ObservationalDataset(mode_, treatments_, std::move(c), dim_, outcomes_, splits_);
}

void validate_evidence(const Evidence& evidence, std::size_t dim, TreatmentMode mode) {
  if (evidence.z.size() != dim) {
    throw ValidationError("evidence covariate length " + std::to_string(evidence.z.size()) +
                          " does not match dataset dimension " + std::to_string(dim));
  }
  if (!std::isfinite(evidence.x) || !std::isfinite(evidence.y) ||
      !std::isfinite(evidence.x_prime) ||
      !std::all_of(evidence.z.begin(), evidence.z.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw ValidationError("evidence contains a non-finite value");
  }
  if (mode == TreatmentMode::binary) {
    auto is_code = [](double v) { return v == 0.0 || v == 1.0; };
    if (!is_code(evidence.x) || !is_code(evidence.x_prime)) {
      throw ValidationError("binary evidence treatments must be 0 or 1");
    }
    if (evidence.x == evidence.x_prime) {
      throw ValidationError("counterfactual treatment must differ from the factual one");
    }
  }
}

PotentialOutcomeTable PotentialOutcomeTable::select(std::span<const std::size_t> rows) const {
  PotentialOutcomeTable out;
  out.y0.reserve(rows.size());
  out.y1.reserve(rows.size());
  for (std::size_t k : rows) {
    if (k >= size()) throw AlignmentError("row index out of range");
    out.y0.push_back(y0[k]);
    out.y1.push_back(y1[k]);
  }
  return out;
}

bool consistency_check(const ObservationalDataset& dataset, const PotentialOutcomeTable& table) {
  if (table.y0.size() != dataset.size() || table.y1.size() != dataset.size()) {
    throw AlignmentError("potential-outcome table is not aligned with the dataset");
  }
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    const double expected = dataset.treatment(k) == 1.0 ? table.y1[k] : table.y0[k];
    if (!(std::abs(dataset.outcome(k) - expected) <= 1e-12)) return false;
  }
  return true;
}

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s.remove_prefix(1);
    s.remove_suffix(1);
  }
  return std::string(s);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  return std::nullopt;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!have_header) {
      // Strip a UTF-8 byte-order mark.
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      table.header = split_line(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    ++row;
    auto cells = split_line(line);
    if (cells.size() != table.header.size()) {
      throw ParseError(row, "expected " + std::to_string(table.header.size()) +
                                " cells, found " + std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw SchemaError("'" + path + "' has no header row");
  return table;
}

double parse_cell(const CsvTable& table, std::size_t row, std::size_t col) {
  double v = 0.0;
  const std::string& cell = table.rows[row][col];
  if (!parse_double(cell, v) || !std::isfinite(v)) {
    throw ParseError(row + 1, "column '" + table.header[col] + "' has non-numeric value '" +
                                  cell + "'");
  }
  return v;
}

LoadedData load_csv_full(const std::string& path, const CsvSchema& schema) {
  const CsvTable table = read_csv_table(path);
  auto require = [&](const std::string& name) {
    auto col = table.column(name);
    if (!col) throw SchemaError("missing column '" + name + "' in '" + path + "'");
    return *col;
  };
  const std::size_t x_col = require(schema.treatment);
  const std::size_t y_col = require(schema.outcome);
  std::optional<std::size_t> split_col;
  if (schema.split) split_col = table.column(*schema.split);
  std::optional<std::size_t> y0_col, y1_col, e_col;
  if (schema.y0) y0_col = require(*schema.y0);
  if (schema.y1) y1_col = require(*schema.y1);
  if (y0_col.has_value() != y1_col.has_value()) {
    throw SchemaError("ground-truth columns must be given as a y0/y1 pair");
  }
  if (schema.randomized) e_col = require(*schema.randomized);

  std::vector<std::size_t> z_cols;
  std::vector<std::string> z_names;
  if (schema.covariates.empty()) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      if (j == x_col || j == y_col || j == split_col || j == y0_col || j == y1_col ||
          j == e_col) {
        continue;
      }
      z_cols.push_back(j);
      z_names.push_back(table.header[j]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      z_cols.push_back(require(name));
      z_names.push_back(name);
    }
  }
  if (z_cols.empty()) throw SchemaError("no covariate columns in '" + path + "'");

  const std::size_t n = table.rows.size();
  std::vector<double> t(n), y(n), c;
  c.reserve(n * z_cols.size());
  std::vector<Split> splits(n, Split::train);
  std::optional<PotentialOutcomeTable> truth;
  if (y0_col) truth = PotentialOutcomeTable{std::vector<double>(n), std::vector<double>(n)};
  std::optional<std::vector<bool>> randomized;
  if (e_col) randomized = std::vector<bool>(n);

  for (std::size_t r = 0; r < n; ++r) {
    t[r] = parse_cell(table, r, x_col);
    y[r] = parse_cell(table, r, y_col);
    for (std::size_t j : z_cols) c.push_back(parse_cell(table, r, j));
    if (split_col) {
      const std::string& label = table.rows[r][*split_col];
      if (!label.empty()) {
        try {
          splits[r] = parse_split(label);
        } catch (const ValidationError& e) {
          throw ParseError(r + 1, e.what());
        }
      }
    }
    if (truth) {
      truth->y0[r] = parse_cell(table, r, *y0_col);
      truth->y1[r] = parse_cell(table, r, *y1_col);
    }
    if (randomized) (*randomized)[r] = parse_cell(table, r, *e_col) != 0.0;
  }
  ObservationalDataset dataset(schema.mode, std::move(t), std::move(c), z_cols.size(),
                               std::move(y), std::move(splits));
  return LoadedData{std::move(dataset), std::move(z_names), std::move(truth),
                    std::move(randomized)};
}

ObservationalDataset load_csv(const std::string& path, const CsvSchema& schema) {
  return load_csv_full(path, schema).dataset;
}

std::vector<std::string> default_covariate_names(std::size_t dim) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dim; ++j) names.push_back("z" + std::to_string(j + 1));
  return names;
}

void write_csv(const std::string& path, const ObservationalDataset& dataset,
               std::span<const std::string> covariate_names, const PotentialOutcomeTable* truth) {
  std::vector<std::string> names(covariate_names.begin(), covariate_names.end());
  if (names.empty()) names = default_covariate_names(dataset.dim());
  if (names.size() != dataset.dim()) {
    throw AlignmentError("covariate name count does not match the dataset dimension");
  }
  if (truth && truth->size() != dataset.size()) {
    throw AlignmentError("potential-outcome table is not aligned with the dataset");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "x";
  for (const auto& name : names) out << ',' << name;
  out << ",y,split";
  if (truth) out << ",y0,y1";
  out << '\n';
  for (std::size_t k = 0; k < dataset.size(); ++k) {
    out << format_double(dataset.treatment(k));
    for (double v : dataset.covariates(k)) out << ',' << format_double(v);
    out << ',' << format_double(dataset.outcome(k)) << ',' << to_string(dataset.split(k));
    if (truth) out << ',' << format_double(truth->y0[k]) << ',' << format_double(truth->y1[k]);
    out << '\n';
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

std::vector<Evidence> load_queries_csv(const std::string& path,
                                       std::span<const std::string> covariate_names) {
  const CsvTable table = read_csv_table(path);
  auto require = [&](const std::string& name) {
    auto col = table.column(name);
    if (!col) throw SchemaError("missing column '" + name + "' in queries file '" + path + "'");
    return *col;
  };
  const std::size_t x_col = require("x");
  const std::size_t y_col = require("y");
  const std::size_t xp_col = require("x_prime");
  std::vector<std::size_t> z_cols;
  for (const auto& name : covariate_names) z_cols.push_back(require(name));
  std::vector<Evidence> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    Evidence ev;
    ev.x = parse_cell(table, r, x_col);
    ev.y = parse_cell(table, r, y_col);
    ev.x_prime = parse_cell(table, r, xp_col);
    for (std::size_t j : z_cols) ev.z.push_back(parse_cell(table, r, j));
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace rankcf
