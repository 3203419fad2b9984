#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fraudbench/matrix.hpp"
#include "fraudbench/rng.hpp"
#include "fraudbench/text.hpp"

namespace fraudbench {

// Feature matrix plus parallel 0/1 labels. Immutable by convention once
// built; every pipeline stage returns a fresh copy.
struct LabeledDataset {
  Matrix features;                         // n_rows x n_cols
  std::vector<std::string> feature_names;  // length n_cols
  std::vector<int> labels;                 // length n_rows, values in {0,1}

  std::size_t n_rows() const { return features.rows(); }
  std::size_t n_cols() const { return features.cols(); }
};

inline void validate(const LabeledDataset& ds) {
  if (ds.feature_names.size() != ds.n_cols())
    throw std::runtime_error("dataset: column name count mismatch");
  if (ds.labels.size() != ds.n_rows())
    throw std::runtime_error("dataset: label count mismatch");
  if (!ds.features.all_finite())
    throw std::runtime_error("dataset: non-finite feature value");
  for (const int y : ds.labels)
    if (y != 0 && y != 1) throw std::runtime_error("dataset: label outside {0,1}");
}

struct ClassCounts {
  std::size_t n_fraud = 0;
  std::size_t n_legit = 0;
  double fraud_ratio = 0.0;  // 0 for an empty dataset
};

inline ClassCounts class_counts(const LabeledDataset& ds) {
  ClassCounts c;
  for (const int y : ds.labels) {
    if (y == 1)
      ++c.n_fraud;
    else
      ++c.n_legit;
  }
  const std::size_t total = c.n_fraud + c.n_legit;
  c.fraud_ratio = total ? static_cast<double>(c.n_fraud) / static_cast<double>(total) : 0.0;
  return c;
}

enum class CsvSchema { Legacy2013, Modern2023, AutoDetect };

namespace detail {

inline std::vector<std::string> v_block() {
  std::vector<std::string> names;
  for (int i = 1; i <= 28; ++i) names.push_back("V" + std::to_string(i));
  return names;
}

inline std::vector<std::string> legacy2013_header() {
  std::vector<std::string> h = {"Time"};
  for (auto& v : v_block()) h.push_back(v);
  h.push_back("Amount");
  h.push_back("Class");
  return h;
}

inline std::vector<std::string> modern2023_header() {
  std::vector<std::string> h = {"id"};
  for (auto& v : v_block()) h.push_back(v);
  h.push_back("Amount");
  h.push_back("Class");
  return h;
}

inline std::vector<std::string> parse_header_cells(std::string_view line) {
  std::vector<std::string> cells;
  for (const auto raw : split(line, ',')) cells.emplace_back(strip_cell(raw));
  return cells;
}

}  // namespace detail

// Loads a comma-separated file with a header row. Legacy2013 expects
// Time,V1..V28,Amount,Class; Modern2023 expects id,V1..V28,Amount,Class and
// drops the id column. AutoDetect accepts either of those, or any header
// whose final column is Class (every other column becomes a feature). Parsing
// is strict: every cell must be a finite number, every row the header's
// width, every label exactly 0 or 1. Errors carry 1-based line numbers.
inline LabeledDataset load_csv(const std::string& path,
                               CsvSchema schema = CsvSchema::AutoDetect) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file, expected a header row");
  const auto header = detail::parse_header_cells(line);

  const auto legacy = detail::legacy2013_header();
  const auto modern = detail::modern2023_header();

  bool drop_first = false;
  std::vector<std::string> names;
  if (schema == CsvSchema::Legacy2013) {
    if (header != legacy)
      throw std::runtime_error(path + ":1: header does not match the Time,V1..V28,Amount,Class layout");
    names.assign(header.begin(), header.end() - 1);
  } else if (schema == CsvSchema::Modern2023) {
    if (header != modern)
      throw std::runtime_error(path + ":1: header does not match the id,V1..V28,Amount,Class layout");
    drop_first = true;
    names.assign(header.begin() + 1, header.end() - 1);
  } else {
    if (header == legacy) {
      names.assign(header.begin(), header.end() - 1);
    } else if (header == modern) {
      drop_first = true;
      names.assign(header.begin() + 1, header.end() - 1);
    } else if (header.size() >= 2 && header.back() == "Class") {
      names.assign(header.begin(), header.end() - 1);
      for (const auto& n : names)
        if (n.empty())
          throw std::runtime_error(path + ":1: empty column name in header");
    } else {
      throw std::runtime_error(path + ":1: header matches no known schema (expected a trailing Class column)");
    }
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j])
        throw std::runtime_error(path + ":1: duplicate column name '" + names[i] + "'");

  const std::size_t width = header.size();
  const std::size_t skip = drop_first ? 1 : 0;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != width)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": row has " +
                               std::to_string(cells.size()) + " fields, expected " +
                               std::to_string(width));
    for (std::size_t c = skip; c + 1 < width; ++c) {
      try {
        values.push_back(parse_double(strip_cell(cells[c])));
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": column '" +
                                 names[c - skip] + "': " + e.what());
      }
    }
    double label_value = 0.0;
    try {
      label_value = parse_double(strip_cell(cells.back()));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": Class column: " +
                               e.what());
    }
    if (label_value != 0.0 && label_value != 1.0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": Class value must be 0 or 1, got '" +
                               format_double(label_value) + "'");
    labels.push_back(label_value == 1.0 ? 1 : 0);
  }
  if (labels.empty()) throw std::runtime_error(path + ": no data rows");

  LabeledDataset ds;
  ds.feature_names = names;
  ds.labels = std::move(labels);
  ds.features = Matrix(ds.labels.size(), names.size());
  ds.features.data() = std::move(values);
  validate(ds);
  return ds;
}

// Writes features plus a trailing Class column. When a Time column exists it
// leads, matching the Time,V1..V28,Amount,Class layout; otherwise columns
// keep their stored order. Values use the shortest round-tripping decimal
// form, so a write/load cycle is exact.
inline void write_csv(const LabeledDataset& ds, const std::string& path) {
  validate(ds);
  std::vector<std::size_t> order;
  order.reserve(ds.n_cols());
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    if (ds.feature_names[c] == "Time") order.push_back(c);
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    if (ds.feature_names[c] != "Time") order.push_back(c);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file '" + path + "' for writing");
  std::string buf;
  for (const std::size_t c : order) {
    buf += ds.feature_names[c];
    buf += ',';
  }
  buf += "Class\n";
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (const std::size_t c : order) {
      buf += format_double(ds.features(r, c));
      buf += ',';
    }
    buf += std::to_string(ds.labels[r]);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// Returns a copy without the named columns. Unknown names are an error so a
// typo in a config is caught instead of silently ignored.
inline LabeledDataset drop_columns(const LabeledDataset& ds,
                                   const std::vector<std::string>& names) {
  for (const auto& n : names) {
    bool found = false;
    for (const auto& have : ds.feature_names) found |= (have == n);
    if (!found) throw std::runtime_error("drop_columns: no column named '" + n + "'");
  }
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    bool dropped = false;
    for (const auto& n : names) dropped |= (ds.feature_names[c] == n);
    if (!dropped) keep.push_back(c);
  }
  LabeledDataset out;
  out.labels = ds.labels;
  for (const std::size_t c : keep) out.feature_names.push_back(ds.feature_names[c]);
  out.features = Matrix(ds.n_rows(), keep.size());
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    for (std::size_t i = 0; i < keep.size(); ++i)
      out.features(r, i) = ds.features(r, keep[i]);
  return out;
}

inline LabeledDataset subset_rows(const LabeledDataset& ds,
                                  const std::vector<std::size_t>& indices) {
  LabeledDataset out;
  out.feature_names = ds.feature_names;
  out.features = Matrix(indices.size(), ds.n_cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t r = indices[i];
    if (r >= ds.n_rows()) throw std::out_of_range("subset_rows: index out of range");
    const auto src = ds.features.row(r);
    const auto dst = out.features.row(i);
    for (std::size_t c = 0; c < ds.n_cols(); ++c) dst[c] = src[c];
    out.labels.push_back(ds.labels[r]);
  }
  return out;
}

inline std::size_t find_column(const LabeledDataset& ds, const std::string& name) {
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    if (ds.feature_names[c] == name) return c;
  throw std::runtime_error("no column named '" + name + "'");
}

enum class SyntheticKind { GaussianBlobs, XorQuadrants };

struct SyntheticSpec {
  std::size_t n_per_class = 100;
  SyntheticKind kind = SyntheticKind::GaussianBlobs;
  std::size_t n_features = 2;
  std::uint64_t seed = 42;
  double mu = 3.0;      // GaussianBlobs: center magnitude on every coordinate
  double jitter = 0.7;  // XorQuadrants: noise around the quadrant centers
};

// Deterministic toy datasets. GaussianBlobs is linearly separable for large
// mu: class 0 sits at (-mu,..,-mu), class 1 at (+mu,..,+mu), unit variance.
// XorQuadrants is not: class 1 occupies the two quadrants where
// sign(x0)*sign(x1) < 0, class 0 the other two; features beyond x1 are pure
// standard-normal noise. Rows are emitted class 0 first, then class 1.
inline LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_per_class < 1)
    throw std::invalid_argument("generate_synthetic: n_per_class must be at least 1");
  if (spec.n_features < 2)
    throw std::invalid_argument("generate_synthetic: n_features must be at least 2");

  Rng rng(spec.seed);
  const std::size_t n = 2 * spec.n_per_class;
  LabeledDataset ds;
  ds.features = Matrix(n, spec.n_features);
  ds.labels.resize(n);
  for (std::size_t c = 0; c < spec.n_features; ++c)
    ds.feature_names.push_back("x" + std::to_string(c));

  const double quadrant_center = 2.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int label = r < spec.n_per_class ? 0 : 1;
    ds.labels[r] = label;
    const auto row = ds.features.row(r);
    if (spec.kind == SyntheticKind::GaussianBlobs) {
      const double center = label == 1 ? spec.mu : -spec.mu;
      for (std::size_t c = 0; c < spec.n_features; ++c) row[c] = center + rng.normal();
    } else {
      const bool flip = rng.uniform() < 0.5;
      double cx = quadrant_center, cy = quadrant_center;
      if (label == 1) {
        cx = flip ? quadrant_center : -quadrant_center;
        cy = -cx;
      } else {
        cx = flip ? quadrant_center : -quadrant_center;
        cy = cx;
      }
      row[0] = cx + spec.jitter * rng.normal();
      row[1] = cy + spec.jitter * rng.normal();
      for (std::size_t c = 2; c < spec.n_features; ++c) row[c] = rng.normal();
    }
  }
  return ds;
}

}  // namespace fraudbench
