#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraudbench/dataset.hpp"
#include "fraudbench/matrix.hpp"
#include "fraudbench/ops.hpp"
#include "fraudbench/rng.hpp"
#include "fraudbench/text.hpp"

namespace fraudbench {

// Uniform random permutation of rows (Fisher-Yates), deterministic per seed.
inline LabeledDataset shuffle(const LabeledDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> order(ds.n_rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  return subset_rows(ds, order);
}

// Keeps every minority-class row and a same-size uniform sample (without
// replacement) of the majority class, then shuffles the result. The output
// always has exactly equal class counts.
inline LabeledDataset balance_undersample(const LabeledDataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> class0, class1;
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    (ds.labels[r] == 1 ? class1 : class0).push_back(r);
  if (class0.empty() || class1.empty())
    throw std::runtime_error("balance_undersample: input must contain both classes");

  auto& minority = class1.size() <= class0.size() ? class1 : class0;
  auto& majority = class1.size() <= class0.size() ? class0 : class1;

  Rng rng(seed);
  for (std::size_t i = majority.size(); i > 1; --i)
    std::swap(majority[i - 1], majority[rng.below(i)]);
  majority.resize(minority.size());

  std::vector<std::size_t> picked = minority;
  picked.insert(picked.end(), majority.begin(), majority.end());
  for (std::size_t i = picked.size(); i > 1; --i)
    std::swap(picked[i - 1], picked[rng.below(i)]);
  return subset_rows(ds, picked);
}

struct CorrelationMatrix {
  std::vector<std::string> labels;     // feature names plus trailing "Class"
  Matrix values;                       // symmetric, unit diagonal
  std::vector<bool> constant_column;   // true where the column had zero variance
};

// Sample Pearson coefficients over all feature columns with the label
// appended as a final "Class" column. Zero-variance columns get 0 in every
// off-diagonal entry (correlation with a constant is undefined) and are
// flagged so downstream output can mark them.
inline CorrelationMatrix pearson_correlation(const LabeledDataset& ds) {
  if (ds.n_rows() < 2)
    throw std::runtime_error("pearson_correlation: need at least 2 rows");
  const std::size_t n = ds.n_rows();
  const std::size_t k = ds.n_cols() + 1;

  Matrix centered(n, k);
  std::vector<double> norm(k, 0.0);
  CorrelationMatrix out;
  out.labels = ds.feature_names;
  out.labels.push_back("Class");
  out.constant_column.assign(k, false);

  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      mean += c < ds.n_cols() ? ds.features(r, c) : static_cast<double>(ds.labels[r]);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v =
          (c < ds.n_cols() ? ds.features(r, c) : static_cast<double>(ds.labels[r])) - mean;
      centered(r, c) = v;
      ss += v * v;
    }
    norm[c] = std::sqrt(ss);
    if (norm[c] == 0.0) out.constant_column[c] = true;
  }

  out.values = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double r = 0.0;
      if (!out.constant_column[i] && !out.constant_column[j]) {
        double dot = 0.0;
        for (std::size_t row = 0; row < n; ++row) dot += centered(row, i) * centered(row, j);
        r = dot / (norm[i] * norm[j]);
        r = std::clamp(r, -1.0, 1.0);
      }
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

// Matrix with a header row and column; when constant columns exist a final
// "is_constant" row of 0/1 markers follows the matrix body.
inline std::string correlation_to_csv(const CorrelationMatrix& cm) {
  std::string out;
  for (const auto& l : cm.labels) {
    out += ',';
    out += l;
  }
  out += '\n';
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    out += cm.labels[i];
    for (std::size_t j = 0; j < cm.labels.size(); ++j) {
      out += ',';
      out += format_double(cm.values(i, j));
    }
    out += '\n';
  }
  bool any_constant = false;
  for (const bool f : cm.constant_column) any_constant |= f;
  if (any_constant) {
    out += "is_constant";
    for (const bool f : cm.constant_column) out += f ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

struct IqrBounds {
  std::string feature;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Linear interpolation at p*(n-1) over the sorted values.
inline double quantile_linear(std::vector<double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
  std::sort(sorted.begin(), sorted.end());
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Quartiles plus Tukey fences at 1.5 * IQR.
inline IqrBounds iqr_bounds(std::span<const double> values, std::string feature = {}) {
  if (values.empty()) throw std::invalid_argument("iqr_bounds: empty vector");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  IqrBounds b;
  b.feature = std::move(feature);
  b.q1 = quantile_linear(sorted, 0.25);
  b.q3 = quantile_linear(sorted, 0.75);
  b.iqr = b.q3 - b.q1;
  b.lower = b.q1 - 1.5 * b.iqr;
  b.upper = b.q3 + 1.5 * b.iqr;
  return b;
}

struct OutlierRemovalReport {
  std::vector<IqrBounds> bounds;
  std::size_t rows_removed = 0;
  std::vector<std::size_t> row_indices_removed;  // original row indices
};

enum class OutlierFit { FraudClassOnly, AllRows };

inline std::vector<std::string> default_outlier_features() {
  return {"V14", "V12", "V10"};
}

// Drops every row whose value on ANY of the given bounds' features lies
// strictly outside [lower, upper]. Boundary values survive.
inline std::pair<LabeledDataset, OutlierRemovalReport> remove_outliers_with_bounds(
    const LabeledDataset& ds, const std::vector<IqrBounds>& bounds) {
  std::vector<std::size_t> cols;
  for (const auto& b : bounds) cols.push_back(find_column(ds, b.feature));

  OutlierRemovalReport report;
  report.bounds = bounds;
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    bool outlier = false;
    for (std::size_t i = 0; i < bounds.size() && !outlier; ++i) {
      const double v = ds.features(r, cols[i]);
      outlier = v < bounds[i].lower || v > bounds[i].upper;
    }
    if (outlier)
      report.row_indices_removed.push_back(r);
    else
      kept.push_back(r);
  }
  report.rows_removed = report.row_indices_removed.size();
  return {subset_rows(ds, kept), std::move(report)};
}

// Fits Tukey fences per feature on the chosen subset of the ORIGINAL input
// (so the listed features cannot influence each other's bounds), then removes
// jointly. FraudClassOnly fits on fraud rows but filters every row.
inline std::pair<LabeledDataset, OutlierRemovalReport> remove_outliers_iqr(
    const LabeledDataset& ds,
    const std::vector<std::string>& features = default_outlier_features(),
    OutlierFit fit_on = OutlierFit::FraudClassOnly) {
  std::vector<std::size_t> fit_rows;
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    if (fit_on == OutlierFit::AllRows || ds.labels[r] == 1) fit_rows.push_back(r);
  if (fit_rows.empty())
    throw std::runtime_error("remove_outliers_iqr: no rows to fit bounds on");

  std::vector<IqrBounds> bounds;
  for (const auto& name : features) {
    const std::size_t c = find_column(ds, name);
    std::vector<double> vals;
    vals.reserve(fit_rows.size());
    for (const std::size_t r : fit_rows) vals.push_back(ds.features(r, c));
    bounds.push_back(iqr_bounds(vals, name));
  }
  return remove_outliers_with_bounds(ds, bounds);
}

// One line per feature with the fitted fences.
inline std::string outlier_report_to_csv(const OutlierRemovalReport& report) {
  std::string out = "feature,q1,q3,iqr,lower,upper\n";
  for (const auto& b : report.bounds) {
    out += b.feature;
    out += ',' + format_double(b.q1);
    out += ',' + format_double(b.q3);
    out += ',' + format_double(b.iqr);
    out += ',' + format_double(b.lower);
    out += ',' + format_double(b.upper);
    out += '\n';
  }
  return out;
}

// Per-class test counts are round(class_count * test_fraction), clamped to
// [1, class_count - 1] so both halves keep both classes. Row selection is
// seeded; row order within each half follows the input.
inline std::pair<LabeledDataset, LabeledDataset> stratified_split(
    const LabeledDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("stratified_split: test_fraction must be in (0,1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    by_class[ds.labels[r] == 1 ? 1 : 0].push_back(r);
  for (const auto& rows : by_class)
    if (rows.size() < 2)
      throw std::runtime_error("stratified_split: each class needs at least 2 rows");

  Rng rng(seed);
  std::vector<std::size_t> test_idx, train_idx;
  for (auto& rows : by_class) {
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(rows.size()) * test_fraction));
    n_test = std::max<std::size_t>(1, std::min(n_test, rows.size() - 1));
    for (std::size_t i = rows.size(); i > 1; --i)
      std::swap(rows[i - 1], rows[rng.below(i)]);
    test_idx.insert(test_idx.end(), rows.begin(), rows.begin() + n_test);
    train_idx.insert(train_idx.end(), rows.begin() + n_test, rows.end());
  }
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {subset_rows(ds, train_idx), subset_rows(ds, test_idx)};
}

// Per-feature z-score parameters. Fit on training rows only, then applied to
// any split; constant columns pass through centered (unit divisor).
struct Standardizer {
  std::vector<std::string> feature_names;
  std::vector<double> mean;
  std::vector<double> stddev;  // the divisor actually used, never 0
};

inline Standardizer fit_standardizer(const LabeledDataset& ds) {
  validate(ds);
  if (ds.n_rows() == 0)
    throw std::invalid_argument("standardizer: empty dataset");
  Standardizer s;
  s.feature_names = ds.feature_names;
  s.mean.resize(ds.n_cols());
  s.stddev.resize(ds.n_cols());
  std::vector<double> column(ds.n_rows());
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    for (std::size_t r = 0; r < ds.n_rows(); ++r) column[r] = ds.features(r, c);
    s.mean[c] = mean(column);
    const double sd = stddev_population(column);
    s.stddev[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

inline LabeledDataset standardize(const LabeledDataset& ds, const Standardizer& s) {
  if (ds.n_cols() != s.mean.size())
    throw std::invalid_argument("standardizer: feature count mismatch");
  LabeledDataset out = ds;
  for (std::size_t c = 0; c < ds.n_cols(); ++c)
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
      out.features(r, c) = (ds.features(r, c) - s.mean[c]) / s.stddev[c];
  return out;
}

}  // namespace fraudbench
