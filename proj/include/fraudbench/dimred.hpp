#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraudbench/dataset.hpp"
#include "fraudbench/matrix.hpp"
#include "fraudbench/svd.hpp"
#include "fraudbench/text.hpp"

namespace fraudbench {

enum class DimRedMethod { TSNE, PCA, TruncatedSVD };

inline std::string to_string(DimRedMethod m) {
  switch (m) {
    case DimRedMethod::TSNE: return "tsne";
    case DimRedMethod::PCA: return "pca";
    case DimRedMethod::TruncatedSVD: return "tsvd";
  }
  return "?";
}

struct Embedding2D {
  Matrix points;  // n x 2
  std::vector<int> labels;
  DimRedMethod method = DimRedMethod::PCA;
  std::map<std::string, double> diagnostics;
};

namespace detail {

inline Matrix centered_features(const LabeledDataset& ds) {
  Matrix x = ds.features;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) -= mean;
  }
  return x;
}

// Flips column j of v (and u, when given) so the largest-magnitude loading in
// v's column is positive. Deterministic tie-break: first maximal index wins.
inline void fix_component_signs(Matrix& v, Matrix* u, std::size_t n_components) {
  for (std::size_t j = 0; j < n_components; ++j) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.rows(); ++i)
      if (std::abs(v(i, j)) > std::abs(v(arg, j))) arg = i;
    if (v(arg, j) < 0.0) {
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
      if (u)
        for (std::size_t i = 0; i < u->rows(); ++i) (*u)(i, j) = -(*u)(i, j);
    }
  }
}

}  // namespace detail

// Top-2 principal directions of the mean-centered feature matrix, via SVD of
// the centered data itself. Columns are orthonormal; signs follow the
// largest-|loading|-positive convention.
inline Matrix pca_components_2d(const LabeledDataset& ds) {
  if (ds.n_rows() < 3) throw std::runtime_error("pca_2d: need at least 3 rows");
  if (ds.n_cols() < 2) throw std::runtime_error("pca_2d: need at least 2 columns");
  const Matrix x = detail::centered_features(ds);
  SvdResult svd = jacobi_svd(x);
  if (svd.sigma[0] == 0.0)
    throw std::runtime_error("pca_2d: degenerate input (all rows identical)");
  detail::fix_component_signs(svd.v, nullptr, 2);
  Matrix components(ds.n_cols(), 2);
  for (std::size_t i = 0; i < ds.n_cols(); ++i)
    for (std::size_t j = 0; j < 2; ++j) components(i, j) = svd.v(i, j);
  return components;
}

inline Embedding2D pca_2d(const LabeledDataset& ds) {
  if (ds.n_rows() < 3) throw std::runtime_error("pca_2d: need at least 3 rows");
  if (ds.n_cols() < 2) throw std::runtime_error("pca_2d: need at least 2 columns");
  const Matrix x = detail::centered_features(ds);
  SvdResult svd = jacobi_svd(x);
  double total = 0.0;
  for (const double s : svd.sigma) total += s * s;
  if (total == 0.0)
    throw std::runtime_error("pca_2d: degenerate input (all rows identical)");
  detail::fix_component_signs(svd.v, &svd.u, 2);

  Embedding2D e;
  e.method = DimRedMethod::PCA;
  e.labels = ds.labels;
  e.points = Matrix(ds.n_rows(), 2);
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    for (std::size_t j = 0; j < 2; ++j) e.points(r, j) = svd.u(r, j) * svd.sigma[j];
  e.diagnostics["explained_variance_1"] = svd.sigma[0] * svd.sigma[0] / total;
  e.diagnostics["explained_variance_2"] =
      svd.sigma.size() > 1 ? svd.sigma[1] * svd.sigma[1] / total : 0.0;
  return e;
}

// Rank-2 factorization of the raw, uncentered matrix: points = U_2 S_2. The
// deliberate contrast with PCA is that a constant shift of the data moves
// this embedding.
inline Embedding2D truncated_svd_2d(const LabeledDataset& ds) {
  if (ds.n_rows() < 3) throw std::runtime_error("truncated_svd_2d: need at least 3 rows");
  SvdResult svd = jacobi_svd(ds.features);
  if (svd.sigma[0] == 0.0)
    throw std::runtime_error("truncated_svd_2d: degenerate all-zero matrix");
  detail::fix_component_signs(svd.v, &svd.u, std::min<std::size_t>(2, svd.sigma.size()));

  Embedding2D e;
  e.method = DimRedMethod::TruncatedSVD;
  e.labels = ds.labels;
  e.points = Matrix(ds.n_rows(), 2);
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    for (std::size_t j = 0; j < 2 && j < svd.sigma.size(); ++j)
      e.points(r, j) = svd.u(r, j) * svd.sigma[j];
  e.diagnostics["singular_value_1"] = svd.sigma[0];
  e.diagnostics["singular_value_2"] = svd.sigma.size() > 1 ? svd.sigma[1] : 0.0;
  return e;
}

inline std::string embedding_to_csv(const Embedding2D& e) {
  std::string out = "x,y,label\n";
  for (std::size_t r = 0; r < e.points.rows(); ++r) {
    out += format_double(e.points(r, 0));
    out += ',';
    out += format_double(e.points(r, 1));
    out += ',';
    out += std::to_string(e.labels[r]);
    out += '\n';
  }
  return out;
}

}  // namespace fraudbench
