#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fraudbench/adam.hpp"
#include "fraudbench/binio.hpp"
#include "fraudbench/dataset.hpp"
#include "fraudbench/matrix.hpp"
#include "fraudbench/ops.hpp"
#include "fraudbench/rng.hpp"

namespace fraudbench {

// Common face of every model the benchmark compares. A fitted classifier is
// immutable; score is a monotone fraud score (probability or margin) and
// predict thresholds it.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string name() const = 0;
  virtual void fit(const LabeledDataset& train, std::uint64_t seed) = 0;
  virtual double score(std::span<const double> row) const = 0;
  virtual void save(const std::string& path) const = 0;

  // 0.5 for probabilistic scores; margin models override with 0.
  virtual double threshold() const { return 0.5; }

  // Whether the pipeline should z-score inputs for this model when the run
  // leaves the choice to per-model defaults.
  virtual bool standardize_by_default() const { return true; }

  int predict(std::span<const double> row) const {
    return score(row) >= threshold() ? 1 : 0;
  }

  std::vector<double> score_rows(const LabeledDataset& ds) const {
    std::vector<double> out(ds.n_rows());
    for (std::size_t r = 0; r < ds.n_rows(); ++r) out[r] = score(ds.features.row(r));
    return out;
  }
};

namespace detail {

inline void require_both_classes(const LabeledDataset& ds, const char* what) {
  const auto counts = class_counts(ds);
  if (counts.n_fraud == 0 || counts.n_legit == 0)
    throw std::runtime_error(std::string(what) + ": dataset must contain both classes");
}

inline double dot_with(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression: sigmoid(w.x + b), cross-entropy + ridge on w, Adam.

struct LogisticModel {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> loss_curve;
};

inline TrainConfig logistic_default_config() {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.learning_rate = 1e-2;
  return cfg;
}

inline double logistic_score(const LogisticModel& m, std::span<const double> row) {
  if (row.size() != m.w.size())
    throw std::invalid_argument("logistic: row length does not match the model");
  return sigmoid(detail::dot_with(m.w, row) + m.b);
}

inline LogisticModel logistic_fit(const LabeledDataset& ds, const TrainConfig& cfg) {
  validate(ds);
  detail::require_both_classes(ds, "logistic");
  const std::size_t n = ds.n_rows();
  const std::size_t dim = ds.n_cols();

  // theta = [w..., b]; starts at zero so the untrained score is exactly 0.5.
  std::vector<double> theta(dim + 1, 0.0);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(theta.size(), adam_cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  LogisticModel model;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch)
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      std::vector<double> grad(theta.size(), 0.0);
      double loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto x = ds.features.row(order[i]);
        const double y = static_cast<double>(ds.labels[order[i]]);
        const double z = detail::dot_with({theta.data(), dim}, x) + theta[dim];
        loss += inv * (log1p_exp(z) - y * z);
        const double g = inv * (sigmoid(z) - y);
        for (std::size_t j = 0; j < dim; ++j) grad[j] += g * x[j];
        grad[dim] += g;
      }
      if (cfg.l2 > 0.0) {
        double sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          sq += theta[j] * theta[j];
          grad[j] += cfg.l2 * theta[j];
        }
        loss += 0.5 * cfg.l2 * sq;
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("logistic: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(stop - start);
      adam.step(theta, grad);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  model.w.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
  model.b = theta[dim];
  return model;
}

// ---------------------------------------------------------------------------
// K-nearest neighbors: score = fraud fraction among the k closest training
// rows, Euclidean metric, distance ties broken by lower training-row index.

struct KnnModel {
  Matrix features;
  std::vector<int> labels;
  std::size_t k = 5;
};

inline KnnModel knn_fit(const LabeledDataset& ds, std::size_t k = 5) {
  validate(ds);
  if (ds.n_rows() == 0) throw std::invalid_argument("knn: empty training set");
  if (k == 0 || k > ds.n_rows())
    throw std::invalid_argument("knn: k must satisfy 1 <= k <= training size");
  return {ds.features, ds.labels, k};
}

inline double knn_score(const KnnModel& m, std::span<const double> row) {
  if (row.size() != m.features.cols())
    throw std::invalid_argument("knn: row length does not match the model");
  std::vector<std::pair<double, std::size_t>> dist(m.features.rows());
  for (std::size_t r = 0; r < m.features.rows(); ++r) {
    const auto t = m.features.row(r);
    double d2 = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const double d = t[c] - row[c];
      d2 += d * d;
    }
    dist[r] = {d2, r};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m.k),
                    dist.end());
  std::size_t fraud = 0;
  for (std::size_t i = 0; i < m.k; ++i) fraud += m.labels[dist[i].second] == 1;
  return static_cast<double>(fraud) / static_cast<double>(m.k);
}

// ---------------------------------------------------------------------------
// Linear SVM: mean hinge loss + (l2/2)||w||^2 by Adam on the sub-gradient.
// The score is the raw signed margin, thresholded at 0.

struct SvmModel {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> loss_curve;
};

inline TrainConfig svm_default_config() {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.learning_rate = 1e-2;
  cfg.l2 = 1e-3;
  return cfg;
}

inline double svm_score(const SvmModel& m, std::span<const double> row) {
  if (row.size() != m.w.size())
    throw std::invalid_argument("svm: row length does not match the model");
  return detail::dot_with(m.w, row) + m.b;
}

inline SvmModel svm_fit(const LabeledDataset& ds, const TrainConfig& cfg) {
  validate(ds);
  detail::require_both_classes(ds, "svm");
  const std::size_t n = ds.n_rows();
  const std::size_t dim = ds.n_cols();

  std::vector<double> theta(dim + 1, 0.0);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(theta.size(), adam_cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  SvmModel model;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch)
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      std::vector<double> grad(theta.size(), 0.0);
      double loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto x = ds.features.row(order[i]);
        const double y = ds.labels[order[i]] == 1 ? 1.0 : -1.0;
        const double margin = y * (detail::dot_with({theta.data(), dim}, x) + theta[dim]);
        if (margin < 1.0) {
          loss += inv * (1.0 - margin);
          for (std::size_t j = 0; j < dim; ++j) grad[j] -= inv * y * x[j];
          grad[dim] -= inv * y;
        }
      }
      double sq = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        sq += theta[j] * theta[j];
        grad[j] += cfg.l2 * theta[j];
      }
      loss += 0.5 * cfg.l2 * sq;
      if (!std::isfinite(loss))
        throw std::runtime_error("svm: non-finite loss at epoch " +
                                 std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(stop - start);
      adam.step(theta, grad);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  model.w.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
  model.b = theta[dim];
  return model;
}

// ---------------------------------------------------------------------------
// CART decision tree with Gini impurity. Splits scan every feature and every
// midpoint between consecutive distinct sorted values; the lowest-index
// feature and lowest threshold win ties via strict-improvement scanning.

struct TreeNode {
  std::array<double, 2> probs{};  // leaf class probabilities, sum to 1
  std::size_t feature = 0;
  double threshold = 0.0;
  std::unique_ptr<TreeNode> left, right;

  bool is_leaf() const { return left == nullptr; }
};

struct TreeConfig {
  std::size_t max_depth = 8;
  std::size_t min_samples_split = 2;
};

struct TreeModel {
  std::unique_ptr<TreeNode> root;
  TreeConfig config;
};

namespace detail {

inline double gini_pair(std::size_t n0, std::size_t n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(n0) / n;
  const double p1 = static_cast<double>(n1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double weighted_gini = 0.0;
};

// Best (feature, midpoint) by weighted child Gini over the given rows.
// Features ascending, thresholds ascending, strict improvement only: the
// first optimum encountered wins, which realizes the documented tie-breaks.
inline SplitChoice best_split(const LabeledDataset& ds,
                              const std::vector<std::size_t>& rows) {
  SplitChoice best;
  const std::size_t n = rows.size();
  std::vector<std::pair<double, int>> vals(n);
  for (std::size_t f = 0; f < ds.n_cols(); ++f) {
    for (std::size_t i = 0; i < n; ++i)
      vals[i] = {ds.features(rows[i], f), ds.labels[rows[i]]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::size_t total1 = 0;
    for (const auto& [v, y] : vals) total1 += y == 1;
    const std::size_t total0 = n - total1;

    std::size_t left0 = 0, left1 = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const auto& [pv, py] = vals[i - 1];
      left0 += py == 0;
      left1 += py == 1;
      if (!(vals[i].first > pv)) continue;
      const double mid = pv + (vals[i].first - pv) / 2.0;
      if (!(mid > pv)) continue;  // midpoint rounded onto the left value
      const double wg =
          (static_cast<double>(i) * gini_pair(left0, left1) +
           static_cast<double>(n - i) * gini_pair(total0 - left0, total1 - left1)) /
          static_cast<double>(n);
      if (!best.found || wg < best.weighted_gini) {
        best = {true, f, mid, wg};
      }
    }
  }
  return best;
}

inline std::unique_ptr<TreeNode> build_tree(const LabeledDataset& ds,
                                            const std::vector<std::size_t>& rows,
                                            std::size_t depth, const TreeConfig& cfg) {
  auto node = std::make_unique<TreeNode>();
  std::size_t n1 = 0;
  for (const std::size_t r : rows) n1 += ds.labels[r] == 1;
  const std::size_t n0 = rows.size() - n1;
  node->probs = {static_cast<double>(n0) / static_cast<double>(rows.size()),
                 static_cast<double>(n1) / static_cast<double>(rows.size())};

  if (n0 == 0 || n1 == 0 || depth >= cfg.max_depth ||
      rows.size() < cfg.min_samples_split)
    return node;
  const SplitChoice split = best_split(ds, rows);
  if (!split.found) return node;  // all features constant within the node

  std::vector<std::size_t> left_rows, right_rows;
  for (const std::size_t r : rows) {
    if (ds.features(r, split.feature) < split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  node->feature = split.feature;
  node->threshold = split.threshold;
  node->left = build_tree(ds, left_rows, depth + 1, cfg);
  node->right = build_tree(ds, right_rows, depth + 1, cfg);
  return node;
}

}  // namespace detail

inline TreeModel tree_fit(const LabeledDataset& ds, const TreeConfig& cfg = {}) {
  validate(ds);
  if (ds.n_rows() == 0) throw std::invalid_argument("tree: empty training set");
  std::vector<std::size_t> rows(ds.n_rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  TreeModel model;
  model.config = cfg;
  model.root = detail::build_tree(ds, rows, 0, cfg);
  return model;
}

inline double tree_score(const TreeModel& m, std::span<const double> row) {
  const TreeNode* node = m.root.get();
  if (!node) throw std::logic_error("tree: model is empty");
  while (!node->is_leaf()) {
    if (node->feature >= row.size())
      throw std::invalid_argument("tree: row length does not match the model");
    node = row[node->feature] < node->threshold ? node->left.get() : node->right.get();
  }
  return node->probs[1];
}

// ---------------------------------------------------------------------------
// MLP: fixed input -> 32 -> 16 -> 2 architecture, ReLU, softmax + mean
// cross-entropy, Adam. Same parameter-visitor pattern as the transformer.

constexpr std::size_t kMlpHidden1 = 32;
constexpr std::size_t kMlpHidden2 = 16;

struct MlpParams {
  std::size_t in_dim = 0;
  Matrix w1, b1;  // in x 32, 1 x 32
  Matrix w2, b2;  // 32 x 16, 1 x 16
  Matrix w3, b3;  // 16 x 2,  1 x 2
};

template <class Params, class Fn>
void visit_mlp_tensors(Params& p, Fn&& fn) {
  fn("w1", p.w1);
  fn("b1", p.b1);
  fn("w2", p.w2);
  fn("b2", p.b2);
  fn("w3", p.w3);
  fn("b3", p.b3);
}

inline MlpParams zero_mlp(std::size_t in_dim) {
  if (in_dim == 0) throw std::invalid_argument("mlp: input dimension must be positive");
  MlpParams p;
  p.in_dim = in_dim;
  p.w1 = Matrix(in_dim, kMlpHidden1);
  p.b1 = Matrix(1, kMlpHidden1);
  p.w2 = Matrix(kMlpHidden1, kMlpHidden2);
  p.b2 = Matrix(1, kMlpHidden2);
  p.w3 = Matrix(kMlpHidden2, 2);
  p.b3 = Matrix(1, 2);
  return p;
}

inline MlpParams init_mlp(std::size_t in_dim, std::uint64_t seed) {
  MlpParams p = zero_mlp(in_dim);
  Rng rng(seed);
  const auto xavier = [&rng](Matrix& m, std::size_t fi, std::size_t fo) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fi + fo));
    for (double& v : m.data()) v = rng.uniform(-limit, limit);
  };
  xavier(p.w1, in_dim, kMlpHidden1);
  xavier(p.w2, kMlpHidden1, kMlpHidden2);
  xavier(p.w3, kMlpHidden2, 2);
  return p;
}

inline std::vector<double> flatten_mlp(const MlpParams& p) {
  std::vector<double> out;
  visit_mlp_tensors(p, [&](const std::string&, const Matrix& m) {
    out.insert(out.end(), m.data().begin(), m.data().end());
  });
  return out;
}

inline MlpParams unflatten_mlp(std::size_t in_dim, std::span<const double> theta) {
  MlpParams p = zero_mlp(in_dim);
  std::size_t at = 0;
  visit_mlp_tensors(p, [&](const std::string&, Matrix& m) {
    if (at + m.size() > theta.size())
      throw std::invalid_argument("mlp: parameter vector too short");
    std::copy(theta.begin() + at, theta.begin() + at + m.size(), m.data().begin());
    at += m.size();
  });
  if (at != theta.size())
    throw std::invalid_argument("mlp: parameter vector length mismatch");
  return p;
}

namespace detail {

struct MlpBatchCache {
  Matrix pre1, act1;  // batch x 32
  Matrix pre2, act2;  // batch x 16
  Matrix logits;      // batch x 2
};

inline Matrix mlp_logits(const MlpParams& p, const Matrix& xb,
                         MlpBatchCache* cache = nullptr) {
  if (xb.cols() != p.in_dim)
    throw std::invalid_argument("mlp: row length does not match the model");
  Matrix pre1 = matmul(xb, p.w1);
  add_row_broadcast(pre1, p.b1);
  Matrix act1 = pre1;
  for (double& v : act1.data()) v = relu(v);
  Matrix pre2 = matmul(act1, p.w2);
  add_row_broadcast(pre2, p.b2);
  Matrix act2 = pre2;
  for (double& v : act2.data()) v = relu(v);
  Matrix logits = matmul(act2, p.w3);
  add_row_broadcast(logits, p.b3);
  if (cache) {
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->pre2 = std::move(pre2);
    cache->act2 = std::move(act2);
    cache->logits = logits;
  }
  return logits;
}

}  // namespace detail

inline double mlp_loss(const MlpParams& p, const Matrix& xb, std::span<const int> yb,
                       double l2 = 0.0) {
  const Matrix logits = detail::mlp_logits(p, xb);
  double loss = cross_entropy_from_logits(logits, yb);
  if (l2 > 0.0) {
    double sq = 0.0;
    visit_mlp_tensors(p, [&](const std::string&, const Matrix& m) {
      for (const double v : m.data()) sq += v * v;
    });
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

inline double mlp_loss_and_grad(const MlpParams& p, const Matrix& xb,
                                std::span<const int> yb, double l2, MlpParams& grad) {
  if (xb.rows() != yb.size())
    throw std::invalid_argument("mlp: batch size mismatch");
  detail::MlpBatchCache cache;
  const Matrix logits = detail::mlp_logits(p, xb, &cache);
  double loss = cross_entropy_from_logits(logits, yb);

  const double inv = 1.0 / static_cast<double>(xb.rows());
  Matrix dlogits = softmax_rows(logits);
  for (std::size_t r = 0; r < xb.rows(); ++r) {
    dlogits(r, static_cast<std::size_t>(yb[r])) -= 1.0;
    for (std::size_t c = 0; c < 2; ++c) dlogits(r, c) *= inv;
  }

  detail::add_inplace(grad.w3, matmul(transpose(cache.act2), dlogits));
  for (std::size_t r = 0; r < xb.rows(); ++r)
    for (std::size_t c = 0; c < 2; ++c) grad.b3(0, c) += dlogits(r, c);
  Matrix d2 = matmul(dlogits, transpose(p.w3));
  for (std::size_t i = 0; i < d2.size(); ++i)
    if (cache.pre2.data()[i] <= 0.0) d2.data()[i] = 0.0;

  detail::add_inplace(grad.w2, matmul(transpose(cache.act1), d2));
  for (std::size_t r = 0; r < xb.rows(); ++r)
    for (std::size_t c = 0; c < kMlpHidden2; ++c) grad.b2(0, c) += d2(r, c);
  Matrix d1 = matmul(d2, transpose(p.w2));
  for (std::size_t i = 0; i < d1.size(); ++i)
    if (cache.pre1.data()[i] <= 0.0) d1.data()[i] = 0.0;

  detail::add_inplace(grad.w1, matmul(transpose(xb), d1));
  for (std::size_t r = 0; r < xb.rows(); ++r)
    for (std::size_t c = 0; c < kMlpHidden1; ++c) grad.b1(0, c) += d1(r, c);

  if (l2 > 0.0) {
    const std::vector<double> gp = flatten_mlp(p);
    std::vector<double> gg = flatten_mlp(grad);
    double sq = 0.0;
    for (const double v : gp) sq += v * v;
    loss += 0.5 * l2 * sq;
    for (std::size_t i = 0; i < gg.size(); ++i) gg[i] += l2 * gp[i];
    grad = unflatten_mlp(p.in_dim, gg);
  }
  return loss;
}

struct TrainedMlp {
  MlpParams params;
  std::vector<double> loss_curve;
};

inline TrainConfig mlp_default_config() {
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.learning_rate = 1e-3;
  return cfg;
}

inline TrainedMlp mlp_fit(const LabeledDataset& ds, const TrainConfig& cfg) {
  validate(ds);
  detail::require_both_classes(ds, "mlp");
  const std::size_t n = ds.n_rows();

  TrainedMlp out;
  out.params = init_mlp(ds.n_cols(), derive_seed(cfg.seed, "init"));
  std::vector<double> theta = flatten_mlp(out.params);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(theta.size(), adam_cfg);
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle_each_epoch)
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      Matrix xb(stop - start, ds.n_cols());
      std::vector<int> yb(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto src = ds.features.row(order[i]);
        std::copy(src.begin(), src.end(), xb.row(i - start).begin());
        yb[i - start] = ds.labels[order[i]];
      }
      const MlpParams params = unflatten_mlp(ds.n_cols(), theta);
      MlpParams grad = zero_mlp(ds.n_cols());
      const double loss = mlp_loss_and_grad(params, xb, yb, cfg.l2, grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("mlp: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index));
      epoch_loss += loss * static_cast<double>(stop - start);
      adam.step(theta, flatten_mlp(grad));
    }
    out.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  out.params = unflatten_mlp(ds.n_cols(), theta);
  return out;
}

inline double mlp_score(const MlpParams& p, std::span<const double> row) {
  Matrix xb(1, row.size());
  std::copy(row.begin(), row.end(), xb.row(0).begin());
  Matrix logits = detail::mlp_logits(p, xb);
  softmax_row_inplace(logits.row(0));
  return logits(0, 1);
}

// ---------------------------------------------------------------------------
// Serialization: magic "FBBL", format version, model-kind tag, then a
// per-kind payload. Mirrors the transformer file discipline (strict reads,
// trailing bytes rejected).

constexpr std::uint32_t kBaselineFormatVersion = 1;

enum class BaselineKind : std::uint32_t {
  Logistic = 1,
  Knn = 2,
  Svm = 3,
  Tree = 4,
  Mlp = 5,
};

namespace detail {

inline std::ofstream open_baseline_out(const std::string& path, BaselineKind kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write("FBBL", 4);
  write_u32(out, kBaselineFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(kind));
  return out;
}

inline void write_linear(std::ostream& out, std::span<const double> w, double b) {
  write_u32(out, static_cast<std::uint32_t>(w.size()));
  write_f64(out, b);
  for (const double v : w) write_f64(out, v);
}

inline void read_linear(std::istream& in, std::vector<double>& w, double& b,
                        const char* what) {
  const std::uint32_t dim = read_u32(in, what);
  b = read_f64(in, what);
  w.resize(dim);
  for (double& v : w) v = read_f64(in, what);
}

inline void write_tree_node(std::ostream& out, const TreeNode& node) {
  if (node.is_leaf()) {
    write_u8(out, 0);
    write_f64(out, node.probs[0]);
    write_f64(out, node.probs[1]);
    return;
  }
  write_u8(out, 1);
  write_u32(out, static_cast<std::uint32_t>(node.feature));
  write_f64(out, node.threshold);
  write_tree_node(out, *node.left);
  write_tree_node(out, *node.right);
}

inline std::unique_ptr<TreeNode> read_tree_node(std::istream& in) {
  auto node = std::make_unique<TreeNode>();
  const std::uint8_t tag = read_u8(in, "tree node tag");
  if (tag == 0) {
    node->probs[0] = read_f64(in, "leaf probability");
    node->probs[1] = read_f64(in, "leaf probability");
    return node;
  }
  if (tag != 1) throw std::runtime_error("model file has an unknown tree node tag");
  node->feature = read_u32(in, "split feature");
  node->threshold = read_f64(in, "split threshold");
  node->left = read_tree_node(in);
  node->right = read_tree_node(in);
  return node;
}

inline void expect_eof(std::istream& in, const std::string& path) {
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("model file '" + path + "' has trailing bytes");
}

}  // namespace detail

inline void save_baseline(const LogisticModel& m, const std::string& path) {
  auto out = detail::open_baseline_out(path, BaselineKind::Logistic);
  detail::write_linear(out, m.w, m.b);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void save_baseline(const SvmModel& m, const std::string& path) {
  auto out = detail::open_baseline_out(path, BaselineKind::Svm);
  detail::write_linear(out, m.w, m.b);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void save_baseline(const KnnModel& m, const std::string& path) {
  auto out = detail::open_baseline_out(path, BaselineKind::Knn);
  detail::write_u32(out, static_cast<std::uint32_t>(m.k));
  detail::write_u32(out, static_cast<std::uint32_t>(m.features.rows()));
  detail::write_u32(out, static_cast<std::uint32_t>(m.features.cols()));
  for (const int y : m.labels) detail::write_u8(out, static_cast<std::uint8_t>(y));
  for (const double v : m.features.data()) detail::write_f64(out, v);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void save_baseline(const TreeModel& m, const std::string& path) {
  auto out = detail::open_baseline_out(path, BaselineKind::Tree);
  detail::write_u32(out, static_cast<std::uint32_t>(m.config.max_depth));
  detail::write_u32(out, static_cast<std::uint32_t>(m.config.min_samples_split));
  detail::write_tree_node(out, *m.root);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void save_baseline(const MlpParams& m, const std::string& path) {
  auto out = detail::open_baseline_out(path, BaselineKind::Mlp);
  detail::write_u32(out, static_cast<std::uint32_t>(m.in_dim));
  visit_mlp_tensors(m, [&](const std::string&, const Matrix& t) {
    detail::write_u32(out, static_cast<std::uint32_t>(t.rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (const double v : t.data()) detail::write_f64(out, v);
  });
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Classifier adapters.

class LogisticClassifier final : public Classifier {
 public:
  explicit LogisticClassifier(TrainConfig cfg = logistic_default_config())
      : cfg_(cfg) {}
  explicit LogisticClassifier(LogisticModel m) : model_(std::move(m)) {}

  std::string name() const override { return "logistic"; }
  bool standardize_by_default() const override { return false; }
  void fit(const LabeledDataset& train, std::uint64_t seed) override {
    cfg_.seed = seed;
    model_ = logistic_fit(train, cfg_);
  }
  double score(std::span<const double> row) const override {
    return logistic_score(model_, row);
  }
  void save(const std::string& path) const override { save_baseline(model_, path); }
  const LogisticModel& model() const { return model_; }

 private:
  TrainConfig cfg_ = logistic_default_config();
  LogisticModel model_;
};

class KnnClassifier final : public Classifier {
 public:
  explicit KnnClassifier(std::size_t k = 5) { model_.k = k; }
  explicit KnnClassifier(KnnModel m) : model_(std::move(m)) {}

  std::string name() const override { return "knn"; }
  void fit(const LabeledDataset& train, std::uint64_t) override {
    model_ = knn_fit(train, model_.k);
  }
  double score(std::span<const double> row) const override {
    return knn_score(model_, row);
  }
  void save(const std::string& path) const override { save_baseline(model_, path); }
  const KnnModel& model() const { return model_; }

 private:
  KnnModel model_;
};

class SvmClassifier final : public Classifier {
 public:
  explicit SvmClassifier(TrainConfig cfg = svm_default_config()) : cfg_(cfg) {}
  explicit SvmClassifier(SvmModel m) : model_(std::move(m)) {}

  std::string name() const override { return "svm"; }
  double threshold() const override { return 0.0; }
  void fit(const LabeledDataset& train, std::uint64_t seed) override {
    cfg_.seed = seed;
    model_ = svm_fit(train, cfg_);
  }
  double score(std::span<const double> row) const override {
    return svm_score(model_, row);
  }
  void save(const std::string& path) const override { save_baseline(model_, path); }
  const SvmModel& model() const { return model_; }

 private:
  TrainConfig cfg_ = svm_default_config();
  SvmModel model_;
};

class TreeClassifier final : public Classifier {
 public:
  explicit TreeClassifier(TreeConfig cfg = {}) : cfg_(cfg) {}
  explicit TreeClassifier(TreeModel m) : cfg_(m.config), model_(std::move(m)) {}

  std::string name() const override { return "tree"; }
  bool standardize_by_default() const override { return false; }
  void fit(const LabeledDataset& train, std::uint64_t) override {
    model_ = tree_fit(train, cfg_);
  }
  double score(std::span<const double> row) const override {
    return tree_score(model_, row);
  }
  void save(const std::string& path) const override { save_baseline(model_, path); }
  const TreeModel& model() const { return model_; }

 private:
  TreeConfig cfg_;
  TreeModel model_;
};

class MlpClassifier final : public Classifier {
 public:
  explicit MlpClassifier(TrainConfig cfg = mlp_default_config()) : cfg_(cfg) {}
  explicit MlpClassifier(MlpParams params) { trained_.params = std::move(params); }

  std::string name() const override { return "mlp"; }
  void fit(const LabeledDataset& train, std::uint64_t seed) override {
    cfg_.seed = seed;
    trained_ = mlp_fit(train, cfg_);
  }
  double score(std::span<const double> row) const override {
    return mlp_score(trained_.params, row);
  }
  void save(const std::string& path) const override {
    save_baseline(trained_.params, path);
  }
  const TrainedMlp& trained() const { return trained_; }

 private:
  TrainConfig cfg_ = mlp_default_config();
  TrainedMlp trained_;
};

inline std::unique_ptr<Classifier> load_baseline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FBBL", 4) != 0)
    throw std::runtime_error("'" + path + "' is not a baseline model file (bad magic)");
  const std::uint32_t version = detail::read_u32(in, "format version");
  if (version != kBaselineFormatVersion)
    throw std::runtime_error("unsupported model format version " +
                             std::to_string(version));
  const std::uint32_t kind = detail::read_u32(in, "model kind");

  std::unique_ptr<Classifier> result;
  switch (static_cast<BaselineKind>(kind)) {
    case BaselineKind::Logistic: {
      LogisticModel m;
      detail::read_linear(in, m.w, m.b, "logistic parameters");
      result = std::make_unique<LogisticClassifier>(std::move(m));
      break;
    }
    case BaselineKind::Svm: {
      SvmModel m;
      detail::read_linear(in, m.w, m.b, "svm parameters");
      result = std::make_unique<SvmClassifier>(std::move(m));
      break;
    }
    case BaselineKind::Knn: {
      KnnModel m;
      m.k = detail::read_u32(in, "k");
      const std::uint32_t rows = detail::read_u32(in, "training rows");
      const std::uint32_t cols = detail::read_u32(in, "training cols");
      m.labels.resize(rows);
      for (int& y : m.labels) y = detail::read_u8(in, "training label");
      m.features = Matrix(rows, cols);
      for (double& v : m.features.data()) v = detail::read_f64(in, "training feature");
      if (m.k == 0 || m.k > rows)
        throw std::runtime_error("model file has an invalid k for its training size");
      result = std::make_unique<KnnClassifier>(std::move(m));
      break;
    }
    case BaselineKind::Tree: {
      TreeModel m;
      m.config.max_depth = detail::read_u32(in, "max depth");
      m.config.min_samples_split = detail::read_u32(in, "min samples split");
      m.root = detail::read_tree_node(in);
      result = std::make_unique<TreeClassifier>(std::move(m));
      break;
    }
    case BaselineKind::Mlp: {
      const std::uint32_t in_dim = detail::read_u32(in, "input dimension");
      MlpParams m = zero_mlp(in_dim);
      visit_mlp_tensors(m, [&](const std::string& tname, Matrix& t) {
        const std::uint32_t r = detail::read_u32(in, tname.c_str());
        const std::uint32_t c = detail::read_u32(in, tname.c_str());
        if (r != t.rows() || c != t.cols())
          throw std::runtime_error("model file tensor '" + tname + "': expected " +
                                   shape_string(t) + ", found " + std::to_string(r) +
                                   "x" + std::to_string(c));
        for (double& v : t.data()) v = detail::read_f64(in, tname.c_str());
      });
      result = std::make_unique<MlpClassifier>(std::move(m));
      break;
    }
    default:
      throw std::runtime_error("model file has an unknown kind tag " +
                               std::to_string(kind));
  }
  detail::expect_eof(in, path);
  return result;
}

}  // namespace fraudbench
