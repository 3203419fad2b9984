#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fraudbench/matrix.hpp"

namespace fraudbench {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Numerically stable softmax over one row: subtract the max before
// exponentiating so exp never overflows.
inline void softmax_row_inplace(std::span<double> row) {
  if (row.empty()) return;
  double mx = row[0];
  for (const double v : row) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : row) v /= sum;
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_row_inplace(out.row(r));
  return out;
}

// Jacobian-vector product of softmax: given probabilities p and upstream
// gradient dp, the input gradient is p .* (dp - sum(p .* dp)).
inline void softmax_row_backward(std::span<const double> probs,
                                 std::span<const double> grad_out,
                                 std::span<double> grad_in) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * grad_out[i];
  for (std::size_t i = 0; i < probs.size(); ++i)
    grad_in[i] = probs[i] * (grad_out[i] - dot);
}

struct LayerNormCache {
  std::vector<double> x_hat;  // normalized pre-affine activations, row-major
  std::vector<double> inv_std;  // one per row
};

// Row-wise layer normalization with learned gain/bias. Uses the population
// variance (divide by the feature count) and eps inside the square root.
inline Matrix layer_norm(const Matrix& x, std::span<const double> gain,
                         std::span<const double> bias, double eps,
                         LayerNormCache* cache = nullptr) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d)
    throw std::invalid_argument("layer_norm: parameter length mismatch");
  Matrix out(x.rows(), d);
  if (cache) {
    cache->x_hat.assign(x.rows() * d, 0.0);
    cache->inv_std.assign(x.rows(), 0.0);
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double mean = 0.0;
    for (const double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (const double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    const auto o = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (in[c] - mean) * inv_std;
      if (cache) cache->x_hat[r * d + c] = xh;
      o[c] = gain[c] * xh + bias[c];
    }
    if (cache) cache->inv_std[r] = inv_std;
  }
  return out;
}

// Backward pass matching layer_norm above. Accumulates parameter gradients
// into d_gain/d_bias and returns the input gradient.
inline Matrix layer_norm_backward(const Matrix& grad_out, const LayerNormCache& cache,
                                  std::span<const double> gain,
                                  std::span<double> d_gain, std::span<double> d_bias) {
  const std::size_t n = grad_out.rows();
  const std::size_t d = grad_out.cols();
  Matrix grad_in(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto go = grad_out.row(r);
    const double* xh = cache.x_hat.data() + r * d;
    const double inv_std = cache.inv_std[r];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dxhat = go[c] * gain[c];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xh[c];
      d_gain[c] += go[c] * xh[c];
      d_bias[c] += go[c];
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    const auto gi = grad_in.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dxhat = go[c] * gain[c];
      gi[c] = inv_std * (dxhat - inv_d * sum_dxhat - inv_d * xh[c] * sum_dxhat_xhat);
    }
  }
  return grad_in;
}

// Mean cross-entropy of integer labels against raw logits, evaluated via the
// log-sum-exp identity so small probabilities never underflow a log.
inline double cross_entropy_from_logits(const Matrix& logits,
                                        std::span<const int> labels) {
  if (logits.rows() != labels.size())
    throw std::invalid_argument("cross_entropy: label count mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= z.size())
      throw std::invalid_argument("cross_entropy: label out of range");
    double mx = z[0];
    for (const double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (const double v : z) sum += std::exp(v - mx);
    total += mx + std::log(sum) - z[static_cast<std::size_t>(y)];
  }
  return total / static_cast<double>(logits.rows());
}

inline double sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow for large |z|.
inline double log1p_exp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty range");
  double s = 0.0;
  for (const double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

// Population standard deviation (divide by n).
inline double stddev_population(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (const double v : xs) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace fraudbench
