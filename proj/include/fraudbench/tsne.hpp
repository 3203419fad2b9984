#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraudbench/dataset.hpp"
#include "fraudbench/dimred.hpp"
#include "fraudbench/matrix.hpp"
#include "fraudbench/ops.hpp"
#include "fraudbench/rng.hpp"

namespace fraudbench {

enum class TsneInit { RandomGaussian, PcaInit };

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t n_iter = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  std::uint64_t seed = 42;
  TsneInit init = TsneInit::RandomGaussian;
};

inline Matrix pairwise_sq_dists(const Matrix& x) {
  const std::size_t n = x.rows();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      const auto xi = x.row(i);
      const auto xj = x.row(j);
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double diff = xi[c] - xj[c];
        s += diff * diff;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

// Row-stochastic conditional affinities: each row's Gaussian bandwidth is
// found by bisection so the row's entropy hits ln(perplexity). The tolerance
// is far tighter than the reported guarantee (perplexity within 1e-3) needs,
// because entropy error amplifies by a factor of the perplexity itself.
inline Matrix tsne_conditional(const Matrix& x, double perplexity) {
  const std::size_t n = x.rows();
  if (n < 2) throw std::runtime_error("tsne affinities: need at least 2 rows");
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(n - 1))
    throw std::runtime_error("tsne affinities: perplexity must lie in (0, n-1)");

  const Matrix d = pairwise_sq_dists(x);
  const double target_entropy = std::log(perplexity);
  Matrix p(n, n);

  std::vector<double> probs(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Shift distances by the row minimum; the conditional distribution is
    // invariant and exp() stays in range.
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, d(i, j));

    double beta = 1.0;
    double beta_lo = -std::numeric_limits<double>::infinity();
    double beta_hi = std::numeric_limits<double>::infinity();
    double sum_p = 0.0;
    for (int it = 0; it < 200; ++it) {
      sum_p = 0.0;
      double sum_dp = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          probs[j] = 0.0;
          continue;
        }
        const double shifted = d(i, j) - dmin;
        const double e = std::exp(-beta * shifted);
        probs[j] = e;
        sum_p += e;
        sum_dp += shifted * e;
      }
      const double entropy = std::log(sum_p) + beta * sum_dp / sum_p;
      const double diff = entropy - target_entropy;
      if (std::abs(diff) < 1e-8) break;
      if (diff > 0.0) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
      } else {
        beta_hi = beta;
        beta = std::isinf(beta_lo) ? beta * 0.5 : 0.5 * (beta + beta_lo);
      }
    }
    for (std::size_t j = 0; j < n; ++j) p(i, j) = probs[j] / sum_p;
  }
  return p;
}

// Symmetrized joint affinities: (P + P^T) / 2n. Entries are non-negative and
// sum to 1 because every conditional row is exactly normalized.
inline Matrix tsne_affinities(const Matrix& x, double perplexity) {
  Matrix p = tsne_conditional(x, perplexity);
  const std::size_t n = p.rows();
  Matrix joint(n, n);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) joint(i, j) = (p(i, j) + p(j, i)) * scale;
  return joint;
}

namespace detail {

inline double tsne_kl(const Matrix& p, const Matrix& y) {
  const std::size_t n = p.rows();
  double sum_q = 0.0;
  Matrix qnum(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      const double q = 1.0 / (1.0 + dx * dx + dy * dy);
      qnum(i, j) = q;
      qnum(j, i) = q;
      sum_q += 2.0 * q;
    }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij <= 0.0) continue;
      const double qij = std::max(qnum(i, j) / sum_q, 1e-12);
      kl += pij * std::log(pij / qij);
    }
  return kl;
}

}  // namespace detail

// Exact (quadratic) embedding into 2 dimensions: Student-t(1) kernel in the
// embedding space, gradient descent with per-coordinate adaptive gains,
// momentum 0.5 for the first 250 iterations and 0.8 afterwards, and early
// exaggeration of the attractive forces for the first exaggeration_iters
// iterations. The embedding is re-centered every iteration.
inline Embedding2D tsne_2d(const LabeledDataset& ds, const TsneConfig& cfg = {}) {
  const std::size_t n = ds.n_rows();
  if (n < 10) throw std::runtime_error("tsne_2d: need at least 10 rows");
  if (!(cfg.perplexity > 0.0) ||
      cfg.perplexity >= static_cast<double>(n - 1) / 3.0)
    throw std::runtime_error("tsne_2d: perplexity must be below (n-1)/3 = " +
                             format_double(static_cast<double>(n - 1) / 3.0));
  if (cfg.exaggeration_iters > cfg.n_iter)
    throw std::invalid_argument("tsne_2d: exaggeration_iters exceeds n_iter");
  if (!(cfg.learning_rate > 0.0))
    throw std::invalid_argument("tsne_2d: learning_rate must be positive");
  if (!(cfg.early_exaggeration >= 1.0))
    throw std::invalid_argument("tsne_2d: early_exaggeration must be at least 1");

  Matrix p = tsne_affinities(ds.features, cfg.perplexity);
  for (double& v : p.data()) v *= cfg.early_exaggeration;
  bool exaggerated = true;

  Matrix y(n, 2);
  Rng rng(cfg.seed);
  if (cfg.init == TsneInit::RandomGaussian) {
    for (double& v : y.data()) v = rng.normal(0.0, 1e-4);
  } else {
    const Embedding2D pca = pca_2d(ds);
    y = pca.points;
    std::vector<double> col0(n);
    for (std::size_t r = 0; r < n; ++r) col0[r] = y(r, 0);
    const double sd = stddev_population(col0);
    const double scale = sd > 0.0 ? 1e-4 / sd : 1.0;
    for (double& v : y.data()) v *= scale;
  }

  Matrix inc(n, 2, 0.0);
  Matrix gains(n, 2, 1.0);
  Matrix grad(n, 2);
  Matrix qnum(n, n);
  double kl_after_exaggeration = 0.0;

  for (std::size_t iter = 0; iter < cfg.n_iter; ++iter) {
    if (exaggerated && iter == cfg.exaggeration_iters) {
      for (double& v : p.data()) v /= cfg.early_exaggeration;
      exaggerated = false;
      kl_after_exaggeration = detail::tsne_kl(p, y);
    }
    const double momentum = iter < 250 ? 0.5 : 0.8;

    double sum_q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        qnum(i, j) = q;
        qnum(j, i) = q;
        sum_q += 2.0 * q;
      }

    for (double& v : grad.data()) v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double q = qnum(i, j);
        const double mult = (p(i, j) - q / sum_q) * q;
        const double gx = mult * (y(i, 0) - y(j, 0));
        const double gy = mult * (y(i, 1) - y(j, 1));
        grad(i, 0) += gx;
        grad(i, 1) += gy;
        grad(j, 0) -= gx;
        grad(j, 1) -= gy;
      }

    const auto sgn = [](double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
    for (std::size_t e = 0; e < y.size(); ++e) {
      const double g = grad.data()[e];
      const double u = inc.data()[e];
      const bool opposite = sgn(g) != sgn(u);
      double& gain = gains.data()[e];
      gain = opposite ? gain + 0.2 : gain * 0.8;
      gain = std::max(gain, 0.1);
      inc.data()[e] = momentum * u - cfg.learning_rate * gain * g;
      y.data()[e] += inc.data()[e];
    }

    double mx = 0.0, my = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      mx += y(r, 0);
      my += y(r, 1);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      y(r, 0) -= mx;
      y(r, 1) -= my;
    }

    if (!y.all_finite())
      throw std::runtime_error("tsne_2d: non-finite gradient update at iteration " +
                               std::to_string(iter));
  }

  if (exaggerated) {
    for (double& v : p.data()) v /= cfg.early_exaggeration;
    kl_after_exaggeration = detail::tsne_kl(p, y);
  }

  Embedding2D e;
  e.method = DimRedMethod::TSNE;
  e.labels = ds.labels;
  e.points = std::move(y);
  e.diagnostics["final_kl"] = detail::tsne_kl(p, e.points);
  e.diagnostics["kl_after_exaggeration"] = kl_after_exaggeration;
  return e;
}

}  // namespace fraudbench
