#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
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

struct TransformerHyper {
  std::size_t d_model = 32;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 64;
  double dropout_rate = 0.1;
  std::size_t max_tokens = 0;  // one token per feature; set from the data
  static constexpr std::size_t n_classes = 2;

  std::size_t d_k() const { return d_model / n_heads; }
};

inline void validate(const TransformerHyper& h) {
  if (h.d_model == 0 || h.n_heads == 0 || h.n_layers == 0 || h.d_ff == 0 ||
      h.max_tokens == 0)
    throw std::invalid_argument("transformer: hyperparameters must be positive");
  if (h.d_model % h.n_heads != 0)
    throw std::invalid_argument("transformer: d_model must be divisible by n_heads");
  if (!(h.dropout_rate >= 0.0 && h.dropout_rate < 1.0))
    throw std::invalid_argument("transformer: dropout_rate must lie in [0,1)");
}

// Every tensor is a Matrix; vectors are stored 1 x n so one visitor walks the
// whole parameter set in a fixed canonical order (init, optimizer,
// serialization and gradient layout all share it).
struct EncoderLayerParams {
  Matrix wq, wk, wv, wo;      // d_model x d_model; heads are column blocks
  Matrix ln1_gain, ln1_bias;  // 1 x d_model
  Matrix ffn_w1;              // d_model x d_ff
  Matrix ffn_b1;              // 1 x d_ff
  Matrix ffn_w2;              // d_ff x d_model
  Matrix ffn_b2;              // 1 x d_model
  Matrix ln2_gain, ln2_bias;  // 1 x d_model
};

struct TransformerParams {
  TransformerHyper hyper;
  Matrix embed_w;   // max_tokens x d_model: scalar feature -> token direction
  Matrix embed_b;   // max_tokens x d_model
  Matrix id_embed;  // max_tokens x d_model: which-feature-am-I embedding
  std::vector<EncoderLayerParams> layers;
  Matrix head_w;    // d_model x 2
  Matrix head_b;    // 1 x 2
};

template <class Params, class Fn>
void visit_tensors(Params& p, Fn&& fn) {
  fn("embed_w", p.embed_w);
  fn("embed_b", p.embed_b);
  fn("id_embed", p.id_embed);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& lp = p.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    fn(prefix + "wq", lp.wq);
    fn(prefix + "wk", lp.wk);
    fn(prefix + "wv", lp.wv);
    fn(prefix + "wo", lp.wo);
    fn(prefix + "ln1_gain", lp.ln1_gain);
    fn(prefix + "ln1_bias", lp.ln1_bias);
    fn(prefix + "ffn_w1", lp.ffn_w1);
    fn(prefix + "ffn_b1", lp.ffn_b1);
    fn(prefix + "ffn_w2", lp.ffn_w2);
    fn(prefix + "ffn_b2", lp.ffn_b2);
    fn(prefix + "ln2_gain", lp.ln2_gain);
    fn(prefix + "ln2_bias", lp.ln2_bias);
  }
  fn("head_w", p.head_w);
  fn("head_b", p.head_b);
}

// All-zero parameter set with the shapes implied by hyper. Doubles as the
// gradient accumulator layout.
inline TransformerParams zero_params(const TransformerHyper& h) {
  validate(h);
  TransformerParams p;
  p.hyper = h;
  p.embed_w = Matrix(h.max_tokens, h.d_model);
  p.embed_b = Matrix(h.max_tokens, h.d_model);
  p.id_embed = Matrix(h.max_tokens, h.d_model);
  p.layers.resize(h.n_layers);
  for (auto& lp : p.layers) {
    lp.wq = Matrix(h.d_model, h.d_model);
    lp.wk = Matrix(h.d_model, h.d_model);
    lp.wv = Matrix(h.d_model, h.d_model);
    lp.wo = Matrix(h.d_model, h.d_model);
    lp.ln1_gain = Matrix(1, h.d_model);
    lp.ln1_bias = Matrix(1, h.d_model);
    lp.ffn_w1 = Matrix(h.d_model, h.d_ff);
    lp.ffn_b1 = Matrix(1, h.d_ff);
    lp.ffn_w2 = Matrix(h.d_ff, h.d_model);
    lp.ffn_b2 = Matrix(1, h.d_model);
    lp.ln2_gain = Matrix(1, h.d_model);
    lp.ln2_bias = Matrix(1, h.d_model);
  }
  p.head_w = Matrix(h.d_model, 2);
  p.head_b = Matrix(1, 2);
  return p;
}

inline std::size_t n_params(const TransformerHyper& h) {
  auto p = zero_params(h);
  std::size_t n = 0;
  visit_tensors(p, [&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

inline std::vector<double> flatten(const TransformerParams& p) {
  std::vector<double> out;
  visit_tensors(p, [&](const std::string&, const Matrix& m) {
    out.insert(out.end(), m.data().begin(), m.data().end());
  });
  return out;
}

inline TransformerParams unflatten(const TransformerHyper& h,
                                   std::span<const double> theta) {
  TransformerParams p = zero_params(h);
  std::size_t at = 0;
  visit_tensors(p, [&](const std::string&, Matrix& m) {
    if (at + m.size() > theta.size())
      throw std::invalid_argument("unflatten: parameter vector too short");
    std::copy(theta.begin() + at, theta.begin() + at + m.size(), m.data().begin());
    at += m.size();
  });
  if (at != theta.size())
    throw std::invalid_argument("unflatten: parameter vector length mismatch");
  return p;
}

// Xavier-uniform weights, zero biases, unit LayerNorm gains, and small
// Gaussian identity embeddings, drawn in canonical tensor order.
inline TransformerParams init_transformer(const TransformerHyper& h, std::uint64_t seed) {
  TransformerParams p = zero_params(h);
  Rng rng(seed);
  const auto xavier = [&rng](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : m.data()) v = rng.uniform(-limit, limit);
  };
  xavier(p.embed_w, 1, h.d_model);
  for (double& v : p.id_embed.data()) v = rng.normal(0.0, 0.02);
  for (auto& lp : p.layers) {
    xavier(lp.wq, h.d_model, h.d_model);
    xavier(lp.wk, h.d_model, h.d_model);
    xavier(lp.wv, h.d_model, h.d_model);
    xavier(lp.wo, h.d_model, h.d_model);
    for (double& v : lp.ln1_gain.data()) v = 1.0;
    for (double& v : lp.ln2_gain.data()) v = 1.0;
    xavier(lp.ffn_w1, h.d_model, h.d_ff);
    xavier(lp.ffn_w2, h.d_ff, h.d_model);
  }
  xavier(p.head_w, h.d_model, 2);
  return p;
}

// token t = x_t * w_t + b_t + id_t: the scalar steers a learned direction,
// the identity embedding tells attention which feature it is looking at.
inline Matrix tokenize(const TransformerParams& p, std::span<const double> row) {
  const auto& h = p.hyper;
  if (row.size() != h.max_tokens)
    throw std::invalid_argument("tokenize: row length " + std::to_string(row.size()) +
                                " does not match max_tokens " +
                                std::to_string(h.max_tokens));
  Matrix tokens(h.max_tokens, h.d_model);
  for (std::size_t t = 0; t < h.max_tokens; ++t)
    for (std::size_t j = 0; j < h.d_model; ++j)
      tokens(t, j) = row[t] * p.embed_w(t, j) + p.embed_b(t, j) + p.id_embed(t, j);
  return tokens;
}

namespace detail {

inline Matrix col_slice(const Matrix& m, std::size_t c0, std::size_t c1) {
  Matrix out(m.rows(), c1 - c0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = c0; c < c1; ++c) out(r, c - c0) = m(r, c);
  return out;
}

inline void col_slice_add(Matrix& dst, const Matrix& src, std::size_t c0) {
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, c0 + c) += src(r, c);
}

}  // namespace detail

struct MhaCache {
  Matrix q, k, v;            // max_tokens x d_model
  std::vector<Matrix> attn;  // per head: max_tokens x max_tokens, row-stochastic
  Matrix concat;             // max_tokens x d_model
};

// Scaled dot-product attention per head on column blocks of Q/K/V, heads
// concatenated and projected by wo.
inline Matrix multi_head_attention(const TransformerHyper& h,
                                   const EncoderLayerParams& lp, const Matrix& x,
                                   MhaCache* cache = nullptr) {
  if (x.rows() != h.max_tokens || x.cols() != h.d_model)
    throw std::invalid_argument("multi_head_attention: token matrix shape mismatch");
  const std::size_t dk = h.d_k();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix q = matmul(x, lp.wq);
  Matrix k = matmul(x, lp.wk);
  Matrix v = matmul(x, lp.wv);
  Matrix concat(h.max_tokens, h.d_model);
  std::vector<Matrix> attn;
  attn.reserve(h.n_heads);

  for (std::size_t head = 0; head < h.n_heads; ++head) {
    const std::size_t c0 = head * dk;
    const Matrix qh = detail::col_slice(q, c0, c0 + dk);
    const Matrix kh = detail::col_slice(k, c0, c0 + dk);
    const Matrix vh = detail::col_slice(v, c0, c0 + dk);
    Matrix scores = matmul(qh, transpose(kh));
    for (double& s : scores.data()) s *= scale;
    const Matrix a = softmax_rows(scores);
    const Matrix out = matmul(a, vh);
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < dk; ++c) concat(r, c0 + c) = out(r, c);
    attn.push_back(a);
  }

  Matrix result = matmul(concat, lp.wo);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->concat = std::move(concat);
  }
  return result;
}

struct EncoderLayerCache {
  Matrix x_in;
  MhaCache mha;
  Matrix mha_out;
  Matrix drop1;  // per-element multipliers; empty means identity
  Matrix r1;
  LayerNormCache ln1;
  Matrix y;
  Matrix ffn_pre;   // before ReLU
  Matrix ffn_act;   // after ReLU
  Matrix ffn_out;
  Matrix drop2;
  Matrix r2;
  LayerNormCache ln2;
};

constexpr double kLayerNormEps = 1e-5;

namespace detail {

// Inverted dropout: kept entries are scaled by 1/keep so inference needs no
// rescaling. Returns the multiplier matrix used (empty when inactive).
inline Matrix apply_dropout(Matrix& m, double rate, bool training, Rng* rng) {
  if (!training || rate <= 0.0) return {};
  if (!rng) throw std::invalid_argument("dropout: training mode needs a generator");
  Matrix mask(m.rows(), m.cols());
  const double keep = 1.0 - rate;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double mult = rng->uniform() < rate ? 0.0 : 1.0 / keep;
    mask.data()[i] = mult;
    m.data()[i] *= mult;
  }
  return mask;
}

inline void apply_mask(Matrix& grad, const Matrix& mask) {
  if (mask.empty()) return;
  for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] *= mask.data()[i];
}

}  // namespace detail

// Post-norm block: Y = LN(X + Drop(MHA(X))), Z = LN(Y + Drop(FFN(Y))) with
// FFN(Y) = ReLU(Y W1 + b1) W2 + b2.
inline Matrix encoder_layer(const TransformerHyper& h, const EncoderLayerParams& lp,
                            const Matrix& x, bool training, Rng* rng,
                            EncoderLayerCache* cache = nullptr) {
  Matrix mha_out = multi_head_attention(h, lp, x, cache ? &cache->mha : nullptr);
  if (cache) cache->mha_out = mha_out;
  const Matrix drop1 = detail::apply_dropout(mha_out, h.dropout_rate, training, rng);

  Matrix r1 = x;
  detail::add_inplace(r1, mha_out);
  LayerNormCache ln1;
  Matrix y = layer_norm(r1, lp.ln1_gain.row(0), lp.ln1_bias.row(0), kLayerNormEps,
                        cache ? &cache->ln1 : &ln1);

  Matrix ffn_pre = matmul(y, lp.ffn_w1);
  detail::add_row_broadcast(ffn_pre, lp.ffn_b1);
  Matrix ffn_act = ffn_pre;
  for (double& v : ffn_act.data()) v = relu(v);
  Matrix ffn_out = matmul(ffn_act, lp.ffn_w2);
  detail::add_row_broadcast(ffn_out, lp.ffn_b2);
  if (cache) {
    cache->x_in = x;
    cache->drop1 = drop1;
    cache->r1 = r1;
    cache->y = y;
    cache->ffn_pre = ffn_pre;
    cache->ffn_act = ffn_act;
    cache->ffn_out = ffn_out;
  }
  const Matrix drop2 = detail::apply_dropout(ffn_out, h.dropout_rate, training, rng);

  Matrix r2 = y;
  detail::add_inplace(r2, ffn_out);
  LayerNormCache ln2;
  Matrix z = layer_norm(r2, lp.ln2_gain.row(0), lp.ln2_bias.row(0), kLayerNormEps,
                        cache ? &cache->ln2 : &ln2);
  if (cache) {
    cache->drop2 = drop2;
    cache->r2 = r2;
  }
  return z;
}

struct RowCache {
  Matrix tokens;
  std::vector<EncoderLayerCache> layers;
  std::vector<Matrix> layer_out;
  std::vector<double> pooled;
  std::array<double, 2> probs{};
  std::array<double, 2> logits{};
};

// tokenize -> encoder stack -> mean-pool -> linear -> softmax.
inline std::array<double, 2> forward_row(const TransformerParams& p,
                                         std::span<const double> row, bool training,
                                         Rng* rng, RowCache* cache = nullptr) {
  const auto& h = p.hyper;
  Matrix x = tokenize(p, row);
  if (cache) {
    cache->tokens = x;
    cache->layers.resize(h.n_layers);
    cache->layer_out.resize(h.n_layers);
  }
  for (std::size_t l = 0; l < h.n_layers; ++l) {
    x = encoder_layer(h, p.layers[l], x, training, rng,
                      cache ? &cache->layers[l] : nullptr);
    if (cache) cache->layer_out[l] = x;
  }

  std::vector<double> pooled(h.d_model, 0.0);
  for (std::size_t t = 0; t < h.max_tokens; ++t)
    for (std::size_t j = 0; j < h.d_model; ++j) pooled[j] += x(t, j);
  for (double& v : pooled) v /= static_cast<double>(h.max_tokens);

  std::array<double, 2> logits{p.head_b(0, 0), p.head_b(0, 1)};
  for (std::size_t j = 0; j < h.d_model; ++j) {
    logits[0] += pooled[j] * p.head_w(j, 0);
    logits[1] += pooled[j] * p.head_w(j, 1);
  }
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx);
  const double e1 = std::exp(logits[1] - mx);
  std::array<double, 2> probs{e0 / (e0 + e1), e1 / (e0 + e1)};
  if (cache) {
    cache->pooled = std::move(pooled);
    cache->probs = probs;
    cache->logits = logits;
  }
  return probs;
}

namespace detail {

// Accumulates scale * dLoss/dParams for one row into grad. The forward pass
// must have been run with a cache.
inline void backward_row(const TransformerParams& p, std::span<const double> row,
                         int label, const RowCache& cache, double scale,
                         TransformerParams& grad) {
  const auto& h = p.hyper;
  const std::size_t T = h.max_tokens;
  const std::size_t d = h.d_model;
  const std::size_t dk = h.d_k();

  // Softmax + cross-entropy head.
  std::array<double, 2> dlogits{cache.probs[0], cache.probs[1]};
  dlogits[static_cast<std::size_t>(label)] -= 1.0;
  dlogits[0] *= scale;
  dlogits[1] *= scale;

  std::vector<double> d_pooled(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    grad.head_w(j, 0) += cache.pooled[j] * dlogits[0];
    grad.head_w(j, 1) += cache.pooled[j] * dlogits[1];
    d_pooled[j] = dlogits[0] * p.head_w(j, 0) + dlogits[1] * p.head_w(j, 1);
  }
  grad.head_b(0, 0) += dlogits[0];
  grad.head_b(0, 1) += dlogits[1];

  // Mean pooling spreads the gradient evenly over tokens.
  Matrix dz(T, d);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j)
      dz(t, j) = d_pooled[j] / static_cast<double>(T);

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  for (std::size_t l = h.n_layers; l-- > 0;) {
    const auto& lp = p.layers[l];
    auto& lg = grad.layers[l];
    const auto& c = cache.layers[l];

    // Z = LN2(R2), R2 = Y + Drop(FFN(Y)).
    Matrix dr2 = layer_norm_backward(dz, c.ln2, lp.ln2_gain.row(0),
                                     lg.ln2_gain.row(0), lg.ln2_bias.row(0));
    Matrix dy = dr2;
    Matrix dffn_out = dr2;
    apply_mask(dffn_out, c.drop2);

    // FFN(Y) = ReLU(Y W1 + b1) W2 + b2.
    Matrix d_act = matmul(dffn_out, transpose(lp.ffn_w2));
    detail::add_inplace(lg.ffn_w2,
                        matmul(transpose(c.ffn_act), dffn_out));
    for (std::size_t r = 0; r < T; ++r)
      for (std::size_t j = 0; j < d; ++j) lg.ffn_b2(0, j) += dffn_out(r, j);
    for (std::size_t i = 0; i < d_act.size(); ++i)
      if (c.ffn_pre.data()[i] <= 0.0) d_act.data()[i] = 0.0;
    detail::add_inplace(dy, matmul(d_act, transpose(lp.ffn_w1)));
    detail::add_inplace(lg.ffn_w1, matmul(transpose(c.y), d_act));
    for (std::size_t r = 0; r < T; ++r)
      for (std::size_t j = 0; j < h.d_ff; ++j) lg.ffn_b1(0, j) += d_act(r, j);

    // Y = LN1(R1), R1 = X + Drop(MHA(X)).
    Matrix dr1 = layer_norm_backward(dy, c.ln1, lp.ln1_gain.row(0),
                                     lg.ln1_gain.row(0), lg.ln1_bias.row(0));
    Matrix dx = dr1;
    Matrix dmha = dr1;
    apply_mask(dmha, c.drop1);

    // MHA out = Concat * W_O.
    Matrix dconcat = matmul(dmha, transpose(lp.wo));
    detail::add_inplace(lg.wo, matmul(transpose(c.mha.concat), dmha));

    Matrix dq(T, d), dkm(T, d), dv(T, d);
    for (std::size_t head = 0; head < h.n_heads; ++head) {
      const std::size_t c0 = head * dk;
      const Matrix dhead = col_slice(dconcat, c0, c0 + dk);
      const Matrix qh = col_slice(c.mha.q, c0, c0 + dk);
      const Matrix kh = col_slice(c.mha.k, c0, c0 + dk);
      const Matrix vh = col_slice(c.mha.v, c0, c0 + dk);
      const Matrix& a = c.mha.attn[head];

      // head = A V_h.
      Matrix da = matmul(dhead, transpose(vh));
      const Matrix dvh = matmul(transpose(a), dhead);
      Matrix ds(T, T);
      for (std::size_t r = 0; r < T; ++r)
        softmax_row_backward(a.row(r), da.row(r), ds.row(r));
      for (double& v : ds.data()) v *= attn_scale;
      const Matrix dqh = matmul(ds, kh);
      const Matrix dkh = matmul(transpose(ds), qh);
      col_slice_add(dq, dqh, c0);
      col_slice_add(dkm, dkh, c0);
      col_slice_add(dv, dvh, c0);
    }

    detail::add_inplace(dx, matmul(dq, transpose(lp.wq)));
    detail::add_inplace(dx, matmul(dkm, transpose(lp.wk)));
    detail::add_inplace(dx, matmul(dv, transpose(lp.wv)));
    detail::add_inplace(lg.wq, matmul(transpose(c.x_in), dq));
    detail::add_inplace(lg.wk, matmul(transpose(c.x_in), dkm));
    detail::add_inplace(lg.wv, matmul(transpose(c.x_in), dv));

    dz = std::move(dx);
  }

  // token t = x_t w_t + b_t + id_t.
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      grad.embed_w(t, j) += row[t] * dz(t, j);
      grad.embed_b(t, j) += dz(t, j);
      grad.id_embed(t, j) += dz(t, j);
    }
}

}  // namespace detail

// Mean cross-entropy over the batch plus an optional ridge penalty
// 0.5 * l2 * ||theta||^2 over every parameter. Gradients accumulate into
// grad (caller zeroes it). Pass rng to enable dropout.
inline double transformer_loss_and_grad(const TransformerParams& p, const Matrix& xb,
                                        std::span<const int> yb, double l2, Rng* rng,
                                        TransformerParams& grad) {
  if (xb.rows() != yb.size())
    throw std::invalid_argument("transformer loss: batch size mismatch");
  const double scale = 1.0 / static_cast<double>(xb.rows());
  double loss = 0.0;
  RowCache cache;
  for (std::size_t r = 0; r < xb.rows(); ++r) {
    forward_row(p, xb.row(r), rng != nullptr, rng, &cache);
    const int y = yb[r];
    if (y != 0 && y != 1)
      throw std::invalid_argument("transformer loss: label outside {0,1}");
    const double mx = std::max(cache.logits[0], cache.logits[1]);
    const double lse = mx + std::log(std::exp(cache.logits[0] - mx) +
                                     std::exp(cache.logits[1] - mx));
    loss += scale * (lse - cache.logits[static_cast<std::size_t>(y)]);
    detail::backward_row(p, xb.row(r), y, cache, scale, grad);
  }
  if (l2 > 0.0) {
    const std::vector<double> gp = flatten(p);
    std::vector<double> gg = flatten(grad);
    double sq = 0.0;
    for (const double v : gp) sq += v * v;
    loss += 0.5 * l2 * sq;
    for (std::size_t i = 0; i < gg.size(); ++i) gg[i] += l2 * gp[i];
    grad = unflatten(p.hyper, gg);
  }
  return loss;
}

// Loss without gradients or dropout; the reference function for finite
// differences.
inline double transformer_loss(const TransformerParams& p, const Matrix& xb,
                               std::span<const int> yb, double l2 = 0.0) {
  if (xb.rows() != yb.size())
    throw std::invalid_argument("transformer loss: batch size mismatch");
  const double scale = 1.0 / static_cast<double>(xb.rows());
  double loss = 0.0;
  RowCache cache;
  for (std::size_t r = 0; r < xb.rows(); ++r) {
    forward_row(p, xb.row(r), false, nullptr, &cache);
    const int y = yb[r];
    const double mx = std::max(cache.logits[0], cache.logits[1]);
    const double lse = mx + std::log(std::exp(cache.logits[0] - mx) +
                                     std::exp(cache.logits[1] - mx));
    loss += scale * (lse - cache.logits[static_cast<std::size_t>(y)]);
  }
  if (l2 > 0.0) {
    auto theta = flatten(p);
    double sq = 0.0;
    for (const double v : theta) sq += v * v;
    loss += 0.5 * l2 * sq;
  }
  return loss;
}

struct TrainedTransformer {
  TransformerParams params;
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

// Mini-batch Adam over shuffled epochs. Deterministic per cfg.seed: the
// parameter init, epoch shuffles and dropout masks each use an independent
// stream derived from it.
inline TrainedTransformer train_transformer(const LabeledDataset& ds,
                                            TransformerHyper hyper,
                                            const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be at least 1");
  const auto counts = class_counts(ds);
  if (counts.n_fraud == 0 || counts.n_legit == 0)
    throw std::runtime_error("train: dataset must contain both classes");
  if (hyper.max_tokens == 0) hyper.max_tokens = ds.n_cols();
  if (hyper.max_tokens != ds.n_cols())
    throw std::invalid_argument("train: feature count " + std::to_string(ds.n_cols()) +
                                " does not match max_tokens " +
                                std::to_string(hyper.max_tokens));
  validate(hyper);

  TrainedTransformer out;
  out.params = init_transformer(hyper, derive_seed(cfg.seed, "init"));
  std::vector<double> theta = flatten(out.params);

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  AdamState adam(theta.size(), adam_cfg);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  const bool use_dropout = hyper.dropout_rate > 0.0;

  const std::size_t n = ds.n_rows();
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
        const auto dst = xb.row(i - start);
        std::copy(src.begin(), src.end(), dst.begin());
        yb[i - start] = ds.labels[order[i]];
      }

      const TransformerParams params = unflatten(hyper, theta);
      TransformerParams grad = zero_params(hyper);
      const double loss = transformer_loss_and_grad(
          params, xb, yb, cfg.l2, use_dropout ? &dropout_rng : nullptr, grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index));
      epoch_loss += loss * static_cast<double>(stop - start);

      const std::vector<double> g = flatten(grad);
      adam.step(theta, g);
    }
    out.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }

  out.params = unflatten(hyper, theta);
  return out;
}

inline std::vector<double> predict_proba(const LabeledDataset& ds,
                                         const TransformerParams& p) {
  if (ds.n_cols() != p.hyper.max_tokens)
    throw std::invalid_argument("predict: feature count does not match the model");
  std::vector<double> out(ds.n_rows());
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    out[r] = forward_row(p, ds.features.row(r), false, nullptr)[1];
  return out;
}

// ---------------------------------------------------------------------------
// Versioned binary format: magic "FBTF", format version, hyper block, then
// every tensor in canonical order as (rows u32, cols u32, payload f64 LE).

constexpr std::uint32_t kTransformerFormatVersion = 1;

inline void save_model(const TransformerParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write("FBTF", 4);
  detail::write_u32(out, kTransformerFormatVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(p.hyper.d_model));
  detail::write_u32(out, static_cast<std::uint32_t>(p.hyper.n_heads));
  detail::write_u32(out, static_cast<std::uint32_t>(p.hyper.n_layers));
  detail::write_u32(out, static_cast<std::uint32_t>(p.hyper.d_ff));
  detail::write_u32(out, static_cast<std::uint32_t>(p.hyper.max_tokens));
  detail::write_u32(out, static_cast<std::uint32_t>(TransformerHyper::n_classes));
  detail::write_f64(out, p.hyper.dropout_rate);
  visit_tensors(p, [&](const std::string&, const Matrix& m) {
    detail::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (const double v : m.data()) detail::write_f64(out, v);
  });
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline TransformerParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FBTF", 4) != 0)
    throw std::runtime_error("'" + path + "' is not a transformer model file (bad magic)");
  const std::uint32_t version = detail::read_u32(in, "format version");
  if (version != kTransformerFormatVersion)
    throw std::runtime_error("unsupported model format version " +
                             std::to_string(version));
  TransformerHyper h;
  h.d_model = detail::read_u32(in, "d_model");
  h.n_heads = detail::read_u32(in, "n_heads");
  h.n_layers = detail::read_u32(in, "n_layers");
  h.d_ff = detail::read_u32(in, "d_ff");
  h.max_tokens = detail::read_u32(in, "max_tokens");
  const std::uint32_t n_classes = detail::read_u32(in, "n_classes");
  if (n_classes != TransformerHyper::n_classes)
    throw std::runtime_error("model file declares unsupported class count " +
                             std::to_string(n_classes));
  h.dropout_rate = detail::read_f64(in, "dropout_rate");
  validate(h);

  TransformerParams p = zero_params(h);
  visit_tensors(p, [&](const std::string& name, Matrix& m) {
    const std::uint32_t rows = detail::read_u32(in, name.c_str());
    const std::uint32_t cols = detail::read_u32(in, name.c_str());
    if (rows != m.rows() || cols != m.cols())
      throw std::runtime_error("model file tensor '" + name + "': expected " +
                               std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                               ", found " + std::to_string(rows) + "x" +
                               std::to_string(cols));
    for (double& v : m.data()) v = detail::read_f64(in, name.c_str());
  });
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("model file '" + path + "' has trailing bytes");
  bool finite = true;
  visit_tensors(p, [&](const std::string&, Matrix& m) { finite &= m.all_finite(); });
  if (!finite) throw std::runtime_error("model file contains non-finite values");
  return p;
}

}  // namespace fraudbench
