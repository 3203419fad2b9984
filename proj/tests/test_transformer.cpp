#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fraudbench/grad_check.hpp"
#include "fraudbench/transformer.hpp"

namespace fb = fraudbench;
namespace fs = std::filesystem;

namespace {

fb::TransformerHyper tiny_hyper() {
  fb::TransformerHyper h;
  h.d_model = 4;
  h.n_heads = 2;
  h.n_layers = 1;
  h.d_ff = 8;
  h.dropout_rate = 0.0;
  h.max_tokens = 3;
  return h;
}

fb::LabeledDataset blob_dataset() {
  fb::SyntheticSpec spec;
  spec.kind = fb::SyntheticKind::GaussianBlobs;
  spec.n_per_class = 100;
  spec.n_features = 4;
  spec.seed = 7;
  spec.mu = 3.0;
  return fb::generate_synthetic(spec);
}

fb::TransformerHyper blob_hyper() {
  fb::TransformerHyper h;
  h.d_model = 8;
  h.n_heads = 2;
  h.n_layers = 1;
  h.d_ff = 16;
  h.dropout_rate = 0.1;
  h.max_tokens = 4;
  return h;
}

fb::TrainConfig blob_config() {
  fb::TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-3;
  cfg.seed = 42;
  return cfg;
}

// Shared across the training tests; trained once.
const fb::TrainedTransformer& blob_trained() {
  static const fb::TrainedTransformer t =
      fb::train_transformer(blob_dataset(), blob_hyper(), blob_config());
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spew(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

fs::path model_path(const std::string& name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST(TransformerTokenize, ZeroRowAndZeroAffineYieldIdentityTable) {
  auto p = fb::zero_params(tiny_hyper());
  fb::Rng rng(3);
  for (double& v : p.id_embed.data()) v = rng.normal();
  const std::vector<double> row(3, 0.0);
  EXPECT_EQ(fb::tokenize(p, row), p.id_embed);
}

TEST(TransformerTokenize, ScalingOneFeatureTouchesOnlyItsToken) {
  auto p = fb::init_transformer(tiny_hyper(), 7);
  const std::vector<double> row{0.5, -1.25, 2.0};
  std::vector<double> scaled = row;
  scaled[1] *= 2.0;
  const fb::Matrix a = fb::tokenize(p, row);
  const fb::Matrix b = fb::tokenize(p, scaled);
  EXPECT_NE(a.row(1)[0], b.row(1)[0]);
  for (std::size_t c = 0; c < a.cols(); ++c) {
    EXPECT_EQ(a(0, c), b(0, c));
    EXPECT_EQ(a(2, c), b(2, c));
  }
}

TEST(TransformerTokenize, PinnedFixture) {
  auto p = fb::init_transformer(tiny_hyper(), 7);
  const std::vector<double> row{0.5, -1.25, 2.0};
  const fb::Matrix t = fb::tokenize(p, row);
  const fb::Matrix want = fb::Matrix::from_rows(
      {{0.254371505399755, -0.27455849010412048, 0.35171058319357901,
        0.51883568067559449},
       {-1.359336591619918, -1.0176418745649209, 1.2107176996602818,
        1.091986711760756},
       {-0.42906145422484548, -1.5356493600942238, 0.17550559113274511,
        1.0450657360721156}});
  EXPECT_LT(fb::max_abs_diff(t, want), 1e-12);
}

TEST(TransformerTokenize, RowLengthMismatchThrows) {
  auto p = fb::zero_params(tiny_hyper());
  const std::vector<double> row(4, 0.0);
  EXPECT_THROW(fb::tokenize(p, row), std::invalid_argument);
}

TEST(TransformerAttention, SingleTokenPassesValueThrough) {
  fb::TransformerHyper h;
  h.d_model = 4;
  h.n_heads = 2;
  h.n_layers = 1;
  h.d_ff = 8;
  h.max_tokens = 1;
  auto p = fb::init_transformer(h, 21);
  p.layers[0].wo = fb::Matrix::identity(4);
  fb::Matrix x(1, 4);
  fb::Rng rng(4);
  for (double& v : x.data()) v = rng.normal();
  const fb::Matrix out = fb::multi_head_attention(h, p.layers[0], x);
  EXPECT_LT(fb::max_abs_diff(out, fb::matmul(x, p.layers[0].wv)), 1e-12);
}

TEST(TransformerAttention, IdenticalTokensAttendEqually) {
  fb::TransformerHyper h = tiny_hyper();
  h.max_tokens = 2;
  auto p = fb::init_transformer(h, 22);
  fb::Matrix x(2, 4);
  for (std::size_t c = 0; c < 4; ++c) x(0, c) = x(1, c) = 0.3 * (c + 1.0);
  fb::MhaCache cache;
  fb::multi_head_attention(h, p.layers[0], x, &cache);
  for (const fb::Matrix& a : cache.attn)
    for (const double v : a.data()) EXPECT_NEAR(v, 0.5, 1e-12);
}

// One head, identity weights: Q = K = V = X, so A = softmax(X X^T / sqrt(2))
// and the output is A X. Evaluated by hand below and pinned.
TEST(TransformerAttention, TwoTokenOneHeadHandFixture) {
  fb::TransformerHyper h;
  h.d_model = 2;
  h.n_heads = 1;
  h.n_layers = 1;
  h.d_ff = 4;
  h.max_tokens = 2;
  auto p = fb::zero_params(h);
  p.layers[0].wq = fb::Matrix::identity(2);
  p.layers[0].wk = fb::Matrix::identity(2);
  p.layers[0].wv = fb::Matrix::identity(2);
  p.layers[0].wo = fb::Matrix::identity(2);
  const fb::Matrix x = fb::Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});

  fb::MhaCache cache;
  const fb::Matrix out = fb::multi_head_attention(h, p.layers[0], x, &cache);

  // Gram matrix of X is [[5,11],[11,25]]; each row softmaxes over its scaled
  // entries.
  const double s = 1.0 / std::sqrt(2.0);
  const double a01 = 1.0 / (1.0 + std::exp((5.0 - 11.0) * s));
  const double a11 = 1.0 / (1.0 + std::exp((11.0 - 25.0) * s));
  const fb::Matrix& a = cache.attn[0];
  EXPECT_NEAR(a(0, 0), 1.0 - a01, 1e-12);
  EXPECT_NEAR(a(0, 1), a01, 1e-12);
  EXPECT_NEAR(a(1, 0), 1.0 - a11, 1e-12);
  EXPECT_NEAR(a(1, 1), a11, 1e-12);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      EXPECT_NEAR(out(r, c), a(r, 0) * x(0, c) + a(r, 1) * x(1, c), 1e-12);

  EXPECT_NEAR(a(0, 0), 0.01416603587668842, 1e-12);
  EXPECT_NEAR(a(1, 0), 5.0197509935188985e-05, 1e-12);
  EXPECT_NEAR(out(0, 0), 2.9716679282466236, 1e-12);
  EXPECT_NEAR(out(1, 1), 3.9998996049801296, 1e-12);
}

TEST(TransformerAttention, RowsAreStochasticOnRandomInput) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 5);
  fb::Matrix x(3, 4);
  fb::Rng rng(6);
  for (double& v : x.data()) v = rng.uniform(-2.0, 2.0);
  fb::MhaCache cache;
  fb::multi_head_attention(h, p.layers[0], x, &cache);
  ASSERT_EQ(cache.attn.size(), 2u);
  for (const fb::Matrix& a : cache.attn)
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double sum = 0.0;
      for (const double v : a.row(r)) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(TransformerAttention, TokenMatrixShapeMismatchThrows) {
  auto h = tiny_hyper();
  auto p = fb::zero_params(h);
  EXPECT_THROW(fb::multi_head_attention(h, p.layers[0], fb::Matrix(3, 5)),
               std::invalid_argument);
  EXPECT_THROW(fb::multi_head_attention(h, p.layers[0], fb::Matrix(2, 4)),
               std::invalid_argument);
}

TEST(TransformerEncoderLayer, ZeroWeightsCollapseToDoubleLayerNorm) {
  auto h = tiny_hyper();
  auto p = fb::zero_params(h);
  for (double& v : p.layers[0].ln1_gain.data()) v = 1.0;
  for (double& v : p.layers[0].ln2_gain.data()) v = 1.0;
  const fb::Matrix x = fb::Matrix::from_rows(
      {{0.5, -1.0, 2.0, 0.25}, {1.0, 1.0, -3.0, 0.0}, {4.0, -2.0, 0.5, 1.5}});
  const fb::Matrix z = fb::encoder_layer(h, p.layers[0], x, false, nullptr);

  const fb::Matrix ones(1, 4, 1.0);
  const fb::Matrix zeros(1, 4, 0.0);
  const fb::Matrix ln =
      fb::layer_norm(x, ones.row(0), zeros.row(0), fb::kLayerNormEps);
  const fb::Matrix lnln =
      fb::layer_norm(ln, ones.row(0), zeros.row(0), fb::kLayerNormEps);
  EXPECT_LT(fb::max_abs_diff(z, lnln), 1e-12);
  EXPECT_NEAR(z(0, 0), 0.05862074507048385, 1e-12);
  EXPECT_NEAR(z(2, 3), 0.23249411501745618, 1e-12);
}

TEST(TransformerEncoderLayer, EvalIsDeterministic) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 31);
  fb::Matrix x(3, 4);
  fb::Rng rng(8);
  for (double& v : x.data()) v = rng.normal();
  const fb::Matrix a = fb::encoder_layer(h, p.layers[0], x, false, nullptr);
  const fb::Matrix b = fb::encoder_layer(h, p.layers[0], x, false, nullptr);
  EXPECT_EQ(a, b);
}

TEST(TransformerEncoderLayer, ZeroDropoutTrainingMatchesEval) {
  auto h = tiny_hyper();  // dropout_rate already 0
  auto p = fb::init_transformer(h, 31);
  fb::Matrix x(3, 4);
  fb::Rng rng(8);
  for (double& v : x.data()) v = rng.normal();
  fb::Rng drop(77);
  const fb::Matrix train_out = fb::encoder_layer(h, p.layers[0], x, true, &drop);
  const fb::Matrix eval_out = fb::encoder_layer(h, p.layers[0], x, false, nullptr);
  EXPECT_EQ(train_out, eval_out);
}

TEST(TransformerEncoderLayer, DropoutPerturbsTrainingOutputOnly) {
  auto h = tiny_hyper();
  h.dropout_rate = 0.5;
  auto p = fb::init_transformer(h, 31);
  fb::Matrix x(3, 4);
  fb::Rng rng(8);
  for (double& v : x.data()) v = rng.normal();
  fb::Rng d1(1), d2(2);
  const fb::Matrix o1 = fb::encoder_layer(h, p.layers[0], x, true, &d1);
  const fb::Matrix o2 = fb::encoder_layer(h, p.layers[0], x, true, &d2);
  EXPECT_GT(fb::max_abs_diff(o1, o2), 0.0);
  const fb::Matrix e1 = fb::encoder_layer(h, p.layers[0], x, false, nullptr);
  const fb::Matrix e2 = fb::encoder_layer(h, p.layers[0], x, false, nullptr);
  EXPECT_EQ(e1, e2);
}

TEST(TransformerForward, ProbabilitiesFormADistribution) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 11);
  fb::Rng rng(12);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> row(3);
    for (double& v : row) v = rng.uniform(-3.0, 3.0);
    const auto probs = fb::forward_row(p, row, false, nullptr);
    EXPECT_GT(probs[0], 0.0);
    EXPECT_GT(probs[1], 0.0);
    EXPECT_LT(probs[0], 1.0);
    EXPECT_LT(probs[1], 1.0);
    EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-12);
  }
}

// A fresh Xavier-scale model with a symmetric head should sit near a coin
// flip on random inputs rather than saturate.
TEST(TransformerForward, FreshInitStaysNearCoinFlip) {
  fb::TransformerHyper h;
  h.max_tokens = 30;
  auto p = fb::init_transformer(h, 0);
  fb::Rng rng(0);
  double acc = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> row(30);
    for (double& v : row) v = rng.normal();
    acc += std::abs(fb::forward_row(p, row, false, nullptr)[1] - 0.5);
  }
  const double spread = acc / 100.0;
  EXPECT_LT(spread, 0.2);
  EXPECT_NEAR(spread, 0.13381364288513642, 1e-9);
}

TEST(TransformerForward, PinnedFixturePair) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  const std::vector<double> row{0.5, -1.25, 2.0};
  const auto probs = fb::forward_row(p, row, false, nullptr);
  EXPECT_NEAR(probs[0], 0.27518026816212077, 1e-12);
  EXPECT_NEAR(probs[1], 0.72481973183787929, 1e-12);
}

// Central differences over every parameter of the full batch loss.
TEST(TransformerGradients, MatchFiniteDifferences) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 3);
  fb::Rng rng(99);
  fb::Matrix xb(2, 3);
  for (double& v : xb.data()) v = rng.uniform(-1.0, 1.0);
  const std::vector<int> yb{0, 1};

  fb::TransformerParams grad = fb::zero_params(h);
  fb::transformer_loss_and_grad(p, xb, yb, 0.0, nullptr, grad);
  const std::vector<double> analytic = fb::flatten(grad);
  std::vector<double> theta = fb::flatten(p);
  const auto result = fb::grad_check(
      [&](std::span<const double> th) {
        return fb::transformer_loss(fb::unflatten(h, th), xb, yb, 0.0);
      },
      theta, analytic);
  EXPECT_LT(result.max_rel_err, 1e-3);
}

TEST(TransformerGradients, MatchFiniteDifferencesWithRidge) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 3);
  fb::Rng rng(99);
  fb::Matrix xb(2, 3);
  for (double& v : xb.data()) v = rng.uniform(-1.0, 1.0);
  const std::vector<int> yb{0, 1};

  fb::TransformerParams grad = fb::zero_params(h);
  fb::transformer_loss_and_grad(p, xb, yb, 0.01, nullptr, grad);
  const std::vector<double> analytic = fb::flatten(grad);
  std::vector<double> theta = fb::flatten(p);
  const auto result = fb::grad_check(
      [&](std::span<const double> th) {
        return fb::transformer_loss(fb::unflatten(h, th), xb, yb, 0.01);
      },
      theta, analytic);
  EXPECT_LT(result.max_rel_err, 1e-3);
}

// Mean pooling has no notion of position beyond the learned embeddings, so
// permuting features together with their embedding rows changes nothing.
TEST(TransformerGradients, PermutationEquivariance) {
  auto h = tiny_hyper();
  auto p = fb::init_transformer(h, 17);
  const std::vector<double> row{0.8, -0.3, 1.7};
  const std::vector<std::size_t> perm{2, 0, 1};

  auto q = p;
  std::vector<double> prow(3);
  for (std::size_t i = 0; i < 3; ++i) {
    prow[i] = row[perm[i]];
    for (std::size_t c = 0; c < h.d_model; ++c) {
      q.embed_w(i, c) = p.embed_w(perm[i], c);
      q.embed_b(i, c) = p.embed_b(perm[i], c);
      q.id_embed(i, c) = p.id_embed(perm[i], c);
    }
  }
  const auto a = fb::forward_row(p, row, false, nullptr);
  const auto b = fb::forward_row(q, prow, false, nullptr);
  EXPECT_NEAR(a[0], b[0], 1e-9);
  EXPECT_NEAR(a[1], b[1], 1e-9);
}

TEST(TransformerTrain, SeparatedBlobsReachTinyLoss) {
  const auto& t = blob_trained();
  ASSERT_EQ(t.loss_curve.size(), 20u);
  EXPECT_LT(t.loss_curve.back(), 0.01);
}

TEST(TransformerTrain, LossNonIncreasingAfterWarmup) {
  const auto& t = blob_trained();
  for (std::size_t e = 4; e < t.loss_curve.size(); ++e)
    EXPECT_LE(t.loss_curve[e], t.loss_curve[e - 1] + 0.05) << "epoch " << e;
}

TEST(TransformerTrain, ZeroLearningRateFreezesParameters) {
  auto h = blob_hyper();
  h.dropout_rate = 0.0;  // keeps the recorded loss noise-free
  auto cfg = blob_config();
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  const auto t = fb::train_transformer(blob_dataset(), h, cfg);

  const auto fresh =
      fb::flatten(fb::init_transformer(h, fb::derive_seed(cfg.seed, "init")));
  EXPECT_EQ(fb::flatten(t.params), fresh);
  for (const double v : t.loss_curve)
    EXPECT_NEAR(v, t.loss_curve.front(), 1e-12);
}

TEST(TransformerTrain, DeterministicPerSeedAndSensitiveToIt) {
  auto cfg = blob_config();
  cfg.epochs = 3;
  const auto a = fb::train_transformer(blob_dataset(), blob_hyper(), cfg);
  const auto b = fb::train_transformer(blob_dataset(), blob_hyper(), cfg);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(fb::flatten(a.params), fb::flatten(b.params));

  cfg.seed = 43;
  const auto c = fb::train_transformer(blob_dataset(), blob_hyper(), cfg);
  EXPECT_NE(a.loss_curve, c.loss_curve);
}

TEST(TransformerTrain, SingleClassDataThrows) {
  auto ds = blob_dataset();
  ds.labels.assign(ds.labels.size(), 0);
  EXPECT_THROW(fb::train_transformer(ds, blob_hyper(), blob_config()),
               std::runtime_error);
}

TEST(TransformerTrain, FeatureCountMismatchThrows) {
  auto h = blob_hyper();
  h.max_tokens = 5;
  EXPECT_THROW(fb::train_transformer(blob_dataset(), h, blob_config()),
               std::invalid_argument);
}

TEST(TransformerTrain, DivergenceReportsEpochAndBatch) {
  auto cfg = blob_config();
  cfg.learning_rate = 1e300;
  cfg.epochs = 2;
  try {
    fb::train_transformer(blob_dataset(), blob_hyper(), cfg);
    FAIL() << "expected divergence";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(TransformerPredict, SingleRowMatchesForward) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = fb::Matrix::from_rows({{0.5, -1.25, 2.0}});
  ds.labels = {0};
  const auto out = fb::predict_proba(ds, p);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], fb::forward_row(p, ds.features.row(0), false, nullptr)[1]);
}

TEST(TransformerPredict, PermutedRowsPermuteOutputs) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = fb::Matrix::from_rows(
      {{0.5, -1.25, 2.0}, {-0.75, 0.0, 1.5}, {2.25, 1.0, -0.5}});
  ds.labels = {0, 1, 0};
  auto swapped = ds;
  for (std::size_t c = 0; c < 3; ++c)
    std::swap(swapped.features(0, c), swapped.features(2, c));
  std::swap(swapped.labels[0], swapped.labels[2]);

  const auto a = fb::predict_proba(ds, p);
  const auto b = fb::predict_proba(swapped, p);
  EXPECT_EQ(a[0], b[2]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_EQ(a[2], b[0]);
}

TEST(TransformerPredict, PinnedFixtureBatch) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = fb::Matrix::from_rows(
      {{0.5, -1.25, 2.0}, {-0.75, 0.0, 1.5}, {2.25, 1.0, -0.5}});
  ds.labels = {0, 1, 0};
  const auto out = fb::predict_proba(ds, p);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_NEAR(out[0], 0.72481973183787929, 1e-12);
  EXPECT_NEAR(out[1], 0.7039569029116225, 1e-12);
  EXPECT_NEAR(out[2], 0.42110195578898507, 1e-12);
}

TEST(TransformerPredict, RepeatedCallsAgreeBitwise) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = fb::Matrix::from_rows({{0.5, -1.25, 2.0}, {-0.75, 0.0, 1.5}});
  ds.labels = {0, 1};
  EXPECT_EQ(fb::predict_proba(ds, p), fb::predict_proba(ds, p));
}

TEST(TransformerPredict, FeatureCountMismatchThrows) {
  auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b"};
  ds.features = fb::Matrix(1, 2);
  ds.labels = {0};
  EXPECT_THROW(fb::predict_proba(ds, p), std::invalid_argument);
}

TEST(TransformerIo, RoundTripIsBitExact) {
  fb::TransformerHyper h;
  h.d_model = 4;
  h.n_heads = 2;
  h.n_layers = 2;
  h.d_ff = 8;
  h.dropout_rate = 0.25;
  h.max_tokens = 3;
  const auto p = fb::init_transformer(h, 13);
  const auto path = model_path("fb_roundtrip.bin");
  fb::save_model(p, path.string());
  const auto q = fb::load_model(path.string());
  EXPECT_EQ(fb::flatten(p), fb::flatten(q));
  EXPECT_EQ(q.hyper.d_model, h.d_model);
  EXPECT_EQ(q.hyper.n_heads, h.n_heads);
  EXPECT_EQ(q.hyper.n_layers, h.n_layers);
  EXPECT_EQ(q.hyper.d_ff, h.d_ff);
  EXPECT_EQ(q.hyper.max_tokens, h.max_tokens);
  EXPECT_EQ(q.hyper.dropout_rate, h.dropout_rate);
}

TEST(TransformerIo, LoadedModelPredictsIdentically) {
  const auto p = fb::init_transformer(tiny_hyper(), 11);
  fb::LabeledDataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = fb::Matrix::from_rows({{0.5, -1.25, 2.0}, {-0.75, 0.0, 1.5}});
  ds.labels = {0, 1};
  const auto path = model_path("fb_predict_roundtrip.bin");
  fb::save_model(p, path.string());
  const auto q = fb::load_model(path.string());
  EXPECT_EQ(fb::predict_proba(ds, p), fb::predict_proba(ds, q));
}

TEST(TransformerIo, BadMagicIsRejected) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_badmagic.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  bytes[0] = 'X';
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected bad-magic rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos) << e.what();
  }
}

TEST(TransformerIo, UnknownVersionIsRejected) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_badversion.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  bytes[4] = 99;  // format version is the u32 after the magic
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected version rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(TransformerIo, TruncatedFileIsRejected) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_truncated.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  bytes.resize(bytes.size() / 2);
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected truncation rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos)
        << e.what();
  }
}

TEST(TransformerIo, ShapeHeaderMismatchNamesTheTensor) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_badshape.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  // Header is 4 magic + 4 version + 6 u32 + 1 f64 = 40 bytes; the first
  // tensor's row count sits right after it.
  bytes[40] = static_cast<char>(bytes[40] + 1);
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected shape rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("embed_w"), std::string::npos) << e.what();
  }
}

TEST(TransformerIo, TrailingBytesAreRejected) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_trailing.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  bytes.push_back('\0');
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected trailing-byte rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("trailing"), std::string::npos)
        << e.what();
  }
}

TEST(TransformerIo, NonFinitePayloadIsRejected) {
  const auto p = fb::init_transformer(tiny_hyper(), 13);
  const auto path = model_path("fb_nan.bin");
  fb::save_model(p, path.string());
  auto bytes = slurp(path);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(bytes.data() + 48, &nan, sizeof nan);  // first payload value
  spew(path, bytes);
  try {
    fb::load_model(path.string());
    FAIL() << "expected non-finite rejection";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos)
        << e.what();
  }
}

TEST(TransformerIo, HyperValidationRejectsBadShapes) {
  fb::TransformerHyper h = tiny_hyper();
  h.n_heads = 3;  // does not divide d_model=4
  EXPECT_THROW(fb::zero_params(h), std::invalid_argument);
  h = tiny_hyper();
  h.dropout_rate = 1.0;
  EXPECT_THROW(fb::zero_params(h), std::invalid_argument);
  h = tiny_hyper();
  h.max_tokens = 0;
  EXPECT_THROW(fb::zero_params(h), std::invalid_argument);
}

TEST(TransformerIo, UnflattenRejectsWrongLength) {
  auto h = tiny_hyper();
  std::vector<double> theta(fb::n_params(h) + 1, 0.0);
  EXPECT_THROW(fb::unflatten(h, theta), std::invalid_argument);
  theta.resize(fb::n_params(h) - 1);
  EXPECT_THROW(fb::unflatten(h, theta), std::invalid_argument);
}
