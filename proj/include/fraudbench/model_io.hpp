#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fraudbench/baselines.hpp"
#include "fraudbench/preprocess.hpp"
#include "fraudbench/text.hpp"
#include "fraudbench/transformer.hpp"

namespace fraudbench {

// Adapts the attention classifier to the common interface so the harness can
// benchmark it beside the classical models.
class TransformerClassifier final : public Classifier {
 public:
  explicit TransformerClassifier(TransformerHyper hyper = {},
                                 TrainConfig cfg = {})
      : hyper_(hyper), cfg_(cfg) {}
  explicit TransformerClassifier(TransformerParams params)
      : hyper_(params.hyper), params_(std::move(params)), fitted_(true) {}

  std::string name() const override { return "transformer"; }

  void fit(const LabeledDataset& train, std::uint64_t seed) override {
    cfg_.seed = seed;
    auto hyper = hyper_;
    hyper.max_tokens = train.n_cols();
    auto trained = train_transformer(train, hyper, cfg_);
    params_ = std::move(trained.params);
    loss_curve_ = std::move(trained.loss_curve);
    hyper_ = params_.hyper;
    fitted_ = true;
  }

  double score(std::span<const double> row) const override {
    if (!fitted_) throw std::logic_error("transformer: score before fit");
    return forward_row(params_, row, false, nullptr)[1];
  }

  void save(const std::string& path) const override {
    if (!fitted_) throw std::logic_error("transformer: save before fit");
    save_model(params_, path);
  }

  const TransformerParams& params() const { return params_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }

 private:
  TransformerHyper hyper_;
  TrainConfig cfg_;
  TransformerParams params_;
  std::vector<double> loss_curve_;
  bool fitted_ = false;
};

// Dispatches on the file magic: "FBTF" is the transformer format, "FBBL" the
// baseline container.
inline std::unique_ptr<Classifier> load_any_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
  char magic[4] = {};
  if (!in.read(magic, 4))
    throw std::runtime_error("model file '" + path + "' is too short");
  in.close();
  if (std::memcmp(magic, "FBTF", 4) == 0)
    return std::make_unique<TransformerClassifier>(load_model(path));
  if (std::memcmp(magic, "FBBL", 4) == 0) return load_baseline(path);
  throw std::runtime_error("'" + path + "' is not a recognized model file");
}

// ---------------------------------------------------------------------------
// Scaler sidecar: a model trained on z-scored features is unusable without
// its statistics, so they ride along as "<model path>.scaler" in a small
// text format (one "name,mean,stddev" line per feature).

inline std::string scaler_sidecar_path(const std::string& model_path) {
  return model_path + ".scaler";
}

inline void save_standardizer(const Standardizer& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "feature,mean,stddev\n";
  for (std::size_t i = 0; i < s.mean.size(); ++i)
    out << s.feature_names[i] << ',' << format_double(s.mean[i]) << ','
        << format_double(s.stddev[i]) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Standardizer load_standardizer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scaler file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "feature,mean,stddev")
    throw std::runtime_error("'" + path + "' is not a scaler file");
  Standardizer s;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 3 fields");
    try {
      s.feature_names.push_back(std::string(trim(fields[0])));
      s.mean.push_back(parse_double(trim(fields[1])));
      s.stddev.push_back(parse_double(trim(fields[2])));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (s.stddev.back() <= 0.0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": stddev must be positive");
  }
  if (s.mean.empty())
    throw std::runtime_error("'" + path + "' lists no features");
  return s;
}

// The scaler a saved model was trained with, if one was written beside it.
inline std::optional<Standardizer> load_sidecar_standardizer(
    const std::string& model_path) {
  const std::string path = scaler_sidecar_path(model_path);
  std::ifstream probe(path);
  if (!probe) return std::nullopt;
  probe.close();
  return load_standardizer(path);
}

}  // namespace fraudbench
