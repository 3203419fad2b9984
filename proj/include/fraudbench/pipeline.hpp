#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fraudbench/config.hpp"
#include "fraudbench/metrics.hpp"
#include "fraudbench/model_io.hpp"
#include "fraudbench/report.hpp"

namespace fraudbench {

struct BenchmarkRow {
  std::string model;
  double precision = 0.0;  // macro-averaged, as are recall and f1
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;  // one per configured model, in config order
  std::string fingerprint;         // hash of the resolved config
};

namespace detail {

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::size_t hyper_uint(const ModelSpec& spec, const std::string& key,
                              std::size_t fallback) {
  const auto it = spec.hyper.find(key);
  if (it == spec.hyper.end()) return fallback;
  const double v = it->second;
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e9)
    throw std::runtime_error("model " + spec.name + ": parameter '" + key +
                             "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

inline double hyper_real(const ModelSpec& spec, const std::string& key,
                         double fallback) {
  const auto it = spec.hyper.find(key);
  if (it == spec.hyper.end()) return fallback;
  if (!std::isfinite(it->second) || it->second < 0.0)
    throw std::runtime_error("model " + spec.name + ": parameter '" + key +
                             "' must be a non-negative number");
  return it->second;
}

inline TrainConfig apply_train_overrides(TrainConfig cfg, const ModelSpec& spec) {
  cfg.epochs = hyper_uint(spec, "epochs", cfg.epochs);
  cfg.batch_size = hyper_uint(spec, "batch_size", cfg.batch_size);
  cfg.learning_rate = hyper_real(spec, "learning_rate", cfg.learning_rate);
  cfg.l2 = hyper_real(spec, "l2", cfg.l2);
  return cfg;
}

}  // namespace detail

inline std::unique_ptr<Classifier> make_classifier(const ModelSpec& spec) {
  if (spec.name == "logistic")
    return std::make_unique<LogisticClassifier>(
        detail::apply_train_overrides(logistic_default_config(), spec));
  if (spec.name == "knn")
    return std::make_unique<KnnClassifier>(detail::hyper_uint(spec, "k", 5));
  if (spec.name == "svm")
    return std::make_unique<SvmClassifier>(
        detail::apply_train_overrides(svm_default_config(), spec));
  if (spec.name == "tree") {
    TreeConfig cfg;
    cfg.max_depth = detail::hyper_uint(spec, "max_depth", cfg.max_depth);
    cfg.min_samples_split =
        detail::hyper_uint(spec, "min_samples_split", cfg.min_samples_split);
    return std::make_unique<TreeClassifier>(cfg);
  }
  if (spec.name == "mlp")
    return std::make_unique<MlpClassifier>(
        detail::apply_train_overrides(mlp_default_config(), spec));
  if (spec.name == "transformer") {
    TransformerHyper h;
    h.d_model = detail::hyper_uint(spec, "d_model", h.d_model);
    h.n_heads = detail::hyper_uint(spec, "n_heads", h.n_heads);
    h.n_layers = detail::hyper_uint(spec, "n_layers", h.n_layers);
    h.d_ff = detail::hyper_uint(spec, "d_ff", h.d_ff);
    h.dropout_rate = detail::hyper_real(spec, "dropout", h.dropout_rate);
    return std::make_unique<TransformerClassifier>(
        h, detail::apply_train_overrides(TrainConfig{}, spec));
  }
  throw std::runtime_error("unknown model '" + spec.name + "'");
}

inline std::string table_to_markdown(const BenchmarkTable& t) {
  std::string out = "| model | precision | recall | f1 | roc_auc |\n";
  out += "|---|---|---|---|---|\n";
  for (const auto& r : t.rows) {
    out += "| " + r.model + " | " + detail::fixed4(r.precision) + " | " +
           detail::fixed4(r.recall) + " | " + detail::fixed4(r.f1) + " | " +
           detail::fixed4(r.roc_auc) + " |\n";
  }
  out += "\nprecision/recall/f1 are macro-averaged over both classes.\n";
  out += "config fingerprint: `" + t.fingerprint + "`\n";
  return out;
}

// Per-model long format: every metric the single-model report carries, with
// the model name as the leading column. Reuses the single-report writer so
// the two files can never disagree on metric names.
inline std::string benchmark_metrics_csv(
    const std::vector<std::pair<std::string, EvalReport>>& reports) {
  std::string out = "model,metric,value\n";
  for (const auto& [name, rep] : reports) {
    const std::string per = metrics_to_csv(rep);
    std::size_t pos = per.find('\n') + 1;  // skip the "metric,value" header
    while (pos < per.size()) {
      std::size_t nl = per.find('\n', pos);
      if (nl == std::string::npos) nl = per.size();
      out += name + ',' + per.substr(pos, nl - pos) + '\n';
      pos = nl + 1;
    }
  }
  return out;
}

struct PipelineResult {
  BenchmarkTable table;
  std::vector<std::pair<std::string, EvalReport>> reports;  // config order
  std::vector<std::string> artifacts;  // files written, in write order
};

// The end-to-end run: load, clean, split, fit, evaluate, report. Any failure
// is rethrown as "stage <name>: <cause>" after removing whatever files this
// run had already written.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  validate_config(cfg);

  PipelineResult result;
  result.table.fingerprint = config_fingerprint(cfg);
  std::vector<std::string> written;
  std::string stage = "output";
  try {
    fs::create_directories(cfg.out_dir);
    const auto out_path = [&](const std::string& name) {
      return (fs::path(cfg.out_dir) / name).string();
    };
    const auto emit = [&](const std::string& name, const std::string& content) {
      const std::string p = out_path(name);
      write_text_file(p, content);
      written.push_back(p);
    };

    stage = "load";
    LabeledDataset full;
    if (!cfg.data_path.empty()) {
      if (!fs::exists(cfg.data_path))
        throw std::runtime_error("data file '" + cfg.data_path + "' does not exist");
      full = load_csv(cfg.data_path, cfg.schema);
    } else {
      SyntheticSpec s;
      s.kind = cfg.synth == "xor" ? SyntheticKind::XorQuadrants
                                  : SyntheticKind::GaussianBlobs;
      s.n_per_class = cfg.synth_n;
      s.n_features = cfg.synth_features;
      s.seed = cfg.synth_seed;
      s.mu = cfg.synth_mu;
      full = generate_synthetic(s);
    }
    if (!cfg.drop.empty()) {
      stage = "drop";
      full = drop_columns(full, cfg.drop);
    }

    LabeledDataset train, test;
    std::string outlier_csv;
    const auto run_balance = [&](LabeledDataset& ds) {
      stage = "balance";
      ds = balance_undersample(ds, derive_seed(cfg.seed, "balance"));
    };
    const auto run_outliers = [&](LabeledDataset& ds) {
      stage = "outliers";
      auto [kept, report] =
          remove_outliers_iqr(ds, cfg.outlier_features, cfg.outlier_fit);
      ds = std::move(kept);
      outlier_csv = outlier_report_to_csv(report);
    };
    const auto run_split = [&] {
      stage = "split";
      std::tie(train, test) =
          stratified_split(full, cfg.test_fraction, derive_seed(cfg.seed, "split"));
    };
    if (cfg.order == StageOrder::PaperOrder) {
      if (cfg.balance) run_balance(full);
      if (cfg.outliers) run_outliers(full);
      run_split();
    } else {
      run_split();
      if (cfg.balance) run_balance(train);
      if (cfg.outliers) run_outliers(train);  // test rows stay untouched
    }

    stage = "configure models";
    std::vector<std::unique_ptr<Classifier>> models;
    std::vector<bool> wants_zscore;
    bool any_zscore = false;
    for (const auto& spec : cfg.models) {
      models.push_back(make_classifier(spec));
      const bool z = cfg.standardize == StandardizeMode::On ||
                     (cfg.standardize == StandardizeMode::Auto &&
                      models.back()->standardize_by_default());
      wants_zscore.push_back(z);
      any_zscore |= z;
    }

    std::optional<Standardizer> scaler;
    LabeledDataset ztrain, ztest;
    if (any_zscore) {
      stage = "standardize";
      scaler = fit_standardizer(train);
      ztrain = standardize(train, *scaler);
      ztest = standardize(test, *scaler);
    }

    for (std::size_t i = 0; i < models.size(); ++i) {
      Classifier& clf = *models[i];
      const std::string& name = cfg.models[i].name;
      const LabeledDataset& tr = wants_zscore[i] ? ztrain : train;
      const LabeledDataset& te = wants_zscore[i] ? ztest : test;

      stage = "fit " + name;
      clf.fit(tr, derive_seed(cfg.seed, name));

      stage = "save " + name;
      const std::string model_path = out_path("model_" + name + ".bin");
      clf.save(model_path);
      written.push_back(model_path);
      if (wants_zscore[i]) {
        const std::string side = scaler_sidecar_path(model_path);
        save_standardizer(*scaler, side);
        written.push_back(side);
      }

      stage = "evaluate " + name;
      const std::vector<double> scores = clf.score_rows(te);
      const EvalReport rep = evaluate(scores, te.labels, clf.threshold());
      emit("roc_" + name + ".csv", roc_to_csv(roc_curve(scores, te.labels)));
      result.reports.emplace_back(name, rep);
      result.table.rows.push_back(
          {name, rep.macro.precision, rep.macro.recall, rep.macro.f1, rep.roc_auc});
    }

    stage = "report";
    emit("metrics.csv", benchmark_metrics_csv(result.reports));
    emit("table.md", table_to_markdown(result.table));
    if (!outlier_csv.empty()) emit("outliers.csv", outlier_csv);
  } catch (const std::exception& e) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw std::runtime_error("stage " + stage + ": " + e.what());
  }
  result.artifacts = std::move(written);
  return result;
}

}  // namespace fraudbench
