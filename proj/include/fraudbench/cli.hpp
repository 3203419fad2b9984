#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "fraudbench/pipeline.hpp"
#include "fraudbench/tsne.hpp"

namespace fraudbench {

namespace detail {

// Thrown for malformed invocations: wrong flags, bad flag values, unusable
// config files. Maps to exit code 1; genuine runtime failures map to 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParsedArgs {
  std::vector<std::string> positional;
  std::map<std::string, std::string> flags;
};

inline ParsedArgs parse_flags(const std::vector<std::string>& args,
                              const std::set<std::string>& allowed) {
  ParsedArgs out;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0) {
      const std::string name = a.substr(2);
      if (!allowed.count(name)) throw UsageError("unknown flag '" + a + "'");
      if (i + 1 >= args.size()) throw UsageError("flag '" + a + "' needs a value");
      if (!out.flags.emplace(name, args[++i]).second)
        throw UsageError("flag '" + a + "' given twice");
    } else {
      out.positional.push_back(a);
    }
  }
  return out;
}

inline std::string flag_str(const ParsedArgs& pa, const std::string& name,
                            const std::string& fallback) {
  const auto it = pa.flags.find(name);
  return it == pa.flags.end() ? fallback : it->second;
}

inline std::uint64_t flag_u64(const ParsedArgs& pa, const std::string& name,
                              std::uint64_t fallback) {
  const auto it = pa.flags.find(name);
  if (it == pa.flags.end()) return fallback;
  try {
    return parse_u64(it->second, "--" + name);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

inline double flag_real(const ParsedArgs& pa, const std::string& name,
                        double fallback) {
  const auto it = pa.flags.find(name);
  if (it == pa.flags.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const std::exception&) {
    throw UsageError("--" + name + ": expected a number, got '" + it->second + "'");
  }
}

inline bool flag_on_off(const ParsedArgs& pa, const std::string& name,
                        bool fallback) {
  const auto it = pa.flags.find(name);
  if (it == pa.flags.end()) return fallback;
  if (it->second == "on") return true;
  if (it->second == "off") return false;
  throw UsageError("--" + name + ": expected on or off");
}

inline CsvSchema flag_schema(const ParsedArgs& pa) {
  const std::string v = flag_str(pa, "schema", "auto");
  if (v == "auto") return CsvSchema::AutoDetect;
  if (v == "legacy2013") return CsvSchema::Legacy2013;
  if (v == "modern2023") return CsvSchema::Modern2023;
  throw UsageError("--schema: expected auto, legacy2013, or modern2023");
}

inline std::string one_positional(const ParsedArgs& pa, const char* what) {
  if (pa.positional.size() != 1)
    throw UsageError(std::string("expected exactly one ") + what);
  return pa.positional[0];
}

inline void no_positional(const ParsedArgs& pa) {
  if (!pa.positional.empty())
    throw UsageError("unexpected argument '" + pa.positional[0] + "'");
}

inline ExperimentConfig cli_load_config(const std::string& path) {
  try {
    return parse_config(path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

inline std::string out_file(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace detail

inline const char* cli_usage() {
  return R"(usage: fraudbench <command> [flags]

commands:
  ingest <file.csv> [--schema auto|legacy2013|modern2023]
      validate a labeled CSV and print a summary
  preprocess <file.csv> [--schema S] [--seed N] [--out DIR]
             [--balance on|off] [--outliers on|off]
             [--outlier-features A,B,C] [--outlier-fit fraud|all]
      rebalance and filter, write processed.csv plus reports
  reduce <file.csv> [--method pca|tsvd|tsne] [--seed N] [--out DIR]
         [--sample N] [--perplexity P] [--schema S]
      project rows to 2-D, write embedding.svg and embedding.csv
  train --model NAME (--data file.csv | --config FILE) [--seed N]
        [--out DIR] [--standardize auto|on|off] [--schema S]
      fit one model on the whole dataset and save the artifact
  evaluate --model-file FILE --data file.csv [--schema S] [--out DIR]
      score a saved model against a labeled dataset
  benchmark --config FILE [--seed N] [--out DIR]
      run the full pipeline and emit the comparison table
  synth --kind blobs|xor [--n N] [--features D] [--mu M] [--seed N]
        [--out DIR]
      generate a labeled fixture CSV as <DIR>/synth.csv

exit codes: 0 success, 1 usage or config error, 2 runtime failure

config file format: flat key = value lines under [section] headers,
# starts a comment, unknown keys are errors.
  [data]     path, schema (auto|legacy2013|modern2023), or a generator:
             synth (blobs|xor), synth_n, synth_features, synth_mu, synth_seed
  [pipeline] seed, balance (on|off), outliers (on|off),
             outlier_features (comma list), outlier_fit (fraud|all),
             drop (comma list), test_fraction (in (0,1)),
             order (paper|leakfree), standardize (auto|on|off)
  [models]   list = comma-separated names, then NAME.PARAM = value lines
             names: logistic, knn, svm, tree, mlp, transformer
             logistic/svm/mlp: epochs, batch_size, learning_rate, l2
             knn: k | tree: max_depth, min_samples_split
             transformer: d_model, n_heads, n_layers, d_ff, dropout,
                          epochs, batch_size, learning_rate, l2
  [output]   dir
)";
}

namespace detail {

inline int cmd_synth(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa =
      parse_flags(args, {"kind", "n", "features", "mu", "seed", "out"});
  no_positional(pa);
  const std::string kind = flag_str(pa, "kind", "");
  SyntheticSpec spec;
  if (kind == "blobs") spec.kind = SyntheticKind::GaussianBlobs;
  else if (kind == "xor") spec.kind = SyntheticKind::XorQuadrants;
  else throw UsageError("--kind is required: blobs or xor");
  spec.n_per_class = flag_u64(pa, "n", 100);
  spec.n_features = flag_u64(pa, "features", 2);
  spec.mu = flag_real(pa, "mu", 3.0);
  spec.seed = flag_u64(pa, "seed", 42);
  const std::string dir = flag_str(pa, "out", ".");

  const LabeledDataset ds = generate_synthetic(spec);
  std::filesystem::create_directories(dir);
  const std::string path = out_file(dir, "synth.csv");
  write_csv(ds, path);
  out << "wrote " << path << " (" << ds.n_rows() << " rows, "
      << ds.n_cols() << " features)\n";
  return 0;
}

inline void print_summary(const LabeledDataset& ds, const std::string& path,
                          std::ostream& out) {
  const ClassCounts counts = class_counts(ds);
  out << "file: " << path << "\n";
  out << "rows: " << ds.n_rows() << "\n";
  out << "features: " << ds.n_cols() << "\n";
  out << "fraud: " << counts.n_fraud << "\n";
  out << "legit: " << counts.n_legit << "\n";
  out << "fraud_ratio: " << format_double(counts.fraud_ratio) << "\n";
}

inline int cmd_ingest(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(args, {"schema"});
  const std::string path = one_positional(pa, "CSV path");
  const LabeledDataset ds = load_csv(path, flag_schema(pa));
  print_summary(ds, path, out);
  return 0;
}

inline int cmd_preprocess(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(args, {"schema", "seed", "out", "balance",
                                     "outliers", "outlier-features",
                                     "outlier-fit"});
  const std::string path = one_positional(pa, "CSV path");
  const std::uint64_t seed = flag_u64(pa, "seed", 42);
  const std::string dir = flag_str(pa, "out", "out");
  const bool balance = flag_on_off(pa, "balance", true);
  const bool outliers = flag_on_off(pa, "outliers", true);
  std::vector<std::string> features = default_outlier_features();
  if (pa.flags.count("outlier-features")) {
    try {
      features = parse_name_list(pa.flags.at("outlier-features"),
                                 "--outlier-features");
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  OutlierFit fit = OutlierFit::FraudClassOnly;
  const std::string fit_text = flag_str(pa, "outlier-fit", "fraud");
  if (fit_text == "all") fit = OutlierFit::AllRows;
  else if (fit_text != "fraud")
    throw UsageError("--outlier-fit: expected fraud or all");

  LabeledDataset ds = load_csv(path, flag_schema(pa));
  const std::size_t rows_in = ds.n_rows();
  std::filesystem::create_directories(dir);

  if (balance) ds = balance_undersample(ds, derive_seed(seed, "balance"));
  std::string outlier_csv;
  if (outliers) {
    auto [kept, report] = remove_outliers_iqr(ds, features, fit);
    ds = std::move(kept);
    outlier_csv = outlier_report_to_csv(report);
  }

  const std::string processed = out_file(dir, "processed.csv");
  write_csv(ds, processed);
  emit_correlation_csv(pearson_correlation(ds), out_file(dir, "correlation.csv"));
  if (!outlier_csv.empty())
    write_text_file(out_file(dir, "outliers.csv"), outlier_csv);

  out << "rows in: " << rows_in << "\n";
  print_summary(ds, processed, out);
  return 0;
}

inline int cmd_reduce(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(
      args, {"method", "seed", "out", "sample", "perplexity", "schema"});
  const std::string path = one_positional(pa, "CSV path");
  const std::string method = flag_str(pa, "method", "pca");
  if (method != "pca" && method != "tsvd" && method != "tsne")
    throw UsageError("--method: expected pca, tsvd, or tsne");
  const std::uint64_t seed = flag_u64(pa, "seed", 42);
  const std::string dir = flag_str(pa, "out", "out");
  const std::uint64_t sample = flag_u64(pa, "sample", 0);

  LabeledDataset ds = load_csv(path, flag_schema(pa));
  if (sample > 0 && sample < ds.n_rows()) {
    ds = shuffle(ds, derive_seed(seed, "sample"));
    std::vector<std::size_t> keep(sample);
    for (std::size_t i = 0; i < sample; ++i) keep[i] = i;
    ds = subset_rows(ds, keep);
  }

  Embedding2D emb;
  if (method == "pca") {
    emb = pca_2d(ds);
  } else if (method == "tsvd") {
    emb = truncated_svd_2d(ds);
  } else {
    TsneConfig cfg;
    cfg.perplexity = flag_real(pa, "perplexity", 30.0);
    cfg.seed = seed;
    emb = tsne_2d(ds, cfg);
  }

  std::filesystem::create_directories(dir);
  const std::string svg = out_file(dir, "embedding.svg");
  emit_scatter_svg(emb, svg);
  out << "wrote " << svg << " and " << scatter_companion_csv_path(svg) << "\n";
  for (const auto& [key, value] : emb.diagnostics)
    out << key << ": " << format_double(value) << "\n";
  return 0;
}

inline int cmd_train(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(
      args, {"model", "data", "config", "seed", "out", "standardize", "schema"});
  no_positional(pa);
  if (pa.flags.count("data") && pa.flags.count("config"))
    throw UsageError("--data and --config are mutually exclusive");

  std::optional<ExperimentConfig> cfg;
  if (pa.flags.count("config")) cfg = cli_load_config(pa.flags.at("config"));

  std::string name = flag_str(pa, "model", "");
  if (name.empty()) {
    if (cfg && cfg->models.size() == 1) name = cfg->models[0].name;
    else throw UsageError("--model is required");
  }
  if (!model_registry().count(name))
    throw UsageError("unknown model '" + name + "'");

  ModelSpec spec{name, {}};
  if (cfg)
    for (const auto& s : cfg->models)
      if (s.name == name) spec = s;

  LabeledDataset ds;
  if (pa.flags.count("data")) {
    ds = load_csv(pa.flags.at("data"), flag_schema(pa));
  } else if (cfg) {
    ExperimentConfig source = *cfg;
    validate_config(source);
    if (!source.data_path.empty()) {
      ds = load_csv(source.data_path, source.schema);
    } else {
      SyntheticSpec s;
      s.kind = source.synth == "xor" ? SyntheticKind::XorQuadrants
                                     : SyntheticKind::GaussianBlobs;
      s.n_per_class = source.synth_n;
      s.n_features = source.synth_features;
      s.seed = source.synth_seed;
      s.mu = source.synth_mu;
      ds = generate_synthetic(s);
    }
  } else {
    throw UsageError("either --data or --config is required");
  }

  const std::uint64_t seed = flag_u64(pa, "seed", 42);
  const std::string dir = flag_str(pa, "out", "out");
  const std::string std_text = flag_str(pa, "standardize", "auto");

  auto clf = make_classifier(spec);
  bool zscore = false;
  if (std_text == "on") zscore = true;
  else if (std_text == "auto") zscore = clf->standardize_by_default();
  else if (std_text != "off")
    throw UsageError("--standardize: expected auto, on, or off");

  std::optional<Standardizer> scaler;
  if (zscore) {
    scaler = fit_standardizer(ds);
    ds = standardize(ds, *scaler);
  }
  clf->fit(ds, derive_seed(seed, name));

  std::filesystem::create_directories(dir);
  const std::string model_path = out_file(dir, "model_" + name + ".bin");
  clf->save(model_path);
  if (scaler) save_standardizer(*scaler, scaler_sidecar_path(model_path));
  out << "wrote " << model_path << (scaler ? " (with scaler sidecar)" : "")
      << "\n";
  return 0;
}

inline int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(args, {"model-file", "data", "schema", "out"});
  no_positional(pa);
  if (!pa.flags.count("model-file")) throw UsageError("--model-file is required");
  if (!pa.flags.count("data")) throw UsageError("--data is required");

  const auto clf = load_any_model(pa.flags.at("model-file"));
  const auto scaler = load_sidecar_standardizer(pa.flags.at("model-file"));
  LabeledDataset ds = load_csv(pa.flags.at("data"), flag_schema(pa));
  if (scaler) ds = standardize(ds, *scaler);

  const std::vector<double> scores = clf->score_rows(ds);
  const EvalReport rep = evaluate(scores, ds.labels, clf->threshold());
  out << "model: " << clf->name() << "\n" << metrics_to_csv(rep);

  if (pa.flags.count("out")) {
    const std::string dir = pa.flags.at("out");
    std::filesystem::create_directories(dir);
    write_text_file(out_file(dir, "metrics.csv"), metrics_to_csv(rep));
    write_text_file(out_file(dir, "roc_" + clf->name() + ".csv"),
                    roc_to_csv(roc_curve(scores, ds.labels)));
  }
  return 0;
}

inline int cmd_benchmark(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(args, {"config", "seed", "out"});
  no_positional(pa);
  if (!pa.flags.count("config")) throw UsageError("--config is required");
  ExperimentConfig cfg = cli_load_config(pa.flags.at("config"));
  if (pa.flags.count("seed")) cfg.seed = flag_u64(pa, "seed", cfg.seed);
  if (pa.flags.count("out")) cfg.out_dir = pa.flags.at("out");

  const PipelineResult result = run_pipeline(cfg);
  out << table_to_markdown(result.table);
  out << "wrote " << result.artifacts.size() << " files to " << cfg.out_dir
      << "\n";
  return 0;
}

// ROC files spell the sentinel threshold of the (0,0) anchor point as a
// literal "inf", which the strict CSV number parser refuses.
inline double parse_roc_field(std::string_view text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_double(text);
}

// Hidden cross-check: rebuilds every benchmark table value from the emitted
// per-model ROC curve plus the threshold and supports recorded in
// metrics.csv, and demands exact agreement.
inline int cmd_verify(const std::vector<std::string>& args, std::ostream& out) {
  const auto pa = parse_flags(args, {"out"});
  no_positional(pa);
  const std::string dir = flag_str(pa, "out", "out");

  const std::string metrics_path = out_file(dir, "metrics.csv");
  std::ifstream in(metrics_path);
  if (!in) throw std::runtime_error("cannot open '" + metrics_path + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "model,metric,value")
    throw std::runtime_error("'" + metrics_path + "' is not a benchmark metrics file");

  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, double>> stored;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      throw std::runtime_error(metrics_path + ":" + std::to_string(line_no) +
                               ": expected 3 fields");
    const std::string model(trim(fields[0]));
    if (!stored.count(model)) order.push_back(model);
    stored[model][std::string(trim(fields[1]))] = parse_double(trim(fields[2]));
  }

  bool all_ok = true;
  for (const std::string& model : order) {
    const auto& m = stored.at(model);
    const auto need = [&](const char* key) {
      const auto it = m.find(key);
      if (it == m.end())
        throw std::runtime_error("metrics.csv: model " + model +
                                 " is missing '" + std::string(key) + "'");
      return it->second;
    };
    const double threshold = need("threshold");
    const auto n0 = static_cast<std::size_t>(need("support_class0"));
    const auto n1 = static_cast<std::size_t>(need("support_class1"));

    const std::string roc_path = out_file(dir, "roc_" + model + ".csv");
    std::ifstream roc_in(roc_path);
    if (!roc_in) throw std::runtime_error("cannot open '" + roc_path + "'");
    std::string roc_line;
    if (!std::getline(roc_in, roc_line) || trim(roc_line) != "fpr,tpr,threshold")
      throw std::runtime_error("'" + roc_path + "' is not a ROC file");
    std::vector<RocPoint> curve;
    while (std::getline(roc_in, roc_line)) {
      if (trim(roc_line).empty()) continue;
      const auto fields = split(roc_line, ',');
      if (fields.size() != 3)
        throw std::runtime_error("'" + roc_path + "': expected 3 fields per row");
      curve.push_back({parse_roc_field(trim(fields[0])),
                       parse_roc_field(trim(fields[1])),
                       parse_roc_field(trim(fields[2]))});
    }
    if (curve.empty()) throw std::runtime_error("'" + roc_path + "' has no points");

    // The curve point matching "score >= threshold counts as positive" is
    // the last one whose own threshold is still >= the decision threshold.
    RocPoint at{0.0, 0.0, 0.0};
    for (const auto& p : curve)
      if (p.threshold >= threshold) at = p;

    ConfusionMatrix cm;
    cm.tp = static_cast<std::size_t>(std::llround(at.tpr * static_cast<double>(n1)));
    cm.fp = static_cast<std::size_t>(std::llround(at.fpr * static_cast<double>(n0)));
    cm.fn = n1 - cm.tp;
    cm.tn = n0 - cm.fp;
    const Prf class1 = precision_recall_f1(cm);
    const Prf class0 = precision_recall_f1(flip_positive_class(cm));
    const Prf macro = macro_average(class0, class1);
    const double auc = trapezoid_area(curve);

    const std::pair<const char*, double> checks[] = {
        {"precision_macro", macro.precision},
        {"recall_macro", macro.recall},
        {"f1_macro", macro.f1},
        {"roc_auc", auc},
    };
    bool ok = true;
    for (const auto& [key, recomputed] : checks) {
      if (need(key) != recomputed) {
        out << model << ": mismatch on " << key << " (stored "
            << format_double(need(key)) << ", recomputed "
            << format_double(recomputed) << ")\n";
        ok = false;
      }
    }
    if (ok) out << model << ": ok\n";
    all_ok &= ok;
  }
  return all_ok ? 0 : 2;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  if (args.empty()) {
    err << cli_usage();
    return 1;
  }
  const std::string& cmd = args[0];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    out << cli_usage();
    return 0;
  }
  try {
    if (cmd == "ingest") return detail::cmd_ingest(args, out);
    if (cmd == "preprocess") return detail::cmd_preprocess(args, out);
    if (cmd == "reduce") return detail::cmd_reduce(args, out);
    if (cmd == "train") return detail::cmd_train(args, out);
    if (cmd == "evaluate") return detail::cmd_evaluate(args, out);
    if (cmd == "benchmark") return detail::cmd_benchmark(args, out);
    if (cmd == "synth") return detail::cmd_synth(args, out);
    if (cmd == "verify") return detail::cmd_verify(args, out);
    err << "unknown command '" << cmd << "'\n\n" << cli_usage();
    return 1;
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << "\n\n" << cli_usage();
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fraudbench
