#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fraudbench/dataset.hpp"
#include "fraudbench/preprocess.hpp"
#include "fraudbench/rng.hpp"
#include "fraudbench/text.hpp"

namespace fraudbench {

// Whether the split happens before or after the whole-dataset rebalancing
// and outlier filtering. PaperOrder cleans first and splits last; LeakFree
// splits first so nothing fitted downstream ever sees a test row.
enum class StageOrder { PaperOrder, LeakFree };

// Auto defers to each model's own preference (distance- and gradient-based
// models want z-scored inputs, trees and logistic regression do not care).
enum class StandardizeMode { Auto, On, Off };

struct ModelSpec {
  std::string name;
  std::map<std::string, double> hyper;  // overrides; absent keys keep defaults
};

struct ExperimentConfig {
  // [data] Exactly one source: a CSV path or a synthetic generator.
  std::string data_path;
  CsvSchema schema = CsvSchema::AutoDetect;
  std::string synth;  // "", "blobs", or "xor"
  std::size_t synth_n = 100;  // rows per class
  std::size_t synth_features = 2;
  double synth_mu = 3.0;
  std::uint64_t synth_seed = 42;

  // [pipeline]
  std::uint64_t seed = 42;
  bool balance = true;
  bool outliers = true;
  std::vector<std::string> outlier_features = default_outlier_features();
  OutlierFit outlier_fit = OutlierFit::FraudClassOnly;
  std::vector<std::string> drop;  // columns removed right after load
  double test_fraction = 0.2;
  StageOrder order = StageOrder::PaperOrder;
  StandardizeMode standardize = StandardizeMode::Auto;

  // [models]
  std::vector<ModelSpec> models;

  // [output]
  std::string out_dir = "out";
};

// Model names the harness can build, with the hyperparameter keys each one
// accepts in a config file.
inline const std::map<std::string, std::set<std::string>>& model_registry() {
  static const std::map<std::string, std::set<std::string>> registry = {
      {"logistic", {"epochs", "batch_size", "learning_rate", "l2"}},
      {"knn", {"k"}},
      {"svm", {"epochs", "batch_size", "learning_rate", "l2"}},
      {"tree", {"max_depth", "min_samples_split"}},
      {"mlp", {"epochs", "batch_size", "learning_rate", "l2"}},
      {"transformer",
       {"epochs", "batch_size", "learning_rate", "l2", "d_model", "n_heads",
        "n_layers", "d_ff", "dropout"}},
  };
  return registry;
}

namespace detail {

inline std::uint64_t parse_u64(std::string_view text, const std::string& where) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw std::runtime_error(where + ": expected a non-negative integer, got '" +
                             std::string(text) + "'");
  return value;
}

inline bool parse_on_off(std::string_view text, const std::string& where) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw std::runtime_error(where + ": expected on or off, got '" +
                           std::string(text) + "'");
}

inline std::vector<std::string> parse_name_list(std::string_view text,
                                                const std::string& where) {
  std::vector<std::string> out;
  for (const auto piece : split(text, ',')) {
    const auto name = trim(piece);
    if (name.empty()) throw std::runtime_error(where + ": empty entry in list");
    out.emplace_back(name);
  }
  if (out.empty()) throw std::runtime_error(where + ": empty list");
  return out;
}

}  // namespace detail

inline std::string to_string(CsvSchema s) {
  switch (s) {
    case CsvSchema::Legacy2013: return "legacy2013";
    case CsvSchema::Modern2023: return "modern2023";
    default: return "auto";
  }
}

inline std::string to_string(StageOrder o) {
  return o == StageOrder::LeakFree ? "leakfree" : "paper";
}

inline std::string to_string(StandardizeMode m) {
  switch (m) {
    case StandardizeMode::On: return "on";
    case StandardizeMode::Off: return "off";
    default: return "auto";
  }
}

inline std::string to_string(OutlierFit f) {
  return f == OutlierFit::AllRows ? "all" : "fraud";
}

// Parses the flat key=value format. `origin` names the source in error
// messages (a path, or something like "<args>" for synthesized text).
inline ExperimentConfig parse_config_text(const std::string& text,
                                          const std::string& origin) {
  ExperimentConfig cfg;
  std::string section;
  std::map<std::string, std::map<std::string, double>> pending_hyper;
  std::set<std::string> listed;
  bool have_models = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto here = [&](const std::string& msg) {
      return std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw here("unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "data" && section != "pipeline" && section != "models" &&
          section != "output")
        throw here("unknown section [" + section + "]");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw here("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw here("empty key");
    if (section.empty()) throw here("key '" + key + "' appears before any section");
    const std::string where = "[" + section + "] " + key;

    try {
      if (section == "data") {
        if (key == "path") {
          cfg.data_path = value;
        } else if (key == "schema") {
          if (value == "auto") cfg.schema = CsvSchema::AutoDetect;
          else if (value == "legacy2013") cfg.schema = CsvSchema::Legacy2013;
          else if (value == "modern2023") cfg.schema = CsvSchema::Modern2023;
          else throw std::runtime_error(where + ": expected auto, legacy2013, or modern2023");
        } else if (key == "synth") {
          if (value != "blobs" && value != "xor")
            throw std::runtime_error(where + ": expected blobs or xor");
          cfg.synth = value;
        } else if (key == "synth_n") {
          cfg.synth_n = detail::parse_u64(value, where);
        } else if (key == "synth_features") {
          cfg.synth_features = detail::parse_u64(value, where);
        } else if (key == "synth_mu") {
          cfg.synth_mu = parse_double(value);
        } else if (key == "synth_seed") {
          cfg.synth_seed = detail::parse_u64(value, where);
        } else {
          throw std::runtime_error("unknown key '" + key + "' in [data]");
        }
      } else if (section == "pipeline") {
        if (key == "seed") cfg.seed = detail::parse_u64(value, where);
        else if (key == "balance") cfg.balance = detail::parse_on_off(value, where);
        else if (key == "outliers") cfg.outliers = detail::parse_on_off(value, where);
        else if (key == "outlier_features")
          cfg.outlier_features = detail::parse_name_list(value, where);
        else if (key == "outlier_fit") {
          if (value == "fraud") cfg.outlier_fit = OutlierFit::FraudClassOnly;
          else if (value == "all") cfg.outlier_fit = OutlierFit::AllRows;
          else throw std::runtime_error(where + ": expected fraud or all");
        } else if (key == "drop") {
          cfg.drop = detail::parse_name_list(value, where);
        } else if (key == "test_fraction") {
          cfg.test_fraction = parse_double(value);
        } else if (key == "order") {
          if (value == "paper") cfg.order = StageOrder::PaperOrder;
          else if (value == "leakfree") cfg.order = StageOrder::LeakFree;
          else throw std::runtime_error(where + ": expected paper or leakfree");
        } else if (key == "standardize") {
          if (value == "auto") cfg.standardize = StandardizeMode::Auto;
          else if (value == "on") cfg.standardize = StandardizeMode::On;
          else if (value == "off") cfg.standardize = StandardizeMode::Off;
          else throw std::runtime_error(where + ": expected auto, on, or off");
        } else {
          throw std::runtime_error("unknown key '" + key + "' in [pipeline]");
        }
      } else if (section == "models") {
        if (key == "list") {
          if (have_models) throw std::runtime_error("[models] list given twice");
          have_models = true;
          for (const auto& name : detail::parse_name_list(value, where)) {
            if (!model_registry().count(name))
              throw std::runtime_error("unknown model '" + name + "' in [models] list");
            if (!listed.insert(name).second)
              throw std::runtime_error("model '" + name + "' listed twice");
            cfg.models.push_back({name, {}});
          }
        } else if (const auto dot = key.find('.'); dot != std::string::npos) {
          const std::string model = key.substr(0, dot);
          const std::string param = key.substr(dot + 1);
          const auto reg = model_registry().find(model);
          if (reg == model_registry().end())
            throw std::runtime_error("unknown model '" + model + "' in [models]");
          if (!reg->second.count(param))
            throw std::runtime_error("model '" + model +
                                     "' has no parameter '" + param + "'");
          if (!pending_hyper[model].emplace(param, parse_double(value)).second)
            throw std::runtime_error(where + " given twice");
        } else {
          throw std::runtime_error("unknown key '" + key + "' in [models]");
        }
      } else {  // output
        if (key == "dir") cfg.out_dir = value;
        else throw std::runtime_error("unknown key '" + key + "' in [output]");
      }
    } catch (const std::runtime_error& e) {
      throw here(e.what());
    } catch (const std::exception& e) {
      throw here(where + ": " + e.what());
    }
  }

  for (auto& [model, hyper] : pending_hyper) {
    if (!listed.count(model))
      throw std::runtime_error(origin + ": hyperparameters given for model '" +
                               model + "' which is not in the [models] list");
    for (auto& spec : cfg.models)
      if (spec.name == model) spec.hyper = std::move(hyper);
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text, path);
}

// Structural checks that hold regardless of what is on disk; path existence
// is checked when the pipeline actually runs.
inline void validate_config(const ExperimentConfig& cfg) {
  const bool has_path = !cfg.data_path.empty();
  const bool has_synth = !cfg.synth.empty();
  if (has_path && has_synth)
    throw std::runtime_error("config: [data] path and synth are mutually exclusive");
  if (!has_path && !has_synth)
    throw std::runtime_error("config: [data] needs either path or synth");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw std::runtime_error("config: test_fraction must lie in (0,1)");
  if (cfg.models.empty())
    throw std::runtime_error("config: [models] list is empty");
  if (cfg.outliers && cfg.outlier_features.empty())
    throw std::runtime_error("config: outliers are on but no features are listed");
  if (cfg.out_dir.empty()) throw std::runtime_error("config: output dir is empty");
}

// Canonical text of the RESOLVED configuration: every field appears, in a
// fixed order, defaults included. Two configs that behave identically
// serialize identically, and the fingerprint below is a hash of this text.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out = "[data]\n";
  out += "path = " + cfg.data_path + "\n";
  out += "schema = " + to_string(cfg.schema) + "\n";
  out += "synth = " + cfg.synth + "\n";
  out += "synth_n = " + std::to_string(cfg.synth_n) + "\n";
  out += "synth_features = " + std::to_string(cfg.synth_features) + "\n";
  out += "synth_mu = " + format_double(cfg.synth_mu) + "\n";
  out += "synth_seed = " + std::to_string(cfg.synth_seed) + "\n";
  out += "[pipeline]\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "balance = " + std::string(cfg.balance ? "on" : "off") + "\n";
  out += "outliers = " + std::string(cfg.outliers ? "on" : "off") + "\n";
  out += "outlier_features =";
  for (std::size_t i = 0; i < cfg.outlier_features.size(); ++i)
    out += (i ? "," : " ") + cfg.outlier_features[i];
  out += "\n";
  out += "outlier_fit = " + to_string(cfg.outlier_fit) + "\n";
  out += "drop =";
  for (std::size_t i = 0; i < cfg.drop.size(); ++i) out += (i ? "," : " ") + cfg.drop[i];
  out += "\n";
  out += "test_fraction = " + format_double(cfg.test_fraction) + "\n";
  out += "order = " + to_string(cfg.order) + "\n";
  out += "standardize = " + to_string(cfg.standardize) + "\n";
  out += "[models]\n";
  out += "list =";
  for (std::size_t i = 0; i < cfg.models.size(); ++i)
    out += (i ? "," : " ") + cfg.models[i].name;
  out += "\n";
  for (const auto& spec : cfg.models)
    for (const auto& [param, value] : spec.hyper)
      out += spec.name + "." + param + " = " + format_double(value) + "\n";
  out += "[output]\n";
  out += "dir = " + cfg.out_dir + "\n";
  return out;
}

// Output location does not influence results, so two runs of the same
// experiment into different directories share a fingerprint.
inline std::string config_fingerprint(const ExperimentConfig& cfg) {
  ExperimentConfig canon = cfg;
  canon.out_dir = "out";
  const std::uint64_t h = fnv1a64(serialize_config(canon));
  static const char* digits = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 0; i < 16; ++i) hex[15 - i] = digits[(h >> (4 * i)) & 0xF];
  return hex;
}

}  // namespace fraudbench
