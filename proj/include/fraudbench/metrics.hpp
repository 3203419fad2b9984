#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraudbench/text.hpp"

namespace fraudbench {

// Fraud (label 1) is the positive class everywhere.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

namespace detail {

inline void check_scores_and_truth(std::span<const double> scores,
                                   std::span<const int> truth) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("metrics: scores and truth lengths differ");
  std::size_t pos = 0, neg = 0;
  for (const int y : truth) {
    if (y != 0 && y != 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
    (y == 1 ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("metrics: truth must contain both classes");
  for (const double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("metrics: non-finite score");
}

}  // namespace detail

inline ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                              std::span<const int> truth,
                                              double threshold) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("metrics: scores and truth lengths differ");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = truth[i] == 1;
    if (predicted && actual)
      ++cm.tp;
    else if (predicted && !actual)
      ++cm.fp;
    else if (!predicted && actual)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

// Positive-class precision/recall/F1 with the 0/0 -> 0 convention: a class
// that is never predicted (or never occurs) scores 0, not NaN.
inline Prf precision_recall_f1(const ConfusionMatrix& cm) {
  Prf out;
  const double tp = static_cast<double>(cm.tp);
  out.precision = cm.tp + cm.fp ? tp / static_cast<double>(cm.tp + cm.fp) : 0.0;
  out.recall = cm.tp + cm.fn ? tp / static_cast<double>(cm.tp + cm.fn) : 0.0;
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

// The same confusion matrix seen from class 0's side.
inline ConfusionMatrix flip_positive_class(const ConfusionMatrix& cm) {
  return {cm.tn, cm.fn, cm.tp, cm.fp};
}

inline Prf macro_average(const Prf& class0, const Prf& class1) {
  return {(class0.precision + class1.precision) / 2.0,
          (class0.recall + class1.recall) / 2.0, (class0.f1 + class1.f1) / 2.0};
}

// One point per distinct score, thresholds descending, with (0,0,+inf)
// prepended: predicting positive at score >= threshold, tied scores move
// together so the curve crosses tied blocks diagonally.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                       std::span<const int> truth) {
  detail::check_scores_and_truth(scores, truth);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double n_pos = 0.0, n_neg = 0.0;
  for (const int y : truth) (y == 1 ? n_pos : n_neg) += 1.0;

  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    curve.push_back({fp / n_neg, tp / n_pos, s});
  }
  return curve;
}

// Mann-Whitney rank statistic with half credit for ties, via midranks:
// AUC = (sum of positive ranks - n_pos(n_pos+1)/2) / (n_pos * n_neg).
inline double roc_auc(std::span<const double> scores, std::span<const int> truth) {
  detail::check_scores_and_truth(scores, truth);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of i+1..j
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
    i = j;
  }

  double rank_sum = 0.0, n_pos = 0.0, n_neg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (truth[k] == 1) {
      rank_sum += rank[k];
      n_pos += 1.0;
    } else {
      n_neg += 1.0;
    }
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

struct EvalReport {
  ConfusionMatrix confusion;
  Prf class0;
  Prf class1;
  Prf macro;
  Prf weighted;  // support-weighted, emitted alongside macro for comparison
  double accuracy = 0.0;
  double roc_auc = 0.0;
  double threshold = 0.5;
  std::size_t support0 = 0;
  std::size_t support1 = 0;
  std::vector<RocPoint> roc_points;
};

inline EvalReport evaluate(std::span<const double> scores, std::span<const int> truth,
                           double threshold = 0.5) {
  detail::check_scores_and_truth(scores, truth);
  EvalReport r;
  r.threshold = threshold;
  r.confusion = confusion_at_threshold(scores, truth, threshold);
  r.class1 = precision_recall_f1(r.confusion);
  r.class0 = precision_recall_f1(flip_positive_class(r.confusion));
  r.macro = macro_average(r.class0, r.class1);
  r.support1 = r.confusion.tp + r.confusion.fn;
  r.support0 = r.confusion.tn + r.confusion.fp;
  const double total = static_cast<double>(r.confusion.total());
  const double w0 = static_cast<double>(r.support0) / total;
  const double w1 = static_cast<double>(r.support1) / total;
  r.weighted = {w0 * r.class0.precision + w1 * r.class1.precision,
                w0 * r.class0.recall + w1 * r.class1.recall,
                w0 * r.class0.f1 + w1 * r.class1.f1};
  r.accuracy = static_cast<double>(r.confusion.tp + r.confusion.tn) / total;
  r.roc_points = roc_curve(scores, truth);
  r.roc_auc = roc_auc(scores, truth);
  return r;
}

// Long key/value layout so downstream checks can read single fields without a
// table parser.
inline std::string metrics_to_csv(const EvalReport& r) {
  std::string out = "metric,value\n";
  const auto add = [&out](const std::string& k, double v) {
    out += k;
    out += ',';
    out += format_double(v);
    out += '\n';
  };
  add("accuracy", r.accuracy);
  add("precision_class0", r.class0.precision);
  add("recall_class0", r.class0.recall);
  add("f1_class0", r.class0.f1);
  add("support_class0", static_cast<double>(r.support0));
  add("precision_class1", r.class1.precision);
  add("recall_class1", r.class1.recall);
  add("f1_class1", r.class1.f1);
  add("support_class1", static_cast<double>(r.support1));
  add("precision_macro", r.macro.precision);
  add("recall_macro", r.macro.recall);
  add("f1_macro", r.macro.f1);
  add("precision_weighted", r.weighted.precision);
  add("recall_weighted", r.weighted.recall);
  add("f1_weighted", r.weighted.f1);
  add("roc_auc", r.roc_auc);
  add("threshold", r.threshold);
  add("tp", static_cast<double>(r.confusion.tp));
  add("fp", static_cast<double>(r.confusion.fp));
  add("tn", static_cast<double>(r.confusion.tn));
  add("fn", static_cast<double>(r.confusion.fn));
  return out;
}

inline std::string roc_to_csv(const std::vector<RocPoint>& curve) {
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : curve) {
    out += format_double(p.fpr);
    out += ',';
    out += format_double(p.tpr);
    out += ',';
    out += format_double(p.threshold);
    out += '\n';
  }
  return out;
}

}  // namespace fraudbench
