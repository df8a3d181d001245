#pragma once

// Holdout evaluation metrics. Undefined values (AUC with one class, R^2 with a
// constant truth) are NaN and serialize as null.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "discover/error.hpp"
#include "discover/task.hpp"

namespace discover {

enum class MetricId { accuracy, f1, precision, recall, auc, rmse, r2, mae };

inline std::string_view to_string(MetricId id) {
  switch (id) {
    case MetricId::accuracy: return "accuracy";
    case MetricId::f1: return "f1";
    case MetricId::precision: return "precision";
    case MetricId::recall: return "recall";
    case MetricId::auc: return "auc";
    case MetricId::rmse: return "rmse";
    case MetricId::r2: return "r2";
    case MetricId::mae: return "mae";
  }
  return "?";
}

inline MetricId metric_from_string(std::string_view s) {
  for (auto id : {MetricId::accuracy, MetricId::f1, MetricId::precision, MetricId::recall,
                  MetricId::auc, MetricId::rmse, MetricId::r2, MetricId::mae})
    if (to_string(id) == s) return id;
  fail(ErrorKind::invalid_argument, "unknown metric id '" + std::string(s) + "'");
}

inline bool higher_is_better(MetricId id) { return id != MetricId::rmse && id != MetricId::mae; }

inline bool metric_applies(MetricId id, Task task) {
  const bool regression = id == MetricId::rmse || id == MetricId::r2 || id == MetricId::mae;
  return regression == (task == Task::regression);
}

struct MetricSet {
  Task task = Task::regression;
  std::map<MetricId, double> values;

  double at(MetricId id) const {
    auto it = values.find(id);
    if (it == values.end())
      fail(ErrorKind::invalid_argument, "metric '" + std::string(to_string(id)) + "' not in set");
    return it->second;
  }
};

// Mann-Whitney form of the AUC: P(score_pos > score_neg) + P(tie) / 2,
// computed from midranks of the pooled scores.
inline double auc_score(std::span<const double> labels, std::span<const double> scores) {
  require(labels.size() == scores.size() && !labels.empty(), ErrorKind::invalid_argument,
          "labels and scores must be same nonzero length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] > 0.5) {
        rank_sum += midrank;
        positives += 1.0;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

// Point metrics come from the confusion matrix at `threshold`; F1, precision
// and recall are for the positive class. Empty denominators give 0.
inline MetricSet classification_metrics(std::span<const double> labels,
                                        std::span<const double> scores, double threshold = 0.5) {
  require(labels.size() == scores.size() && !labels.empty(), ErrorKind::invalid_argument,
          "labels and scores must be same nonzero length");
  double tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] > 0.5;
    const bool predicted = scores[i] >= threshold;
    if (truth && predicted) ++tp;
    else if (!truth && !predicted) ++tn;
    else if (predicted) ++fp;
    else ++fn;
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  MetricSet set;
  set.task = Task::binary_classification;
  set.values = {{MetricId::accuracy, (tp + tn) / static_cast<double>(labels.size())},
                {MetricId::f1, f1},
                {MetricId::precision, precision},
                {MetricId::recall, recall},
                {MetricId::auc, auc_score(labels, scores)}};
  return set;
}

inline MetricSet regression_metrics(std::span<const double> truth,
                                    std::span<const double> predictions) {
  require(truth.size() == predictions.size() && !truth.empty(), ErrorKind::invalid_argument,
          "truth and predictions must be same nonzero length");
  const double n = static_cast<double>(truth.size());
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double sse = 0.0, sst = 0.0, sae = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - predictions[i];
    sse += e * e;
    sae += std::abs(e);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  MetricSet set;
  set.task = Task::regression;
  set.values = {{MetricId::rmse, std::sqrt(sse / n)},
                {MetricId::r2, sst > 0 ? 1.0 - sse / sst : std::numeric_limits<double>::quiet_NaN()},
                {MetricId::mae, sae / n}};
  return set;
}

inline MetricSet compute_metrics(Task task, std::span<const double> truth,
                                 std::span<const double> predictions) {
  return task == Task::regression ? regression_metrics(truth, predictions)
                                  : classification_metrics(truth, predictions);
}

inline double compute_metric(MetricId id, Task task, std::span<const double> truth,
                             std::span<const double> predictions) {
  require(metric_applies(id, task), ErrorKind::invalid_argument, "metric does not fit the task");
  return compute_metrics(task, truth, predictions).at(id);
}

}  // namespace discover
