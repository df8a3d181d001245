#include <gtest/gtest.h>

#include <cmath>

#include "discover/metrics.hpp"
#include "discover/rng.hpp"

using namespace discover;

namespace {

double brute_force_auc(const std::vector<double>& labels, const std::vector<double>& scores) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0.5) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] > 0.5) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Builds labels/scores realising a given confusion matrix at threshold 0.5.
void confusion(int tp, int fp, int fn, int tn, std::vector<double>& labels, std::vector<double>& scores) {
  auto add = [&](int count, double label, double score) {
    for (int i = 0; i < count; ++i) {
      labels.push_back(label);
      scores.push_back(score);
    }
  };
  add(tp, 1, 0.9);
  add(fp, 0, 0.8);
  add(fn, 1, 0.2);
  add(tn, 0, 0.1);
}

}  // namespace

TEST(Classification, PerfectClassifier) {
  const std::vector<double> labels{1, 0}, scores{0.9, 0.1};
  const auto m = classification_metrics(labels, scores);
  EXPECT_EQ(m.at(MetricId::accuracy), 1.0);
  EXPECT_EQ(m.at(MetricId::f1), 1.0);
  EXPECT_EQ(m.at(MetricId::auc), 1.0);
}

TEST(Classification, ConfusionMatrixArithmetic) {
  std::vector<double> labels, scores;
  confusion(50, 10, 5, 35, labels, scores);
  const auto m = classification_metrics(labels, scores);
  const double p = 50.0 / 60.0, r = 50.0 / 55.0;
  EXPECT_DOUBLE_EQ(m.at(MetricId::precision), p);
  EXPECT_DOUBLE_EQ(m.at(MetricId::recall), r);
  EXPECT_NEAR(m.at(MetricId::f1), 2 * p * r / (p + r), 1e-15);
  EXPECT_DOUBLE_EQ(m.at(MetricId::accuracy), 0.85);
}

TEST(Classification, AllTiedScoresGiveHalfAuc) {
  const std::vector<double> labels{1, 0, 1, 0}, scores{0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(auc_score(labels, scores), 0.5);
}

TEST(Classification, SingleClassAucIsUndefinedOthersComputed) {
  const std::vector<double> labels{1, 1, 1}, scores{0.9, 0.2, 0.7};
  const auto m = classification_metrics(labels, scores);
  EXPECT_TRUE(std::isnan(m.at(MetricId::auc)));
  EXPECT_NEAR(m.at(MetricId::accuracy), 2.0 / 3.0, 1e-15);
}

TEST(Classification, SetContainsExactlyTheClassificationIds) {
  const std::vector<double> labels{1, 0, 1}, scores{0.9, 0.2, 0.4};
  const auto m = classification_metrics(labels, scores);
  EXPECT_EQ(m.values.size(), 5u);
  for (const auto& [id, v] : m.values) {
    EXPECT_TRUE(metric_applies(id, Task::binary_classification));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Classification, AucMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> labels(n), scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      scores[i] = static_cast<double>(rng.below(20)) / 20.0;  // plenty of ties
    }
    labels[0] = 1.0;
    labels[1] = 0.0;
    EXPECT_NEAR(auc_score(labels, scores), brute_force_auc(labels, scores), 1e-12) << seed;
  }
}

TEST(Classification, AucInvariantUnderIncreasingTransform) {
  Rng rng(4);
  std::vector<double> labels(300), scores(300), warped(300);
  for (std::size_t i = 0; i < 300; ++i) {
    labels[i] = rng.uniform() < 0.5;
    scores[i] = rng.uniform();
    warped[i] = std::exp(5 * scores[i]) - 3;
  }
  EXPECT_EQ(auc_score(labels, scores), auc_score(labels, warped));
}

TEST(Classification, F1IsHarmonicMeanOfReportedValues) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<double> labels(50), scores(50);
    for (std::size_t i = 0; i < 50; ++i) {
      labels[i] = rng.uniform() < 0.5;
      scores[i] = rng.uniform();
    }
    const auto m = classification_metrics(labels, scores);
    const double p = m.at(MetricId::precision), r = m.at(MetricId::recall);
    const double expected = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    EXPECT_NEAR(m.at(MetricId::f1), expected, 1e-12);
  }
}

TEST(Regression, IdentityPredictions) {
  const std::vector<double> y{1, 2, 3, 4.5};
  const auto m = regression_metrics(y, y);
  EXPECT_EQ(m.at(MetricId::rmse), 0.0);
  EXPECT_EQ(m.at(MetricId::mae), 0.0);
  EXPECT_EQ(m.at(MetricId::r2), 1.0);
}

TEST(Regression, MeanPredictionGivesZeroR2) {
  const std::vector<double> y{1, 2, 3, 6};
  const std::vector<double> p(4, 3.0);
  EXPECT_NEAR(regression_metrics(y, p).at(MetricId::r2), 0.0, 1e-15);
}

TEST(Regression, HandArithmetic) {
  const std::vector<double> y{0, 0, 0, 1}, p{0, 0, 0, 0};
  const auto m = regression_metrics(y, p);
  EXPECT_DOUBLE_EQ(m.at(MetricId::rmse), 0.5);
  EXPECT_DOUBLE_EQ(m.at(MetricId::mae), 0.25);
}

TEST(Regression, ConstantTruthR2Undefined) {
  const std::vector<double> y{2, 2, 2}, p{1, 2, 3};
  EXPECT_TRUE(std::isnan(regression_metrics(y, p).at(MetricId::r2)));
}

TEST(Regression, RmseAtLeastMae) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal();
      p[i] = rng.normal();
    }
    const auto m = regression_metrics(y, p);
    EXPECT_GE(m.at(MetricId::rmse) + 1e-15, m.at(MetricId::mae));
  }
  const std::vector<double> y{0, 0, 0}, p{1, -1, 1};
  const auto m = regression_metrics(y, p);
  EXPECT_DOUBLE_EQ(m.at(MetricId::rmse), m.at(MetricId::mae));
}

TEST(Metrics, IdsRoundTripAndUnknownRejected) {
  for (auto id : {MetricId::accuracy, MetricId::f1, MetricId::precision, MetricId::recall,
                  MetricId::auc, MetricId::rmse, MetricId::r2, MetricId::mae})
    EXPECT_EQ(metric_from_string(to_string(id)), id);
  EXPECT_THROW(metric_from_string("logloss"), Error);
  EXPECT_THROW(compute_metric(MetricId::rmse, Task::binary_classification, std::vector<double>{1},
                              std::vector<double>{1}),
               Error);
}

TEST(Metrics, LengthMismatchRejected) {
  EXPECT_THROW(regression_metrics(std::vector<double>{1, 2}, std::vector<double>{1}), Error);
  EXPECT_THROW(classification_metrics(std::vector<double>{}, std::vector<double>{}), Error);
}
