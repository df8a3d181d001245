#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "discover/automl.hpp"

using namespace discover;

namespace {

Table sign_task(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = rng.normal();
    y[i] = x1[i] > 0 ? 1 : 0;
  }
  auto t = Column::numeric("y", y);
  t.schema.role = ColumnRole::target;
  return Table({Column::numeric("x1", x1), Column::numeric("x2", x2), t});
}

Table regression_task(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.uniform(-2, 2);
    x2[i] = rng.uniform(-2, 2);
    y[i] = std::sin(2 * x1[i]) + x2[i] * x2[i] + 0.1 * rng.normal();
  }
  auto t = Column::numeric("y", y);
  t.schema.role = ColumnRole::target;
  return Table({Column::numeric("x1", x1), Column::numeric("x2", x2), t});
}

const TargetEncoding kBinary{Task::binary_classification, {"1"}};
const TargetEncoding kRegression{Task::regression, {}};

SearchBudget only(ModelFamily f, std::size_t n, std::uint64_t seed = 1) {
  SearchBudget b;
  b.family_candidates = {{f, n}};
  b.max_candidates = n;
  b.seed = seed;
  return b;
}

}  // namespace

TEST(Automl, SingleCandidateBudget) {
  const auto t = sign_task(1, 200);
  const auto r = search(t, kBinary, MetricId::accuracy, only(ModelFamily::random_forest, 1));
  ASSERT_EQ(r.leaderboard.entries.size(), 1u);
  EXPECT_EQ(r.leaderboard.best_index, 0u);
  EXPECT_EQ(r.best.spec.family, ModelFamily::random_forest);
}

TEST(Automl, SeparableToyTaskReachesPerfectValidationAccuracy) {
  const auto t = sign_task(2, 400);
  SearchBudget b;
  b.max_candidates = 10;
  b.family_candidates = {{ModelFamily::random_forest, 4}, {ModelFamily::gbdt, 4}, {ModelFamily::mlp, 2}};
  const auto r = search(t, kBinary, MetricId::accuracy, b);
  const auto& best = r.leaderboard.entries[r.leaderboard.best_index];
  EXPECT_EQ(best.validation.at(MetricId::accuracy), 1.0);
}

TEST(Automl, NoCandidateIsLostAndOrderFollowsValidationScore) {
  const auto t = regression_task(3, 300);
  SearchBudget b;
  b.max_candidates = 7;
  b.family_candidates = {{ModelFamily::random_forest, 3}, {ModelFamily::gbdt, 3}, {ModelFamily::mlp, 3}};
  const auto candidates = sample_candidates(Task::regression, b);
  ASSERT_EQ(candidates.size(), 7u);
  const auto r = search(t, kRegression, MetricId::rmse, b);
  EXPECT_EQ(r.leaderboard.entries.size() + r.leaderboard.failures.size(), candidates.size());
  std::multiset<std::string> in, out;
  for (const auto& c : candidates) in.insert(spec_key(c));
  for (const auto& e : r.leaderboard.entries) out.insert(spec_key(e.spec));
  EXPECT_EQ(in, out);
  for (std::size_t k = 1; k < r.leaderboard.entries.size(); ++k)
    EXPECT_LE(r.leaderboard.entries[k - 1].validation.at(MetricId::rmse),
              r.leaderboard.entries[k].validation.at(MetricId::rmse));
}

TEST(Automl, FamiliesTakeTurnsUntilQuotasAreMet) {
  SearchBudget b;
  b.max_candidates = 5;
  b.family_candidates = {{ModelFamily::random_forest, 1}, {ModelFamily::gbdt, 3}, {ModelFamily::mlp, 3}};
  const auto c = sample_candidates(Task::regression, b);
  std::vector<ModelFamily> families;
  for (const auto& s : c) families.push_back(s.family);
  EXPECT_EQ(families, (std::vector<ModelFamily>{ModelFamily::random_forest, ModelFamily::gbdt,
                                                ModelFamily::mlp, ModelFamily::gbdt, ModelFamily::mlp}));
  for (const auto& s : c) EXPECT_NO_THROW(validate(s));
}

TEST(Automl, SampledHyperparametersStayInsideDocumentedRanges) {
  SearchBudget b;
  b.max_candidates = 300;
  b.family_candidates = {{ModelFamily::random_forest, 100}, {ModelFamily::gbdt, 100}, {ModelFamily::mlp, 100}};
  for (const auto& s : sample_candidates(Task::regression, b)) {
    const auto& h = s.hyperparameters;
    if (s.family == ModelFamily::random_forest) {
      EXPECT_GE(h.at("trees"), 100);
      EXPECT_LE(h.at("trees"), 500);
      EXPECT_TRUE(h.at("depth") == 0 || h.at("depth") >= 4);
    } else if (s.family == ModelFamily::gbdt) {
      EXPECT_GE(h.at("rounds"), 100);
      EXPECT_LE(h.at("rounds"), 2000);
      EXPECT_GE(h.at("learning_rate"), 0.01);
      EXPECT_LE(h.at("learning_rate"), 0.3);
      EXPECT_GE(h.at("depth"), 2);
      EXPECT_LE(h.at("depth"), 8);
    } else {
      EXPECT_TRUE(h.at("units") == 32 || h.at("units") == 64 || h.at("units") == 128);
      EXPECT_GE(h.at("layers"), 1);
      EXPECT_LE(h.at("layers"), 3);
    }
  }
}

TEST(Automl, OverfitFlagExamples) {
  LeaderboardEntry e;
  e.overfit_gap = overfit_gap(MetricId::accuracy, 1.0, 0.6);
  EXPECT_TRUE(overfit_flag(e, MetricId::accuracy));
  e.overfit_gap = overfit_gap(MetricId::accuracy, 0.93, 0.91);
  EXPECT_FALSE(overfit_flag(e, MetricId::accuracy));
  e.overfit_gap = overfit_gap(MetricId::rmse, 1.0, 2.0);
  EXPECT_TRUE(overfit_flag(e, MetricId::rmse));
  e.overfit_gap = overfit_gap(MetricId::rmse, 1.9, 2.0);
  EXPECT_FALSE(overfit_flag(e, MetricId::rmse));
}

TEST(Automl, ArgmaxAndFlaggedFallback) {
  const std::vector<std::string> keys{"a", "b", "c"};
  auto [order, best] = rank_candidates({0.8, 0.9, 0.7}, keys, {false, false, false}, true);
  EXPECT_EQ(order, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(best, 0u);
  std::tie(order, best) = rank_candidates({0.8, 0.9, 0.7}, keys, {false, true, false}, true);
  EXPECT_EQ(order[best], 0u);
  std::tie(order, best) = rank_candidates({0.8, 0.9, 0.7}, keys, {true, true, true}, true);
  EXPECT_EQ(order[best], 1u);
  std::tie(order, best) = rank_candidates({3.0, std::nan(""), 2.0}, keys, {false, false, false}, false);
  EXPECT_EQ(order, (std::vector<std::size_t>{2, 0, 1}));
}

TEST(Automl, SelectionIsInvariantUnderIncreasingTransforms) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> s(n), t(n);
    std::vector<std::string> keys(n);
    std::vector<bool> flagged(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 10) / 10;
      t[i] = std::exp(3 * s[i]) + 2;
      keys[i] = std::to_string(i);
      flagged[i] = rng.uniform() < 0.3;
    }
    const auto a = rank_candidates(s, keys, flagged, true);
    const auto b = rank_candidates(t, keys, flagged, true);
    EXPECT_EQ(a.first[a.second], b.first[b.second]);
    EXPECT_EQ(a.first, b.first);
  }
}

TEST(Automl, ReproducibleForSeedAndBudget) {
  const auto t = regression_task(4, 250);
  SearchBudget b;
  b.max_candidates = 4;
  b.family_candidates = {{ModelFamily::random_forest, 2}, {ModelFamily::gbdt, 2}};
  b.seed = 11;
  const auto x = to_json(search(t, kRegression, MetricId::rmse, b).leaderboard).dump();
  worker_limit() = 3;
  const auto y = to_json(search(t, kRegression, MetricId::rmse, b).leaderboard).dump();
  worker_limit() = 0;
  EXPECT_EQ(x, y);
}

TEST(Automl, MetricMustFitTask) {
  const auto t = regression_task(5, 100);
  try {
    search(t, kRegression, MetricId::accuracy, only(ModelFamily::random_forest, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(Automl, LeaderboardJsonRoundTrip) {
  const auto t = sign_task(6, 150);
  const auto r = search(t, kBinary, MetricId::f1, only(ModelFamily::gbdt, 2));
  const auto j = to_json(r.leaderboard);
  EXPECT_EQ(to_json(leaderboard_from_json(nlohmann::ordered_json::parse(j.dump()))).dump(), j.dump());
}

TEST(Automl, RefitKeepsTheSelectedSpec) {
  const auto t = regression_task(7, 200);
  const auto r = search(t, kRegression, MetricId::rmse, only(ModelFamily::gbdt, 2));
  EXPECT_EQ(spec_key(r.best.spec), spec_key(r.leaderboard.entries[r.leaderboard.best_index].spec));
  EXPECT_EQ(r.best.info.early_stop_point, r.leaderboard.entries[r.leaderboard.best_index].early_stop_point);
}
