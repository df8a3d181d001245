#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "discover/metrics.hpp"
#include "discover/models/model.hpp"

using namespace discover;

namespace {

Dataset make_dataset(std::size_t rows, std::size_t cols, Rng& rng) {
  Dataset d;
  d.rows = rows;
  d.cols = cols;
  d.x.resize(rows * cols);
  d.y.resize(rows);
  for (auto& v : d.x) v = rng.normal();
  for (std::size_t j = 0; j < cols; ++j) d.feature_names.push_back("f" + std::to_string(j));
  return d;
}

ModelSpec spec(ModelFamily f, Task t, Hyperparameters h, std::uint64_t seed = 1) {
  return ModelSpec{f, t, std::move(h), seed};
}

Dataset subset(const Dataset& d, std::size_t begin, std::size_t end) {
  Dataset s;
  s.rows = end - begin;
  s.cols = d.cols;
  s.feature_names = d.feature_names;
  s.x.assign(d.x.begin() + static_cast<std::ptrdiff_t>(begin * d.cols),
             d.x.begin() + static_cast<std::ptrdiff_t>(end * d.cols));
  s.y.assign(d.y.begin() + static_cast<std::ptrdiff_t>(begin), d.y.begin() + static_cast<std::ptrdiff_t>(end));
  return s;
}

}  // namespace

TEST(Forest, SeparableOneDimensionalClassification) {
  Dataset d;
  d.cols = 1;
  d.feature_names = {"x"};
  for (int i = -50; i < 50; ++i) {
    d.x.push_back(i + 0.5);
    d.y.push_back(i >= 0 ? 1.0 : 0.0);
  }
  d.rows = d.y.size();
  const auto m = fit_model(spec(ModelFamily::random_forest, Task::binary_classification, {{"trees", 50}}),
                           d, Dataset{});
  const auto p = m.predict(d);
  EXPECT_EQ(classification_metrics(d.y, p).at(MetricId::accuracy), 1.0);
}

TEST(Forest, SingleFullTreeMemorisesTrainingTargets) {
  Rng rng(3);
  auto d = make_dataset(80, 3, rng);
  for (auto& y : d.y) y = rng.normal() * 10;
  const auto m = fit_model(spec(ModelFamily::random_forest, Task::regression,
                                {{"trees", 1}, {"bootstrap", 0}, {"feature_fraction", 1}, {"depth", 0}}),
                           d, Dataset{});
  EXPECT_EQ(m.predict(d), d.y);
}

TEST(Forest, RegressionStaysInsideTrainingRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    auto d = make_dataset(20 + rng.below(60), 1 + rng.below(4), rng);
    for (auto& y : d.y) y = rng.normal() * 3 + rng.uniform();
    const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
    const auto m = fit_model(spec(ModelFamily::random_forest, Task::regression,
                                  {{"trees", 10}, {"depth", static_cast<double>(rng.below(6))}}, seed),
                             d, Dataset{});
    Rng probe(seed + 1000);
    for (int k = 0; k < 50; ++k) {
      std::vector<double> row(d.cols);
      for (auto& v : row) v = probe.normal() * 5;
      const double p = m.predict_row(row);
      EXPECT_GE(p, *lo);
      EXPECT_LE(p, *hi);
    }
  }
}

TEST(Forest, ClassificationOutputsAreProbabilities) {
  Rng rng(9);
  auto d = make_dataset(100, 3, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0) + 0.5 * rng.normal() > 0;
  const auto m = fit_model(spec(ModelFamily::random_forest, Task::binary_classification, {{"trees", 20}}),
                           d, Dataset{});
  for (double p : m.predict(d)) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
    EXPECT_EQ(p + (1.0 - p), 1.0);
  }
}

TEST(Forest, SameSeedSameModelRegardlessOfWorkers) {
  Rng rng(4);
  auto d = make_dataset(120, 4, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 1) * 2 + rng.normal();
  const auto s = spec(ModelFamily::random_forest, Task::regression, {{"trees", 16}}, 77);
  worker_limit() = 1;
  const auto a = to_json(fit_model(s, d, Dataset{})).dump();
  worker_limit() = 4;
  const auto b = to_json(fit_model(s, d, Dataset{})).dump();
  worker_limit() = 0;
  EXPECT_EQ(a, b);
}

TEST(Gbdt, ConstantTargetPredictsTheConstant) {
  Rng rng(1);
  auto d = make_dataset(50, 2, rng);
  std::fill(d.y.begin(), d.y.end(), 3.5);
  const auto s = spec(ModelFamily::gbdt, Task::regression, {{"rounds", 5}});
  FitOptions internal;
  internal.check_degenerate = false;
  const auto m = fit_model(s, d, d, internal);
  for (double p : m.predict(d)) EXPECT_EQ(p, 3.5);
  try {
    fit_model(s, d, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Gbdt, SingleClassIsDegenerate) {
  Rng rng(1);
  auto d = make_dataset(30, 2, rng);
  std::fill(d.y.begin(), d.y.end(), 1.0);
  try {
    fit_model(spec(ModelFamily::gbdt, Task::binary_classification, {}), d, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate);
  }
}

TEST(Gbdt, ZeroRoundsGiveTheBaseScore) {
  Rng rng(2);
  auto d = make_dataset(40, 2, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = i % 4 == 0;
  const auto c = fit_model(spec(ModelFamily::gbdt, Task::binary_classification, {{"rounds", 0}}), d, d);
  for (double p : c.predict(d)) EXPECT_NEAR(p, 0.25, 1e-15);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = static_cast<double>(i);
  const auto r = fit_model(spec(ModelFamily::gbdt, Task::regression, {{"rounds", 0}}), d, d);
  for (double p : r.predict(d)) EXPECT_NEAR(p, 19.5, 1e-12);
}

TEST(Gbdt, StagewiseAdditivityIsExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto d = make_dataset(150, 4, rng);
    const bool cls = seed % 2;
    for (std::size_t i = 0; i < d.rows; ++i) {
      const double s = std::sin(d.at(i, 0)) + d.at(i, 1) * d.at(i, 2);
      d.y[i] = cls ? (s + rng.normal() > 0) : s + 0.1 * rng.normal();
    }
    const auto m = fit_model(spec(ModelFamily::gbdt, cls ? Task::binary_classification : Task::regression,
                                  {{"rounds", 25}, {"learning_rate", 0.17}, {"subsample", 0.8}}, seed),
                             d, Dataset{}, {true, false});
    const auto& g = std::get<Gbdt>(m.state);
    ASSERT_EQ(g.trees().size(), 25u);
    for (std::size_t i = 0; i < d.rows; ++i) {
      for (std::size_t k = 0; k < g.trees().size(); ++k) {
        const double lhs = g.predict_margin(d.row(i), k + 1);
        const double rhs = g.predict_margin(d.row(i), k) + g.learning_rate() * g.trees()[k].predict(d.row(i));
        ASSERT_EQ(lhs, rhs);
      }
    }
  }
}

TEST(Gbdt, EarlyStoppingKeepsBestValidationRound) {
  Rng rng(12);
  auto d = make_dataset(300, 3, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0) + rng.normal() * 2.0;
  const auto train = subset(d, 0, 200), valid = subset(d, 200, 300);
  const auto m = fit_model(spec(ModelFamily::gbdt, Task::regression,
                                {{"rounds", 500}, {"learning_rate", 0.3}, {"depth", 6}, {"patience", 10}}),
                           train, valid);
  const auto& vl = m.info.validation_loss;
  ASSERT_LT(m.info.iterations, 500u);
  EXPECT_EQ(m.info.iterations, m.info.early_stop_point + 10);
  const auto best = std::min_element(vl.begin(), vl.end()) - vl.begin();
  EXPECT_EQ(static_cast<std::size_t>(best), m.info.early_stop_point);
  EXPECT_EQ(std::get<Gbdt>(m.state).trees().size(), m.info.early_stop_point);
  // The kept model reproduces the recorded best validation loss.
  const auto p = m.predict(valid);
  double mse = 0.0;
  for (std::size_t i = 0; i < valid.rows; ++i) mse += (p[i] - valid.y[i]) * (p[i] - valid.y[i]);
  EXPECT_NEAR(mse / valid.rows, vl[static_cast<std::size_t>(best)], 1e-9);
}

TEST(Gbdt, MissingValidationRejectedThroughTableApi) {
  std::vector<double> x{1, 2, 3, 4, 5, 6}, y{1, 3, 2, 5, 4, 6};
  auto yc = Column::numeric("y", y);
  yc.schema.role = ColumnRole::target;
  Table t({Column::numeric("x", x), yc});
  const TargetEncoding enc{Task::regression, {}};
  EXPECT_THROW(train(spec(ModelFamily::gbdt, Task::regression, {}), t, Table{}, enc), Error);
  EXPECT_THROW(train(spec(ModelFamily::mlp, Task::regression, {}), t, Table{}, enc), Error);
  const auto m = train(spec(ModelFamily::random_forest, Task::regression, {{"trees", 5}}), t, Table{}, enc);
  EXPECT_EQ(predict(m, t).size(), 6u);
}

TEST(TreeEnsembles, InvariantUnderMonotoneFeatureRescaling) {
  for (auto family : {ModelFamily::random_forest, ModelFamily::gbdt}) {
    Rng rng(21);
    auto d = make_dataset(150, 3, rng);
    for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0) * d.at(i, 1) + rng.normal() * 0.3;
    auto w = d;
    for (std::size_t i = 0; i < w.rows; ++i) w.x[i * w.cols + 1] = std::exp(2.0 * d.at(i, 1)) + 5.0;
    const auto s = spec(family, Task::regression, {}, 5);
    const auto a = fit_model(s, d, d);
    const auto b = fit_model(s, w, w);
    const auto pa = a.predict(d), pb = b.predict(w);
    for (std::size_t i = 0; i < d.rows; ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
  }
}

TEST(Mlp, FitsALinearFunction) {
  Rng rng(8);
  Dataset d;
  d.cols = 1;
  d.feature_names = {"x"};
  for (int i = 0; i < 300; ++i) {
    const double x = rng.uniform(-1, 1);
    d.x.push_back(x);
    d.y.push_back(2 * x + 1);
  }
  d.rows = 300;
  const auto tr = subset(d, 0, 200), va = subset(d, 200, 250), ho = subset(d, 250, 300);
  const auto m = fit_model(spec(ModelFamily::mlp, Task::regression, {{"epochs", 200}}, 3), tr, va);
  EXPECT_GE(regression_metrics(ho.y, m.predict(ho)).at(MetricId::r2), 0.99);
}

TEST(Mlp, AnalyticGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    std::vector<std::size_t> sizes{1 + rng.below(5)};
    const std::size_t hidden = 1 + rng.below(3);
    for (std::size_t l = 0; l < hidden; ++l) sizes.push_back(1 + rng.below(8));
    sizes.push_back(1);
    const bool cls = seed % 2;
    auto d = make_dataset(6, sizes[0], rng);
    for (auto& y : d.y) y = cls ? static_cast<double>(rng.below(2)) : rng.normal();
    auto params = mlp_initial_params(sizes, rng);
    for (auto& p : params) p += 0.1 * rng.normal();  // nonzero biases
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    std::vector<double> grad(params.size()), scratch(params.size());
    mlp_loss_and_gradient(sizes, params, d, rows, d.y, cls, grad);
    double diff = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double h = 1e-6;
      auto plus = params, minus = params;
      plus[k] += h;
      minus[k] -= h;
      const double fp = mlp_loss_and_gradient(sizes, plus, d, rows, d.y, cls, scratch);
      const double fm = mlp_loss_and_gradient(sizes, minus, d, rows, d.y, cls, scratch);
      const double numeric = (fp - fm) / (2 * h);
      diff += (numeric - grad[k]) * (numeric - grad[k]);
      norm += numeric * numeric + grad[k] * grad[k];
    }
    const double rel = norm > 0 ? std::sqrt(diff) / std::sqrt(norm) : 0.0;
    EXPECT_LT(rel, 1e-4) << "seed " << seed;
  }
}

TEST(Mlp, DeterministicForFixedSeed) {
  Rng rng(30);
  auto d = make_dataset(100, 3, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0) > 0;
  const auto s = spec(ModelFamily::mlp, Task::binary_classification, {{"epochs", 20}, {"units", 8}}, 4);
  EXPECT_EQ(to_json(fit_model(s, d, d)).dump(), to_json(fit_model(s, d, d)).dump());
}

TEST(ModelJson, RoundTripPreservesPredictions) {
  Rng rng(31);
  auto d = make_dataset(80, 3, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0) + d.at(i, 2) > 0;
  for (auto family : {ModelFamily::random_forest, ModelFamily::gbdt, ModelFamily::mlp}) {
    Hyperparameters h;
    if (family == ModelFamily::random_forest) h = {{"trees", 7}};
    if (family == ModelFamily::gbdt) h = {{"rounds", 12}};
    if (family == ModelFamily::mlp) h = {{"epochs", 5}, {"units", 6}};
    const auto m = fit_model(spec(family, Task::binary_classification, h), d, d);
    const auto text = to_json(m).dump();
    const auto back = model_from_json(nlohmann::ordered_json::parse(text));
    EXPECT_EQ(back.predict(d), m.predict(d)) << to_string(family);
    EXPECT_EQ(to_json(back).dump(), text);
  }
}

TEST(ModelSpec, RejectsOutOfRangeAndForeignKeys) {
  EXPECT_THROW(validate(spec(ModelFamily::gbdt, Task::regression, {{"learning_rate", 0}})), Error);
  EXPECT_THROW(validate(spec(ModelFamily::gbdt, Task::regression, {{"depth", 2.5}})), Error);
  EXPECT_THROW(validate(spec(ModelFamily::random_forest, Task::regression, {{"units", 4}})), Error);
  EXPECT_THROW(validate(spec(ModelFamily::mlp, Task::regression, {{"layers", 9}})), Error);
  EXPECT_NO_THROW(validate(spec(ModelFamily::mlp, Task::regression, {{"layers", 3}, {"units", 128}})));
}

TEST(PermutationImportance, UnusedFeatureScoresZero) {
  Rng rng(40);
  auto d = make_dataset(120, 2, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = 3 * d.at(i, 0);
  const auto m = fit_model(spec(ModelFamily::gbdt, Task::regression, {{"rounds", 30}}), d, d);
  const auto& g = std::get<Gbdt>(m.state);
  bool uses1 = false;
  for (const auto& t : g.trees()) uses1 = uses1 || t.uses_feature(1);
  const auto imp = permutation_importance(m, d, MetricId::rmse, 3, 1);
  if (!uses1) EXPECT_EQ(imp[1], 0.0);
  EXPECT_GT(imp[0], imp[1]);
}

TEST(PermutationImportance, RelevantFeatureRanksAboveNoise) {
  Rng rng(41);
  auto d = make_dataset(200, 2, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0);
  const auto m = fit_model(spec(ModelFamily::random_forest, Task::regression, {{"trees", 30}}), d, Dataset{});
  const auto imp = permutation_importance(m, d, "r2", 5, 9);
  EXPECT_GT(imp[0], imp[1]);
  EXPECT_EQ(imp, permutation_importance(m, d, "r2", 5, 9));
}

TEST(PermutationImportance, BadArgumentsRejected) {
  Rng rng(42);
  auto d = make_dataset(30, 2, rng);
  for (std::size_t i = 0; i < d.rows; ++i) d.y[i] = d.at(i, 0);
  const auto m = fit_model(spec(ModelFamily::random_forest, Task::regression, {{"trees", 3}}), d, Dataset{});
  EXPECT_THROW(permutation_importance(m, d, MetricId::rmse, 0, 1), Error);
  EXPECT_THROW(permutation_importance(m, d, "brier", 1, 1), Error);
  EXPECT_THROW(permutation_importance(m, d, MetricId::accuracy, 1, 1), Error);
}
