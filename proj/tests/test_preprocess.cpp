#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "discover/preprocess.hpp"

using namespace discover;

namespace {

Column target(std::vector<double> v) {
  auto c = Column::numeric("y", std::move(v));
  c.schema.role = ColumnRole::target;
  return c;
}

const FeaturePlan& feature(const PreprocessPlan& p, const std::string& name) {
  for (const auto& f : p.features)
    if (f.name == name) return f;
  throw std::runtime_error("no feature " + name);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace

TEST(FitPlan, MedianImputation) {
  const double nan = std::nan("");
  Table t({Column::numeric("a", {1, 2, nan, 3}), Column::numeric("b", {0, 1, 0, 1}),
           target({1, 2, 3, 4})});
  const auto plan = fit_plan(t);
  EXPECT_EQ(feature(plan, "a").impute_value, 2.0);
}

TEST(FitPlan, ConstantColumnDropped) {
  Table t({Column::numeric("k", {5, 5, 5}), Column::numeric("a", {1, 2, 3}), target({1, 2, 3})});
  const auto plan = fit_plan(t);
  EXPECT_EQ(plan.dropped, (std::vector<std::string>{"k"}));
  EXPECT_EQ(plan.features.size(), 1u);
}

TEST(FitPlan, ModeImputationAndOneHotLevels) {
  Table t({Column::categorical("c", {"x", "x", "y", ""}), target({1, 2, 3, 4})});
  const auto plan = fit_plan(t);
  const auto& f = feature(plan, "c");
  EXPECT_EQ(f.impute_level, "x");
  EXPECT_EQ(plan.encoded_names(), (std::vector<std::string>{"c=x", "c=y", "c=<unseen>"}));
}

TEST(FitPlan, AllMissingColumnDroppedWithWarning) {
  const double nan = std::nan("");
  Table t({Column::numeric("gone", {nan, nan, nan}), Column::numeric("a", {1, 2, 3}),
           target({1, 2, 3})});
  const auto plan = fit_plan(t);
  EXPECT_EQ(plan.dropped, (std::vector<std::string>{"gone"}));
  ASSERT_EQ(plan.warnings.size(), 1u);
}

TEST(FitPlan, NoUsableFeaturesIsAnError) {
  Table t({Column::numeric("k", {5, 5, 5}), target({1, 2, 3})});
  try {
    fit_plan(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(FitPlan, RowsWithMissingTargetDoNotInformStatistics) {
  const double nan = std::nan("");
  Table t({Column::numeric("a", {1, 2, 3, 1000}), target({1, 2, 3, nan})});
  const auto plan = fit_plan(t);
  EXPECT_EQ(feature(plan, "a").impute_value, 2.0);
  EXPECT_NEAR(feature(plan, "a").mean, 2.0, 1e-15);
  const auto out = apply_plan(plan, t, true);
  EXPECT_EQ(out.row_count(), 3u);
}

TEST(ApplyPlan, ZScoresHaveZeroMeanOnTheFitSet) {
  Table t({Column::numeric("a", {2, 4, 6}), target({1, 2, 3})});
  const auto plan = fit_plan(t);
  const auto out = apply_plan(plan, t, true);
  EXPECT_NEAR(mean_of(out.column("a").values), 0.0, 1e-12);
}

TEST(ApplyPlan, DuplicatesRemovedOnlyForTraining) {
  Table t({Column::numeric("a", {1, 1, 2, 3}), Column::categorical("c", {"p", "p", "q", "q"}),
           target({1, 5, 2, 3})});
  const auto plan = fit_plan(t);
  EXPECT_EQ(apply_plan(plan, t, true).row_count(), 3u);
  EXPECT_EQ(apply_plan(plan, t, false).row_count(), 4u);
  EXPECT_EQ(apply_plan(plan, t, true).row_ids(), (std::vector<std::size_t>{0, 2, 3}));
}

TEST(ApplyPlan, OutlierDroppedOnlyForTraining) {
  // 49 values spread evenly plus one far value: robust z of the last row is
  // far above 4 and it is the only flagged row in the column.
  std::vector<double> a, y;
  for (int i = 0; i < 49; ++i) {
    a.push_back(i);
    y.push_back(i % 7);
  }
  a.push_back(24 + 9 * 1.4826 * 12.0 * 2);
  y.push_back(1);
  Table t({Column::numeric("a", a), target(y)});
  const auto plan = fit_plan(t);
  ASSERT_TRUE(feature(plan, "a").outlier_checked);
  const auto tr = apply_plan(plan, t, true);
  EXPECT_EQ(tr.row_count(), 49u);
  EXPECT_EQ(tr.row_ids().back(), 48u);
  EXPECT_EQ(apply_plan(plan, t, false).row_count(), 50u);
}

TEST(ApplyPlan, HeavyTailedColumnIsNotTrimmed) {
  // A quarter of the rows are far out: this is skew, not dirt.
  std::vector<double> a, id, y;
  for (int i = 0; i < 100; ++i) {
    a.push_back(i % 4 == 0 ? 1000.0 + i : i % 10);
    id.push_back(i);
    y.push_back(i);
  }
  Table t({Column::numeric("a", a), Column::numeric("id", id), target(y)});
  const auto plan = fit_plan(t);
  EXPECT_FALSE(feature(plan, "a").outlier_checked);
  EXPECT_EQ(apply_plan(plan, t, true).row_count(), 100u);
}

TEST(ApplyPlan, UnseenLevelUsesReservedSlot) {
  Table train({Column::categorical("c", {"x", "y", "x"}), target({1, 2, 3})});
  Table other({Column::categorical("c", {"z", "y", ""}), target({1, 2, 3})});
  const auto plan = fit_plan(train);
  const auto out = apply_plan(plan, other, false);
  EXPECT_EQ(out.column("c=<unseen>").values, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(out.column("c=y").values, (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(out.column("c=x").values, (std::vector<double>{0, 0, 1}));
}

TEST(ApplyPlan, BinaryColumnBecomesOneIndicator) {
  Table t({Column::categorical("s", {"f", "m", "m", "f"}, ColumnKind::binary), target({1, 2, 3, 4})});
  const auto plan = fit_plan(t);
  const auto out = apply_plan(plan, t, false);
  ASSERT_TRUE(out.find("s=m"));
  EXPECT_EQ(out.column("s=m").values, (std::vector<double>{0, 1, 1, 0}));
}

TEST(ApplyPlan, TableMissingPlannedColumnIsSchemaError) {
  Table t({Column::numeric("a", {1, 2, 3}), target({1, 2, 3})});
  const auto plan = fit_plan(t);
  Table other({Column::numeric("b", {1, 2, 3}), target({1, 2, 3})});
  try {
    apply_plan(plan, other, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema);
  }
}

TEST(ApplyPlan, ScaledColumnsAreStandardOnRandomTrainingSets) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t n = 100 + rng.below(200);
    std::vector<double> a(n), b(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform() < 0.1 ? std::nan("") : rng.normal() * 5 + 3;
      b[i] = 2 * rng.normal() - 1 + (rng.uniform() < 0.01 ? 6 * rng.normal() : 0.0);
      y[i] = rng.normal();
    }
    Table t({Column::numeric("a", a), Column::numeric("b", b), target(y)});

    PreprocessOptions no_outliers;
    no_outliers.outliers.enabled = false;
    const auto plan = fit_plan(t, no_outliers);
    const auto out = apply_plan(plan, t, true);
    for (const auto& name : {"a", "b"}) {
      const auto& v = out.column(name).values;
      EXPECT_LT(std::abs(mean_of(v)), 1e-9);
      EXPECT_LT(std::abs(sd_of(v) - 1.0), 1e-6);
    }

    const auto plan2 = fit_plan(t);
    const auto out2 = apply_plan(plan2, t, true);
    for (const auto& name : {"a", "b"}) {
      const auto& v = out2.column(name).values;
      EXPECT_LT(std::abs(mean_of(v)), 0.2);
      EXPECT_LT(std::abs(sd_of(v) - 1.0), 0.2);
    }
  }
}

TEST(ApplyPlan, NonTrainingApplyIsRepeatable) {
  Rng rng(5);
  std::vector<double> a(50), y(50);
  std::vector<std::string> c(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.normal();
    y[i] = rng.normal();
    c[i] = rng.uniform() < 0.5 ? "u" : "v";
  }
  Table t({Column::numeric("a", a), Column::categorical("c", c), target(y)});
  const auto plan = fit_plan(t);
  EXPECT_EQ(to_csv(apply_plan(plan, t, false)), to_csv(apply_plan(plan, t, false)));
}

TEST(FitPlan, HoldoutEditsDoNotChangeThePlan) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 60;
    std::vector<double> a(n), y(n);
    std::vector<std::string> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.normal();
      y[i] = rng.normal();
      c[i] = rng.uniform() < 0.3 ? "u" : "v";
    }
    Table t({Column::numeric("a", a), Column::categorical("c", c), target(y)});
    const SplitSpec spec{0.25, false, seed};
    const auto held = holdout_rows(t, spec);
    const auto before = to_json(fit_plan(split_by_holdout(t, held).train)).dump();
    for (auto r : held) {
      a[r] = 1e6 * rng.normal();
      c[r] = "w";
    }
    Table mutated({Column::numeric("a", a), Column::categorical("c", c), target(y)});
    const auto after = to_json(fit_plan(split_by_holdout(mutated, held).train)).dump();
    EXPECT_EQ(before, after);
  }
}

TEST(PlanJson, RoundTrip) {
  const double nan = std::nan("");
  Table t({Column::numeric("a", {1, 2, nan, 3, 10}), Column::categorical("c", {"x", "x", "y", "", "z"}),
           Column::numeric("k", {1, 1, 1, 1, 1}), target({1, 2, 3, 4, 5})});
  const auto plan = fit_plan(t);
  const auto j = to_json(plan);
  const auto back = plan_from_json(nlohmann::ordered_json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(to_csv(apply_plan(back, t, false)), to_csv(apply_plan(plan, t, false)));
}
