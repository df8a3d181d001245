#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <regex>

#include "discover/report.hpp"
#include "discover/synthetic.hpp"

using namespace discover;

namespace {

// y = 10 inside x1 > 0.6 and 0.3 <= x2 <= 0.55, else 0.
Table planted_step(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 600;
  std::vector<double> x1(n), x2(n), x3(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = rng.uniform();
    x2[i] = rng.uniform();
    x3[i] = rng.uniform();
    y[i] = synthetic::in_planted({}, x1[i], x2[i]) ? 10.0 : 0.0;
  }
  return Table({Column::numeric("x1", x1), Column::numeric("x2", x2), Column::numeric("x3", x3),
                Column::numeric("y", y)});
}

RunConfig small_config() {
  RunConfig c;
  c.data = "planted.csv";
  c.target = "y";
  c.seed = 3;
  c.budget.max_candidates = 2;
  c.budget.family_candidates = {{ModelFamily::random_forest, 1}, {ModelFamily::gbdt, 1}};
  c.importance_repeats = 2;
  return c;
}

const PipelineResult& planted_run() {
  static const PipelineResult r = run_pipeline(small_config(), planted_step(11));
  return r;
}

std::vector<std::uint8_t> oracle_mask(const Table& t, const std::vector<Condition>& conds) {
  std::vector<std::uint8_t> m(t.row_count(), 1);
  for (std::size_t i = 0; i < t.row_count(); ++i)
    for (const auto& c : conds) {
      const auto& col = t.column(c.feature);
      const double v = col.values[i];
      bool in = !col.missing[i];
      if (c.form == ConditionForm::quantile_above) in = in && v > c.threshold;
      else if (c.form == ConditionForm::quantile_below) in = in && v <= c.threshold;
      else if (c.form == ConditionForm::interval) in = in && v >= c.lo && v <= c.hi;
      else in = in && col.level_of(i) == c.level;
      m[i] &= in;
    }
  return m;
}

}  // namespace

TEST(Report, PlantedRunHasADiscoveryAndTheExactSubgroupFigureHasMeanTen) {
  const auto& r = planted_run();
  const auto rep = build_report(r, "t");
  ASSERT_FALSE(rep.discoveries.empty());
  EXPECT_TRUE(synthetic::matches_planted(rep.discoveries.front().pattern));
  EXPECT_EQ(rep.figures.front().kind, "violin");

  Condition above;
  above.feature = "x1";
  above.form = ConditionForm::quantile_above;
  above.q = 0.6;
  above.threshold = 0.6;
  Pattern planted;
  planted.conditions = {above, interval_condition("x2", 0.3, 0.55)};
  const auto fig = figure_payload(r, planted);
  ASSERT_EQ(fig.groups.size(), 4u);
  EXPECT_EQ(fig.groups.front().role, "overall");
  EXPECT_EQ(fig.groups.back().role, "conjunction");
  EXPECT_EQ(fig.groups.back().mu, 10.0);
  const auto whole = planted_step(11).with_target("y");
  const auto e = evaluate_pattern(whole, r.encoding, planted);
  EXPECT_EQ(fig.groups.back().n, e.n);
  EXPECT_EQ(fig.groups.back().mu, e.mu);
  EXPECT_EQ(*fig.groups.back().p, e.p);
}

TEST(Report, JsonRoundTripsLosslessly) {
  const auto rep = build_report(planted_run(), "2026-01-01T00:00:00Z");
  const auto text = to_json(rep).dump(2);
  const auto back = report_from_json(nlohmann::ordered_json::parse(text));
  EXPECT_EQ(to_json(back).dump(2), text);
}

TEST(Report, ConfigHashRecomputesFromEmbeddedConfig) {
  const auto j = to_json(build_report(planted_run(), "t"));
  EXPECT_EQ(config_hash(run_config_from_json(j.at("config"))), j.at("metadata").at("config_hash").get<std::string>());
}

TEST(Report, EveryPatternPassesClassification) {
  const auto rep = build_report(planted_run(), "t");
  for (const auto* list : {&rep.discoveries, &rep.hypotheses})
    for (const auto& m : *list) {
      const auto kind = classify_pattern(m.train, m.holdout, m.holdout_adjusted_p, m.pattern.effect,
                                         m.model_effect, rep.config.mining);
      EXPECT_EQ(kind, m.pattern.kind);
    }
  for (std::size_t k = 1; k < rep.discoveries.size(); ++k)
    EXPECT_LT(rep.discoveries[k - 1].holdout.novelty_rank, rep.discoveries[k].holdout.novelty_rank);
}

TEST(Report, FigureGroupsRecomputeFromRawRows) {
  const auto& r = planted_run();
  const auto rep = build_report(r, "t");
  ASSERT_EQ(rep.figures.size(), rep.discoveries.size() + rep.hypotheses.size());
  std::vector<const MinedPattern*> patterns;
  for (const auto& m : rep.discoveries) patterns.push_back(&m);
  for (const auto& m : rep.hypotheses) patterns.push_back(&m);
  for (std::size_t f = 0; f < rep.figures.size(); ++f) {
    const auto& fig = rep.figures[f];
    const auto& conds = patterns[f]->pattern.conditions;
    ASSERT_EQ(fig.groups.size(), conds.size() + 2);
    std::size_t min_single = r.train.row_count() + r.holdout.row_count();
    for (std::size_t g = 0; g < fig.groups.size(); ++g) {
      std::vector<Condition> subset;
      if (g > 0 && g <= conds.size()) subset = {conds[g - 1]};
      if (g == fig.groups.size() - 1) subset = conds;
      std::size_t n = 0;
      double sum = 0.0;
      for (const Table* t : {&r.train, &r.holdout}) {
        const auto mask = oracle_mask(*t, subset);
        for (std::size_t i = 0; i < t->row_count(); ++i)
          if (mask[i]) {
            ++n;
            sum += t->column("y").values[i];
          }
      }
      EXPECT_EQ(fig.groups[g].n, n);
      EXPECT_NEAR(fig.groups[g].mu, sum / static_cast<double>(n), 1e-12);
      EXPECT_EQ(fig.groups[g].values.size(), n);
      if (fig.groups[g].role == "condition") min_single = std::min(min_single, n);
    }
    EXPECT_LE(fig.groups.back().n, min_single);
  }
}

TEST(Report, MarkdownHasOneSectionPerPatternWithTriplets) {
  const auto rep = build_report(planted_run(), "t");
  const auto md = render_markdown(rep);
  EXPECT_EQ(md, render_markdown(rep));
  const std::regex section("\n### ");
  const auto sections = std::distance(std::sregex_iterator(md.begin(), md.end(), section), std::sregex_iterator());
  EXPECT_EQ(static_cast<std::size_t>(sections), rep.discoveries.size() + rep.hypotheses.size());
  for (const auto& m : rep.discoveries) EXPECT_NE(md.find(detail::triplet(m.holdout)), std::string::npos);
  EXPECT_NE(md.find("n = "), std::string::npos);
  EXPECT_NE(md.find(", μ = "), std::string::npos);
}

TEST(Report, MarkdownNumbersComeFromTheJson) {
  // Every evidence triplet in the Markdown is a rounding of a JSON triplet.
  const auto rep = build_report(planted_run(), "t");
  const auto md = render_markdown(rep);
  const auto j = to_json(rep);
  const std::regex triplet(R"(n = (\d+), μ = ([-0-9.e+]+), p = ([-0-9.e+]+))");
  std::size_t found = 0;
  for (auto it = std::sregex_iterator(md.begin(), md.end(), triplet); it != std::sregex_iterator(); ++it) {
    ++found;
    const std::size_t n = std::stoul((*it)[1]);
    const double mu = std::stod((*it)[2]);
    const double p = std::stod((*it)[3]);
    bool matched = false;
    for (const char* list : {"discoveries", "hypotheses"})
      for (const auto& m : j.at(list))
        for (const char* side : {"train", "holdout"}) {
          const auto& e = m.at(side);
          if (e.at("n").get<std::size_t>() != n) continue;
          const double jm = e.at("mu").get<double>();
          const double jp = e.at("p").get<double>();
          if (std::abs(jm - mu) <= 5e-4 * std::max(1.0, std::abs(jm)) && std::abs(jp - p) <= 5e-3 * jp) matched = true;
        }
    EXPECT_TRUE(matched) << (*it)[0];
  }
  EXPECT_EQ(found, 2 * (rep.discoveries.size() + rep.hypotheses.size()));
}

TEST(Report, EmptyReportStillRenders) {
  RunReport rep;
  rep.config.target = "y";
  const auto md = render_markdown(rep);
  EXPECT_EQ(md.rfind("# Discovery report: y", 0), 0u);
  EXPECT_NE(md.find("No patterns were found."), std::string::npos);
  const auto j = to_json(rep);
  EXPECT_TRUE(j.at("discoveries").empty());
  EXPECT_NO_THROW(nlohmann::ordered_json::parse(j.dump()));
}

TEST(Report, IdenticalRunsDifferOnlyInTimestamp) {
  const auto a = to_json(build_report(run_pipeline(small_config(), planted_step(11)), "a"));
  const auto b = to_json(build_report(planted_run(), "b"));
  EXPECT_NE(a.dump(), b.dump());
  EXPECT_EQ(masked_report_json(a), masked_report_json(b));
}

TEST(Report, RunDirectoryIsNamedByConfigHashAndComplete) {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "discover_report_test";
  fs::remove_all(root);
  const auto& r = planted_run();
  const auto rep = build_report(r, "t");
  const auto dir = write_run_directory(r, rep, root);
  EXPECT_EQ(dir.filename().string(), config_hash(r.config));
  for (const char* f : {"report.json", "report.md", "model.json", "plan.json", "leaderboard.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root)) ++entries;
  EXPECT_EQ(entries, 1u);
  const auto model = model_from_json(nlohmann::ordered_json::parse(std::ifstream(dir / "model.json")));
  EXPECT_EQ(spec_key(model.spec), spec_key(rep.best_model));
  fs::remove_all(root);
}
