#pragma once

// Run report: report.json is the canonical artifact and report.md a pure
// projection of it. The wall-clock timestamp lives in metadata.timestamp and
// nowhere else, so two runs of one config differ only there.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "discover/automl.hpp"
#include "discover/config.hpp"
#include "discover/error.hpp"
#include "discover/patterns.hpp"
#include "discover/pipeline.hpp"
#include "discover/preprocess.hpp"
#include "json.hpp"

namespace discover {

inline constexpr std::string_view kToolVersion = "1.0.0";

// One bar or violin: the whole table, one condition alone, or the full
// conjunction. p is absent for the overall group.
struct FigureGroup {
  std::string role;  // overall | condition | conjunction
  std::string label;
  std::size_t n = 0;
  double mu = 0.0;
  std::optional<double> p;
  std::vector<double> values;  // raw target values, violin kind only
};

struct FigurePayload {
  std::string pattern_key;
  std::string kind;  // bar_proportion | violin
  std::vector<FigureGroup> groups;
};

struct RunReport {
  std::string tool_version = std::string(kToolVersion);
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string timestamp;
  RunConfig config;
  TargetEncoding encoding;
  MetricId primary = MetricId::rmse;
  DataSummary data;
  PreprocessPlan plan;
  Leaderboard leaderboard;
  ModelSpec best_model;
  MetricSet holdout_metrics;
  std::vector<FeatureImportance> importance;
  std::vector<std::string> features_searched;
  std::size_t candidates_evaluated = 0;
  std::vector<MinedPattern> discoveries;  // by novelty rank
  std::vector<MinedPattern> hypotheses;
  std::vector<FigurePayload> figures;  // discoveries first, then hypotheses
  std::vector<std::string> warnings;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

struct Rows {
  std::vector<double> y;
  std::vector<std::uint8_t> mask;
};

// Target and mask over train rows followed by holdout rows.
inline Rows figure_rows(const PipelineResult& r, const std::vector<Condition>& conditions) {
  Rows out;
  for (const Table* t : {&r.train, &r.holdout}) {
    const auto y = encode_target(t->target(), r.encoding);
    std::vector<std::uint8_t> mask(t->row_count(), 1);
    for (const auto& c : conditions) {
      const auto m = bind_conditions(*t, c, true);
      for (std::size_t i = 0; i < mask.size(); ++i) mask[i] &= m[i];
    }
    out.y.insert(out.y.end(), y.begin(), y.end());
    out.mask.insert(out.mask.end(), mask.begin(), mask.end());
  }
  return out;
}

inline FigureGroup figure_group(const PipelineResult& r, std::string role, std::string label,
                                const std::vector<Condition>& conditions, Effect effect, bool violin) {
  const auto rows = figure_rows(r, conditions);
  FigureGroup g;
  g.role = std::move(role);
  g.label = std::move(label);
  std::vector<double> sub;
  for (std::size_t i = 0; i < rows.y.size(); ++i)
    if (rows.mask[i] && !std::isnan(rows.y[i])) sub.push_back(rows.y[i]);
  g.n = sub.size();
  g.mu = mean_of(sub);
  if (!conditions.empty()) g.p = evidence_from_mask(rows.y, rows.mask, effect).p;
  if (violin) g.values = std::move(sub);
  return g;
}

}  // namespace detail

// Overall distribution, each condition alone, then the conjunction.
inline FigurePayload figure_payload(const PipelineResult& r, const Pattern& p) {
  const bool violin = r.encoding.task == Task::regression;
  FigurePayload f;
  f.pattern_key = pattern_key(p);
  f.kind = violin ? "violin" : "bar_proportion";
  f.groups.push_back(detail::figure_group(r, "overall", "all rows", {}, p.effect, violin));
  for (const auto& c : p.conditions)
    f.groups.push_back(detail::figure_group(r, "condition", condition_label(c), {c}, p.effect, violin));
  f.groups.push_back(detail::figure_group(r, "conjunction", pattern_label(p), p.conditions, p.effect, violin));
  return f;
}

inline RunReport build_report(const PipelineResult& r, std::string timestamp = utc_timestamp()) {
  RunReport rep;
  rep.config_hash = config_hash(r.config);
  rep.seed = r.config.seed;
  rep.timestamp = std::move(timestamp);
  rep.config = r.config;
  rep.encoding = r.encoding;
  rep.primary = r.primary;
  rep.data = r.data;
  rep.plan = r.plan;
  rep.leaderboard = r.search.leaderboard;
  rep.best_model = r.search.best.spec;
  rep.holdout_metrics = r.holdout_metrics;
  rep.importance = r.importance;
  rep.features_searched = r.mining.features;
  rep.candidates_evaluated = r.mining.candidates_evaluated;
  for (const auto& m : r.mining.patterns) {
    if (m.pattern.kind == PatternKind::discovery) rep.discoveries.push_back(m);
    if (m.pattern.kind == PatternKind::hypothesis) rep.hypotheses.push_back(m);
  }
  for (const auto* list : {&rep.discoveries, &rep.hypotheses})
    for (const auto& m : *list) rep.figures.push_back(figure_payload(r, m.pattern));
  rep.warnings = r.warnings;
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const FigurePayload& f) {
  nlohmann::ordered_json j;
  j["pattern_key"] = f.pattern_key;
  j["kind"] = f.kind;
  j["groups"] = nlohmann::ordered_json::array();
  for (const auto& g : f.groups) {
    nlohmann::ordered_json x;
    x["role"] = g.role;
    x["label"] = g.label;
    x["n"] = g.n;
    x["mu"] = g.mu;
    x["p"] = g.p ? nlohmann::ordered_json(*g.p) : nlohmann::ordered_json(nullptr);
    x["values"] = g.values;
    j["groups"].push_back(std::move(x));
  }
  return j;
}

inline FigurePayload figure_from_json(const nlohmann::ordered_json& j) {
  FigurePayload f;
  f.pattern_key = j.at("pattern_key").get<std::string>();
  f.kind = j.at("kind").get<std::string>();
  for (const auto& x : j.at("groups")) {
    FigureGroup g;
    g.role = x.at("role").get<std::string>();
    g.label = x.at("label").get<std::string>();
    g.n = x.at("n").get<std::size_t>();
    g.mu = x.at("mu").get<double>();
    if (!x.at("p").is_null()) g.p = x.at("p").get<double>();
    g.values = x.at("values").get<std::vector<double>>();
    f.groups.push_back(std::move(g));
  }
  return f;
}

inline nlohmann::ordered_json to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["metadata"] = {{"tool", "discover"},
                   {"version", r.tool_version},
                   {"config_hash", r.config_hash},
                   {"seed", r.seed},
                   {"timestamp", r.timestamp}};
  j["config"] = to_json(r.config);
  j["task"] = {{"target", r.config.target},
               {"task", to_string(r.encoding.task)},
               {"positive_levels", r.encoding.positive_levels},
               {"primary_metric", to_string(r.primary)}};
  j["data"] = {{"rows_read", r.data.rows_read},
               {"rows_missing_target", r.data.rows_missing_target},
               {"duplicates_removed", r.data.duplicates_removed},
               {"train_rows", r.data.train_rows},
               {"holdout_rows", r.data.holdout_rows},
               {"holdout_row_ids", r.data.holdout_row_ids}};
  j["preprocess"] = to_json(r.plan);
  j["leaderboard"] = to_json(r.leaderboard);
  j["best_model"] = {{"spec", to_json(r.best_model)}, {"key", spec_key(r.best_model)},
                     {"holdout_metrics", to_json(r.holdout_metrics)}};
  j["feature_importance"] = nlohmann::ordered_json::array();
  for (const auto& f : r.importance)
    j["feature_importance"].push_back({{"feature", f.feature}, {"importance", f.importance}});
  j["mining"] = {{"features_searched", r.features_searched}, {"candidates_evaluated", r.candidates_evaluated}};
  for (const auto& [key, list] : {std::pair{"discoveries", &r.discoveries}, std::pair{"hypotheses", &r.hypotheses}}) {
    j[key] = nlohmann::ordered_json::array();
    for (const auto& m : *list) j[key].push_back(to_json(m));
  }
  j["figures"] = nlohmann::ordered_json::array();
  for (const auto& f : r.figures) j["figures"].push_back(to_json(f));
  j["warnings"] = r.warnings;
  return j;
}

inline RunReport report_from_json(const nlohmann::ordered_json& j) {
  RunReport r;
  const auto& meta = j.at("metadata");
  r.tool_version = meta.at("version").get<std::string>();
  r.config_hash = meta.at("config_hash").get<std::string>();
  r.seed = meta.at("seed").get<std::uint64_t>();
  r.timestamp = meta.at("timestamp").get<std::string>();
  r.config = run_config_from_json(j.at("config"));
  const auto& task = j.at("task");
  r.encoding.task = task_from_string(task.at("task").get<std::string>());
  r.encoding.positive_levels = task.at("positive_levels").get<std::vector<std::string>>();
  r.primary = metric_from_string(task.at("primary_metric").get<std::string>());
  const auto& d = j.at("data");
  r.data.rows_read = d.at("rows_read").get<std::size_t>();
  r.data.rows_missing_target = d.at("rows_missing_target").get<std::size_t>();
  r.data.duplicates_removed = d.at("duplicates_removed").get<std::size_t>();
  r.data.train_rows = d.at("train_rows").get<std::size_t>();
  r.data.holdout_rows = d.at("holdout_rows").get<std::size_t>();
  r.data.holdout_row_ids = d.at("holdout_row_ids").get<std::vector<std::size_t>>();
  r.plan = plan_from_json(j.at("preprocess"));
  r.leaderboard = leaderboard_from_json(j.at("leaderboard"));
  r.best_model = spec_from_json(j.at("best_model").at("spec"));
  r.holdout_metrics = metric_set_from_json(j.at("best_model").at("holdout_metrics"), r.encoding.task);
  for (const auto& f : j.at("feature_importance"))
    r.importance.push_back({f.at("feature").get<std::string>(), f.at("importance").get<double>()});
  r.features_searched = j.at("mining").at("features_searched").get<std::vector<std::string>>();
  r.candidates_evaluated = j.at("mining").at("candidates_evaluated").get<std::size_t>();
  for (const auto& m : j.at("discoveries")) r.discoveries.push_back(mined_pattern_from_json(m));
  for (const auto& m : j.at("hypotheses")) r.hypotheses.push_back(mined_pattern_from_json(m));
  for (const auto& f : j.at("figures")) r.figures.push_back(figure_from_json(f));
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

// report.json with the timestamp blanked, for byte comparisons between runs.
inline std::string masked_report_json(nlohmann::ordered_json j) {
  j["metadata"]["timestamp"] = "";
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Markdown

namespace detail {

inline std::string fmt(const char* spec, double v) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string triplet(const PatternEvidence& e) {
  return "n = " + std::to_string(e.n) + ", μ = " + fmt("%.4g", e.mu) + ", p = " + fmt("%.3g", e.p);
}

inline std::string effect_size_name(Effect e) {
  if (e == Effect::odds_increase || e == Effect::odds_decrease) return "difference in proportions";
  if (is_variance_effect(e)) return "difference in mean absolute deviation";
  return "difference in means";
}

inline void pattern_section(std::ostringstream& md, const char* tag, std::size_t index, const MinedPattern& m) {
  const auto& p = m.pattern;
  md << "### " << tag << index << ". " << pattern_label(p) << "\n\n";
  md << "- Claim: " << to_string(p.effect) << "\n";
  md << "- Holdout: " << triplet(m.holdout) << " (BH-adjusted p = " << fmt("%.3g", m.holdout_adjusted_p)
     << ")\n";
  md << "- Training: " << triplet(m.train) << "\n";
  md << "- Effect size (" << effect_size_name(p.effect) << ", subgroup minus rest): holdout "
     << fmt("%.4g", m.holdout.effect_size) << ", training " << fmt("%.4g", m.train.effect_size) << "\n";
  if (m.model_effect) md << "- Model-predicted effect on training rows: " << fmt("%.4g", *m.model_effect) << "\n";
  md << "- Test: one-tailed " << (m.holdout.test.test == TestKind::proportions_z ? "proportions z-test" : "Mann-Whitney U test")
     << " (" << to_string(m.holdout.test.direction) << ")\n";
  md << "- Novelty rank: " << m.holdout.novelty_rank << "\n\n";
}

}  // namespace detail

inline std::string render_markdown(const RunReport& r) {
  using detail::fmt;
  std::ostringstream md;
  md << "# Discovery report: " << r.config.target << "\n\n";
  md << "Config `" << r.config_hash << "`, seed " << r.seed << ", generated " << r.timestamp << ".\n\n";

  md << "## Data\n\n";
  md << "- Source: `" << r.config.data << "`\n";
  md << "- Task: " << to_string(r.encoding.task);
  if (!r.encoding.positive_levels.empty()) {
    md << " (positive:";
    for (const auto& l : r.encoding.positive_levels) md << " " << l;
    md << ")";
  }
  md << "\n";
  md << "- Rows: " << r.data.rows_read << " read, " << r.data.rows_missing_target << " without target, "
     << r.data.duplicates_removed << " duplicates removed, " << r.data.train_rows << " train, "
     << r.data.holdout_rows << " holdout\n\n";

  md << "## Best model\n\n";
  md << "`" << spec_key(r.best_model) << "`\n\n| metric | holdout |\n|---|---|\n";
  for (const auto& [id, v] : r.holdout_metrics.values) md << "| " << to_string(id) << " | " << fmt("%.4g", v) << " |\n";
  md << "\n";

  md << "## Leaderboard\n\n";
  md << "| rank | model | validation " << to_string(r.primary) << " | train " << to_string(r.primary)
     << " | overfit gap | flagged |\n|---|---|---|---|---|---|\n";
  for (std::size_t k = 0; k < r.leaderboard.entries.size(); ++k) {
    const auto& e = r.leaderboard.entries[k];
    md << "| " << k + 1 << (k == r.leaderboard.best_index ? " (selected)" : "") << " | " << spec_key(e.spec)
       << " | " << fmt("%.4g", e.validation.at(r.primary)) << " | " << fmt("%.4g", e.train.at(r.primary))
       << " | " << fmt("%.4g", e.overfit_gap) << " | " << (e.overfit ? "yes" : "no") << " |\n";
  }
  md << "\n";

  md << "## Feature importance\n\n| feature | importance |\n|---|---|\n";
  for (const auto& f : r.importance) md << "| " << f.feature << " | " << fmt("%.4g", f.importance) << " |\n";
  md << "\n";

  if (r.discoveries.empty() && r.hypotheses.empty()) {
    md << "## Patterns\n\nNo patterns were found.\n\n";
  } else {
    md << "## Discoveries\n\n";
    if (r.discoveries.empty()) md << "None.\n\n";
    for (std::size_t k = 0; k < r.discoveries.size(); ++k) detail::pattern_section(md, "D", k + 1, r.discoveries[k]);
    md << "## Hypotheses\n\n";
    if (r.hypotheses.empty()) md << "None.\n\n";
    for (std::size_t k = 0; k < r.hypotheses.size(); ++k) detail::pattern_section(md, "H", k + 1, r.hypotheses[k]);
  }

  if (!r.warnings.empty()) {
    md << "## Warnings\n\n";
    for (const auto& w : r.warnings) md << "- " << w << "\n";
    md << "\n";
  }
  return md.str();
}

// ---------------------------------------------------------------------------
// Run directory

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::pipeline, "cannot write '" + path.string() + "'");
}

// Writes <out_root>/<config hash>/ with report.json, report.md, model.json,
// plan.json and leaderboard.json. Files go to a temporary sibling first and
// the directory is renamed into place, replacing an earlier run of the same
// config.
inline std::filesystem::path write_run_directory(const PipelineResult& result, const RunReport& report,
                                                 const std::filesystem::path& out_root) {
  namespace fs = std::filesystem;
  fs::create_directories(out_root);
  const fs::path final_dir = out_root / report.config_hash;
  const fs::path tmp = out_root / ("." + report.config_hash + ".tmp" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  try {
    write_text(tmp / "report.json", to_json(report).dump(2) + "\n");
    write_text(tmp / "report.md", render_markdown(report));
    write_text(tmp / "model.json", to_json(result.search.best).dump() + "\n");
    write_text(tmp / "plan.json", to_json(result.plan).dump(2) + "\n");
    write_text(tmp / "leaderboard.json", to_json(result.search.leaderboard).dump(2) + "\n");
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(tmp, ignored);
    throw;
  }
  return final_dir;
}

}  // namespace discover
