#pragma once

// One analysis from raw CSV to mined patterns: ingest, split, preprocess on
// the training rows, search for a model, rank features by holdout
// permutation importance, then mine patterns on the raw (unscaled) rows.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "discover/automl.hpp"
#include "discover/config.hpp"
#include "discover/error.hpp"
#include "discover/metrics.hpp"
#include "discover/models/model.hpp"
#include "discover/patterns.hpp"
#include "discover/preprocess.hpp"
#include "discover/rng.hpp"
#include "discover/table.hpp"
#include "discover/task.hpp"

namespace discover {

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;
};

struct DataSummary {
  std::size_t rows_read = 0;
  std::size_t rows_missing_target = 0;
  std::size_t duplicates_removed = 0;
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
  std::vector<std::size_t> holdout_row_ids;  // 0-based data-row index in the CSV
};

struct PipelineResult {
  RunConfig config;
  TargetEncoding encoding;
  MetricId primary = MetricId::rmse;
  DataSummary data;
  Table train;     // raw rows, roles applied
  Table holdout;
  PreprocessPlan plan;
  SearchResult search;
  MetricSet holdout_metrics;
  std::vector<FeatureImportance> importance;  // most important first
  MiningResult mining;
  std::vector<std::string> warnings;
};

namespace detail {

inline CsvOptions csv_options(const RunConfig& c) {
  CsvOptions o;
  for (const auto& name : c.categorical) o.kind_hints[name] = ColumnKind::categorical;
  return o;
}

inline std::string cell_label(const Column& c, std::size_t row) {
  return c.is_numeric() ? numeric_label(c.values[row]) : c.level_of(row);
}

// Target role, ignored columns, and rows without a target dropped.
inline Table prepare_table(const RunConfig& c, const Table& raw, DataSummary& summary,
                           std::vector<std::string>& warnings) {
  if (!raw.find(c.target)) fail(ErrorKind::config, "target column '" + c.target + "' is not in the data");
  if (!c.split.column.empty() && !raw.find(c.split.column))
    fail(ErrorKind::config, "split column '" + c.split.column + "' is not in the data");
  Table t = raw.with_target(c.target);
  std::vector<std::string> ignored = c.ignore;
  if (!c.split.column.empty()) ignored.push_back(c.split.column);
  for (const auto& name : ignored) {
    if (name == c.target) fail(ErrorKind::config, "column '" + name + "' cannot be both target and ignored");
    if (!t.find(name)) {
      warnings.push_back("ignored column '" + name + "' is not in the data");
      continue;
    }
    t = t.with_role(name, ColumnRole::ignored);
  }
  summary.rows_read = t.row_count();
  const auto& target = t.target();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < t.row_count(); ++i)
    if (!target.missing[i]) keep.push_back(i);
  summary.rows_missing_target = t.row_count() - keep.size();
  if (keep.size() != t.row_count()) t = t.take(keep);
  if (c.split.dedup) {
    const auto before = t.row_count();
    t = drop_duplicate_features(t);
    summary.duplicates_removed = before - t.row_count();
  }
  if (t.feature_indices().empty()) fail(ErrorKind::data, "the data has no feature columns");
  return t;
}

inline std::vector<std::size_t> predefined_holdout(const Table& t, const SplitConfig& s) {
  const auto& col = t.column(s.column);
  const std::set<std::string> values(s.holdout_values.begin(), s.holdout_values.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < t.row_count(); ++i)
    if (!col.missing[i] && values.count(cell_label(col, i))) rows.push_back(i);
  if (rows.empty() || rows.size() == t.row_count())
    fail(ErrorKind::data, "split column '" + s.column + "' leaves an empty partition");
  return rows;
}

inline TargetEncoding encoding_for(const RunConfig& c, const Column& target) {
  TargetEncoding e;
  e.task = c.task == "auto" ? infer_task(target) : task_from_string(c.task);
  e.positive_levels = c.positive_levels;
  return resolve_encoding(target, e);
}

inline MetricId primary_for(const RunConfig& c, Task task) {
  const MetricId m = c.primary_metric == "auto"
                         ? (task == Task::regression ? MetricId::rmse : MetricId::accuracy)
                         : metric_from_string(c.primary_metric);
  if (!metric_applies(m, task))
    fail(ErrorKind::config, "primary_metric '" + std::string(to_string(m)) + "' does not fit a " +
                                std::string(to_string(task)) + " target");
  return m;
}

// Column indices of each plan feature inside the encoded layout.
inline std::vector<std::vector<std::size_t>> encoded_groups(const PreprocessPlan& plan) {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t next = 0;
  for (const auto& f : plan.features) {
    const std::size_t width = f.kind == ColumnKind::categorical ? f.levels.size() + 1 : 1;
    std::vector<std::size_t> g(width);
    for (auto& j : g) j = next++;
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace detail

inline Table load_table(const RunConfig& c) {
  const auto path = resolve_data_path(c);
  if (!std::filesystem::exists(path)) fail(ErrorKind::data, "data file '" + path + "' not found");
  return read_csv(path, detail::csv_options(c));
}

// Runs everything on an already loaded table (so several targets can share
// one ingestion pass). Sub-seeds: 1 split, 2 search, 3 importance.
inline PipelineResult run_pipeline(const RunConfig& config, const Table& raw) {
  validate(config);
  PipelineResult r;
  r.config = config;
  const Table table = detail::prepare_table(config, raw, r.data, r.warnings);
  r.encoding = detail::encoding_for(config, table.target());
  r.primary = detail::primary_for(config, r.encoding.task);
  if (r.data.rows_missing_target)
    r.warnings.push_back(std::to_string(r.data.rows_missing_target) + " rows without a target were dropped");
  if (r.data.duplicates_removed)
    r.warnings.push_back(std::to_string(r.data.duplicates_removed) +
                         " rows with duplicate features were dropped before splitting");

  const auto held = config.split.column.empty()
                        ? holdout_rows(table, SplitSpec{config.split.holdout_fraction,
                                                        config.split.stratified &&
                                                            r.encoding.task == Task::binary_classification,
                                                        derive_seed(config.seed, 1)})
                        : detail::predefined_holdout(table, config.split);
  auto parts = split_by_holdout(table, held);
  r.train = std::move(parts.train);
  r.holdout = std::move(parts.holdout);
  r.data.train_rows = r.train.row_count();
  r.data.holdout_rows = r.holdout.row_count();
  r.data.holdout_row_ids = r.holdout.row_ids();

  r.plan = fit_plan(r.train, config.preprocess);
  for (const auto& w : r.plan.warnings) r.warnings.push_back(w);
  const Table enc_train = apply_plan(r.plan, r.train, true);
  const Table enc_hold = apply_plan(r.plan, r.holdout, false);

  SearchBudget budget = config.budget;
  budget.seed = derive_seed(config.seed, 2);
  r.search = search(enc_train, r.encoding, r.primary, budget, config.search);
  for (const auto& w : r.search.leaderboard.warnings) r.warnings.push_back(w);
  const auto& model = r.search.best;

  const auto names = r.plan.encoded_names();
  const auto d_hold = to_dataset(enc_hold, names, &r.encoding);
  r.holdout_metrics = compute_metrics(r.encoding.task, d_hold.y, model.predict(d_hold));

  const auto scores = grouped_permutation_importance(model, d_hold, detail::encoded_groups(r.plan), r.primary,
                                                     config.importance_repeats, derive_seed(config.seed, 3));
  for (std::size_t k = 0; k < scores.size(); ++k) r.importance.push_back({r.plan.features[k].name, scores[k]});
  std::stable_sort(r.importance.begin(), r.importance.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) {
                     if (a.importance != b.importance) return a.importance > b.importance;
                     return a.feature < b.feature;
                   });

  std::vector<std::string> ranked;
  for (const auto& f : r.importance) ranked.push_back(f.feature);
  const auto train_pred = model.predict(to_dataset(apply_plan(r.plan, r.train, false), names));
  r.mining = mine_patterns(r.train, r.holdout, r.encoding, ranked, train_pred, config.mining);
  return r;
}

inline PipelineResult run_pipeline(const RunConfig& config) {
  validate(config);
  return run_pipeline(config, load_table(config));
}

}  // namespace discover
