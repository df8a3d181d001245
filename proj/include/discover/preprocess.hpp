#pragma once

// Cleaning pipeline fitted on training rows only: median/mode imputation,
// z-score scaling, one-hot encoding with an "unseen" slot, exact-duplicate
// removal and robust-z outlier removal (the last two on training data only).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "discover/error.hpp"
#include "discover/table.hpp"
#include "json.hpp"

namespace discover {

inline constexpr std::string_view kUnseenLevel = "<unseen>";

// Robust z = (x - median) / (1.4826 * MAD). A column only takes part when its
// MAD is positive and it flags at most max(1, max_flag_fraction * n) training
// rows; columns with heavier tails are treated as genuinely skewed, not dirty.
struct OutlierRule {
  bool enabled = true;
  double z_threshold = 4.0;
  double max_flag_fraction = 0.02;
};

struct PreprocessOptions {
  bool dedup = true;
  OutlierRule outliers;
};

struct FeaturePlan {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // numeric
  double impute_value = 0.0;
  double mean = 0.0;
  double stddev = 1.0;
  double median = 0.0;
  double robust_scale = 0.0;
  bool outlier_checked = false;
  // categorical / binary
  std::vector<std::string> levels;  // training levels; one-hot adds kUnseenLevel
  std::string impute_level;
};

struct PreprocessPlan {
  std::string target;
  std::vector<FeaturePlan> features;
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
  bool dedup_enabled = true;
  OutlierRule outlier_rule;

  // Names of the encoded columns apply_plan produces, in order.
  std::vector<std::string> encoded_names() const {
    std::vector<std::string> out;
    for (const auto& f : features) {
      if (f.kind == ColumnKind::numeric) {
        out.push_back(f.name);
      } else if (f.kind == ColumnKind::binary) {
        out.push_back(f.name + "=" + f.levels.back());
      } else {
        for (const auto& l : f.levels) out.push_back(f.name + "=" + l);
        out.push_back(f.name + "=" + std::string(kUnseenLevel));
      }
    }
    return out;
  }
};

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline std::vector<std::size_t> rows_with_target(const Table& table) {
  std::vector<std::size_t> rows;
  auto t = table.target_index();
  for (std::size_t i = 0; i < table.row_count(); ++i)
    if (!t || !table.column(*t).missing[i]) rows.push_back(i);
  return rows;
}

// Imputed value of a numeric plan column at a row.
inline double imputed(const Column& c, const FeaturePlan& f, std::size_t row) {
  return c.missing[row] ? f.impute_value : c.values[row];
}

// Imputed level string of a categorical/binary plan column at a row.
inline const std::string& imputed_level(const Column& c, const FeaturePlan& f, std::size_t row) {
  return c.missing[row] ? f.impute_level : c.level_of(row);
}

inline std::string row_key(const Table& table, const std::vector<std::size_t>& cols,
                           const PreprocessPlan& plan, std::size_t row) {
  std::string key;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& c = table.column(cols[k]);
    const auto& f = plan.features[k];
    if (f.kind == ColumnKind::numeric) key += format_real(imputed(c, f, row));
    else key += imputed_level(c, f, row);
    key += '\x1f';
  }
  return key;
}

inline std::vector<std::size_t> plan_columns(const PreprocessPlan& plan, const Table& table) {
  std::vector<std::size_t> cols;
  for (const auto& f : plan.features) {
    auto j = table.find(f.name);
    if (!j) fail(ErrorKind::schema, "table lacks planned column '" + f.name + "'");
    const bool numeric = table.column(*j).is_numeric();
    if (numeric != (f.kind == ColumnKind::numeric))
      fail(ErrorKind::schema, "column '" + f.name + "' changed kind since the plan was fitted");
    cols.push_back(*j);
  }
  return cols;
}

inline std::vector<std::size_t> dedup_rows(const Table& table, const std::vector<std::size_t>& cols,
                                           const PreprocessPlan& plan,
                                           const std::vector<std::size_t>& rows) {
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> keep;
  for (auto r : rows)
    if (seen.insert(row_key(table, cols, plan, r)).second) keep.push_back(r);
  return keep;
}

inline bool is_outlier(const Table& table, const std::vector<std::size_t>& cols,
                       const PreprocessPlan& plan, std::size_t row) {
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& f = plan.features[k];
    if (!f.outlier_checked) continue;
    const double z = (imputed(table.column(cols[k]), f, row) - f.median) / f.robust_scale;
    if (std::abs(z) > plan.outlier_rule.z_threshold) return true;
  }
  return false;
}

}  // namespace detail

inline PreprocessPlan fit_plan(const Table& train, const PreprocessOptions& options = {}) {
  require(train.row_count() > 0, ErrorKind::data, "cannot fit a plan on an empty table");
  PreprocessPlan plan;
  plan.target = train.target().schema.name;
  plan.dedup_enabled = options.dedup;
  plan.outlier_rule = options.outliers;

  const auto rows = detail::rows_with_target(train);
  require(!rows.empty(), ErrorKind::data, "every training row has a missing target");

  // Imputation values and level lists.
  std::vector<std::size_t> cols;
  for (auto j : train.feature_indices()) {
    const auto& c = train.column(j);
    FeaturePlan f;
    f.name = c.schema.name;
    f.kind = c.schema.kind;
    if (c.is_numeric()) {
      std::vector<double> present;
      for (auto r : rows)
        if (!c.missing[r]) present.push_back(c.values[r]);
      if (present.empty()) {
        plan.dropped.push_back(f.name);
        plan.warnings.push_back("column '" + f.name + "' is entirely missing; dropped");
        continue;
      }
      f.impute_value = detail::median_of(std::move(present));
    } else {
      std::vector<std::size_t> counts(c.levels.size(), 0);
      for (auto r : rows)
        if (!c.missing[r]) ++counts[c.codes[r]];
      for (std::size_t l = 0; l < counts.size(); ++l)
        if (counts[l] > 0) f.levels.push_back(c.levels[l]);
      if (f.levels.empty()) {
        plan.dropped.push_back(f.name);
        plan.warnings.push_back("column '" + f.name + "' is entirely missing; dropped");
        continue;
      }
      const auto mode = std::max_element(counts.begin(), counts.end()) - counts.begin();
      f.impute_level = c.levels[static_cast<std::size_t>(mode)];
      if (f.levels.size() < 2) {
        plan.dropped.push_back(f.name);
        continue;
      }
      if (f.kind == ColumnKind::binary && f.levels.size() != 2) f.kind = ColumnKind::categorical;
    }
    plan.features.push_back(std::move(f));
    cols.push_back(j);
  }

  // Scale and outlier statistics over the rows that training will keep
  // before outlier removal.
  const auto kept = plan.dedup_enabled ? detail::dedup_rows(train, cols, plan, rows) : rows;
  const double n = static_cast<double>(kept.size());
  std::vector<FeaturePlan> surviving;
  for (std::size_t k = 0; k < plan.features.size(); ++k) {
    auto f = plan.features[k];
    if (f.kind != ColumnKind::numeric) {
      surviving.push_back(std::move(f));
      continue;
    }
    const auto& c = train.column(cols[k]);
    std::vector<double> v;
    v.reserve(kept.size());
    for (auto r : kept) v.push_back(detail::imputed(c, f, r));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      plan.dropped.push_back(f.name);
      continue;
    }
    f.mean = mean;
    f.stddev = sd;
    f.median = detail::median_of(v);
    std::vector<double> dev;
    dev.reserve(v.size());
    for (double x : v) dev.push_back(std::abs(x - f.median));
    f.robust_scale = 1.4826 * detail::median_of(std::move(dev));
    if (plan.outlier_rule.enabled && f.robust_scale > 0.0) {
      std::size_t flagged = 0;
      for (double x : v)
        if (std::abs(x - f.median) / f.robust_scale > plan.outlier_rule.z_threshold) ++flagged;
      const double allowed = std::max(1.0, plan.outlier_rule.max_flag_fraction * n);
      f.outlier_checked = static_cast<double>(flagged) <= allowed;
    }
    surviving.push_back(std::move(f));
  }
  plan.features = std::move(surviving);
  if (plan.features.empty()) fail(ErrorKind::data, "no usable feature columns");
  return plan;
}

// Encodes `table` with `plan`. The output holds the encoded features followed
// by the untouched target column (when present). Training mode also drops
// rows with a missing target, duplicate feature rows and outlier rows;
// otherwise every row is kept in order.
inline Table apply_plan(const PreprocessPlan& plan, const Table& table, bool is_training) {
  const auto cols = detail::plan_columns(plan, table);
  auto target = table.find(plan.target);

  std::vector<std::size_t> rows;
  if (is_training) {
    rows = detail::rows_with_target(table);
    if (plan.dedup_enabled) rows = detail::dedup_rows(table, cols, plan, rows);
    if (plan.outlier_rule.enabled) {
      std::erase_if(rows, [&](std::size_t r) { return detail::is_outlier(table, cols, plan, r); });
    }
  } else {
    rows.resize(table.row_count());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }

  std::vector<Column> out;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const auto& f = plan.features[k];
    const auto& c = table.column(cols[k]);
    if (f.kind == ColumnKind::numeric) {
      std::vector<double> v;
      v.reserve(rows.size());
      for (auto r : rows) v.push_back((detail::imputed(c, f, r) - f.mean) / f.stddev);
      out.push_back(Column::numeric(f.name, std::move(v)));
      continue;
    }
    if (f.kind == ColumnKind::binary) {
      std::vector<double> v;
      v.reserve(rows.size());
      for (auto r : rows) {
        const auto& level = detail::imputed_level(c, f, r);
        const bool known = level == f.levels[0] || level == f.levels[1];
        v.push_back((known ? level : f.impute_level) == f.levels[1] ? 1.0 : 0.0);
      }
      out.push_back(Column::numeric(f.name + "=" + f.levels[1], std::move(v)));
      continue;
    }
    // Map each table code to a slot in the plan's level list (or unseen).
    std::vector<std::size_t> slot(c.levels.size(), f.levels.size());
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      auto it = std::lower_bound(f.levels.begin(), f.levels.end(), c.levels[l]);
      if (it != f.levels.end() && *it == c.levels[l])
        slot[l] = static_cast<std::size_t>(it - f.levels.begin());
    }
    const auto impute_slot = static_cast<std::size_t>(
        std::lower_bound(f.levels.begin(), f.levels.end(), f.impute_level) - f.levels.begin());
    std::vector<std::vector<double>> onehot(f.levels.size() + 1,
                                            std::vector<double>(rows.size(), 0.0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i];
      onehot[c.missing[r] ? impute_slot : slot[c.codes[r]]][i] = 1.0;
    }
    for (std::size_t l = 0; l <= f.levels.size(); ++l) {
      const std::string level = l < f.levels.size() ? f.levels[l] : std::string(kUnseenLevel);
      out.push_back(Column::numeric(f.name + "=" + level, std::move(onehot[l])));
    }
  }

  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(table.row_ids()[r]);
  if (target) {
    auto t = table.take(rows).column(*target);
    t.schema.role = ColumnRole::target;
    out.push_back(std::move(t));
  }
  return Table(std::move(out), std::move(ids));
}

inline nlohmann::ordered_json to_json(const PreprocessPlan& plan) {
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& f : plan.features) {
    nlohmann::ordered_json j;
    j["name"] = f.name;
    j["kind"] = to_string(f.kind);
    if (f.kind == ColumnKind::numeric) {
      j["impute_value"] = f.impute_value;
      j["mean"] = f.mean;
      j["stddev"] = f.stddev;
      j["median"] = f.median;
      j["robust_scale"] = f.robust_scale;
      j["outlier_checked"] = f.outlier_checked;
    } else {
      j["levels"] = f.levels;
      j["impute_level"] = f.impute_level;
    }
    features.push_back(std::move(j));
  }
  nlohmann::ordered_json j;
  j["target"] = plan.target;
  j["features"] = std::move(features);
  j["dropped"] = plan.dropped;
  j["warnings"] = plan.warnings;
  j["dedup_enabled"] = plan.dedup_enabled;
  j["outlier_rule"] = {{"enabled", plan.outlier_rule.enabled},
                       {"z_threshold", plan.outlier_rule.z_threshold},
                       {"max_flag_fraction", plan.outlier_rule.max_flag_fraction}};
  return j;
}

inline PreprocessPlan plan_from_json(const nlohmann::ordered_json& j) {
  PreprocessPlan plan;
  plan.target = j.at("target").get<std::string>();
  for (const auto& fj : j.at("features")) {
    FeaturePlan f;
    f.name = fj.at("name").get<std::string>();
    f.kind = column_kind_from_string(fj.at("kind").get<std::string>());
    if (f.kind == ColumnKind::numeric) {
      f.impute_value = fj.at("impute_value").get<double>();
      f.mean = fj.at("mean").get<double>();
      f.stddev = fj.at("stddev").get<double>();
      f.median = fj.at("median").get<double>();
      f.robust_scale = fj.at("robust_scale").get<double>();
      f.outlier_checked = fj.at("outlier_checked").get<bool>();
    } else {
      f.levels = fj.at("levels").get<std::vector<std::string>>();
      f.impute_level = fj.at("impute_level").get<std::string>();
    }
    plan.features.push_back(std::move(f));
  }
  plan.dropped = j.at("dropped").get<std::vector<std::string>>();
  plan.warnings = j.at("warnings").get<std::vector<std::string>>();
  plan.dedup_enabled = j.at("dedup_enabled").get<bool>();
  const auto& o = j.at("outlier_rule");
  plan.outlier_rule = {o.at("enabled").get<bool>(), o.at("z_threshold").get<double>(),
                       o.at("max_flag_fraction").get<double>()};
  return plan;
}

}  // namespace discover
