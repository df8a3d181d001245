#pragma once

// Benchmark harness: runs the pipeline on each benchmark dataset and lines
// the measured primary metric up against the published reference values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "discover/config.hpp"
#include "discover/error.hpp"
#include "discover/metrics.hpp"
#include "discover/pipeline.hpp"
#include "discover/report.hpp"
#include "json.hpp"
#include "toml.hpp"

namespace discover {

// ---------------------------------------------------------------------------
// Reference values (published per-target results; NaN where none is reported)

struct ReferenceRow {
  const char* paper;
  const char* group;  // section label
  const char* target;
  const char* trained_by;  // "paper" or "discovery_engine"
  const char* model;
  double accuracy, f1, precision, recall, auc, rmse, r2, mae;
};

inline constexpr double kNone = std::numeric_limits<double>::quiet_NaN();

// clang-format off
inline constexpr ReferenceRow kReferenceRows[] = {
  {"fan2023ihcp", "HCV", "Score", "paper", "Random Forest", 0.915, 0.905, 0.901, 0.923, 0.990, kNone, kNone, kNone},
  {"fan2023ihcp", "HCV", "Score", "discovery_engine", "XGBoost", 0.977, 0.977, 0.967, 0.983, 0.977, kNone, kNone, kNone},
  {"zhang2024predicting", "CCS", "ccs", "paper", "LightGBM", kNone, kNone, kNone, kNone, kNone, 3.26, kNone, 2.35},
  {"zhang2024predicting", "CCS", "ccs", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, 0.28, kNone, 0.21},
  {"todorova2025machine", "Climate Beliefs", "ccwept", "paper", "GBDT", kNone, kNone, kNone, kNone, kNone, kNone, 0.10, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccwept", "discovery_engine", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.14, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccbelief", "paper", "GBDT", kNone, kNone, kNone, kNone, kNone, kNone, 0.57, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccbelief", "discovery_engine", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.63, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccpolicy", "paper", "GBDT", kNone, kNone, kNone, kNone, kNone, kNone, 0.46, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccpolicy", "discovery_engine", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.44, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccshare", "paper", "GBDT", kNone, kNone, kNone, kNone, kNone, kNone, 0.74, kNone},
  {"todorova2025machine", "Climate Beliefs", "ccshare", "discovery_engine", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.73, kNone},
  {"betancourt2021aq", "Ozone", "o3_average_values", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.60, kNone},
  {"betancourt2021aq", "Ozone", "o3_average_values", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.67, kNone},
  {"betancourt2021aq", "Ozone", "o3_daytime_avg", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.63, kNone},
  {"betancourt2021aq", "Ozone", "o3_daytime_avg", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.70, kNone},
  {"betancourt2021aq", "Ozone", "o3_nighttime_avg", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.59, kNone},
  {"betancourt2021aq", "Ozone", "o3_nighttime_avg", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.71, kNone},
  {"betancourt2021aq", "Ozone", "o3_median", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.57, kNone},
  {"betancourt2021aq", "Ozone", "o3_median", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.74, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc25", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.63, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc25", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.74, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc75", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.56, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc75", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.70, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc90", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.59, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc90", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.64, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc98", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.59, kNone},
  {"betancourt2021aq", "Ozone", "o3_perc98", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.68, kNone},
  {"betancourt2021aq", "Ozone", "o3_dma8eu", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.58, kNone},
  {"betancourt2021aq", "Ozone", "o3_dma8eu", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.68, kNone},
  {"betancourt2021aq", "Ozone", "o3_avgdma8epax", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.63, kNone},
  {"betancourt2021aq", "Ozone", "o3_avgdma8epax", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.69, kNone},
  {"betancourt2021aq", "Ozone", "o3_drmdmax1h", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.51, kNone},
  {"betancourt2021aq", "Ozone", "o3_drmdmax1h", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.62, kNone},
  {"betancourt2021aq", "Ozone", "o3_w90", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.51, kNone},
  {"betancourt2021aq", "Ozone", "o3_w90", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.75, kNone},
  {"betancourt2021aq", "Ozone", "o3_aot40", "paper", "Random Forest", kNone, kNone, kNone, kNone, kNone, kNone, 0.60, kNone},
  {"betancourt2021aq", "Ozone", "o3_aot40", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.62, kNone},
  {"betancourt2021aq", "Ozone", "o3_nvgt070", "paper", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.32, kNone},
  {"betancourt2021aq", "Ozone", "o3_nvgt070", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.24, kNone},
  {"betancourt2021aq", "Ozone", "o3_nvgt100", "paper", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.12, kNone},
  {"betancourt2021aq", "Ozone", "o3_nvgt100", "discovery_engine", "Neural Net", kNone, kNone, kNone, kNone, kNone, kNone, 0.61, kNone},
  {"MI2025109252", "Hearing Loss", "HL", "paper", "Random Forest", 0.891, 0.881, 0.896, 0.912, 0.947, kNone, kNone, kNone},
  {"MI2025109252", "Hearing Loss", "HL", "discovery_engine", "Random Forest", 0.893, 0.892, 0.855, 0.925, 0.895, kNone, kNone, kNone},
};
// clang-format on

// Key metric of each group (the one compared per target and averaged).
struct GroupMetric {
  const char* group;
  MetricId metric;
};

inline constexpr GroupMetric kGroupMetrics[] = {
    {"HCV", MetricId::accuracy},          {"CCS", MetricId::rmse},
    {"Climate Beliefs", MetricId::r2},    {"Ozone", MetricId::r2},
    {"Hearing Loss", MetricId::accuracy},
};

inline double reference_metric(const ReferenceRow& r, MetricId m) {
  switch (m) {
    case MetricId::accuracy: return r.accuracy;
    case MetricId::f1: return r.f1;
    case MetricId::precision: return r.precision;
    case MetricId::recall: return r.recall;
    case MetricId::auc: return r.auc;
    case MetricId::rmse: return r.rmse;
    case MetricId::r2: return r.r2;
    case MetricId::mae: return r.mae;
  }
  return kNone;
}

inline MetricId group_metric(std::string_view group) {
  for (const auto& g : kGroupMetrics)
    if (group == g.group) return g.metric;
  fail(ErrorKind::config, "unknown benchmark group '" + std::string(group) + "'");
}

// Published value for one target, by who trained the model.
inline double reference_value(std::string_view group, std::string_view target, std::string_view trained_by) {
  for (const auto& r : kReferenceRows)
    if (group == r.group && target == r.target && trained_by == r.trained_by)
      return reference_metric(r, group_metric(group));
  return kNone;
}

struct ReferenceMean {
  std::string group;
  MetricId metric = MetricId::r2;
  std::size_t targets = 0;
  double paper = 0.0;
  double discovery_engine = 0.0;
};

// Per-group means of the key metric over every target listed for the group.
inline std::vector<ReferenceMean> reference_means() {
  std::vector<ReferenceMean> out;
  for (const auto& g : kGroupMetrics) {
    ReferenceMean m;
    m.group = g.group;
    m.metric = g.metric;
    double paper = 0.0, ours = 0.0;
    for (const auto& r : kReferenceRows) {
      if (m.group != r.group) continue;
      const double v = reference_metric(r, g.metric);
      if (std::string_view(r.trained_by) == "paper") {
        paper += v;
        ++m.targets;
      } else {
        ours += v;
      }
    }
    m.paper = paper / static_cast<double>(m.targets);
    m.discovery_engine = ours / static_cast<double>(m.targets);
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark configs

enum class Availability { public_auto, user_supplied };

inline std::string_view to_string(Availability a) {
  return a == Availability::public_auto ? "public_auto" : "user_supplied";
}

// Minimum acceptable value of the primary metric for one target (maximum
// for rmse and mae).
struct Floor {
  std::string target;
  double value = 0.0;
};

struct BenchmarkConfig {
  std::string id;
  std::string group;  // reference group label
  Availability availability = Availability::public_auto;
  std::string source;  // where to obtain the CSV
  std::string note;
  std::vector<std::string> targets;            // data columns to model
  std::vector<std::string> reference_targets;  // matching reference target names
  std::vector<Floor> floors;
  RunConfig run;  // target is filled in per target
};

inline BenchmarkConfig parse_benchmark_config(const std::string& text, const std::string& source = "bench") {
  auto root = detail::parse_toml(text, source);
  const auto* bench = root.get_as<toml::table>("bench");
  if (!bench) fail(ErrorKind::config, source + ": missing [bench] table");
  const toml::table meta = *bench;
  root.erase("bench");

  BenchmarkConfig b;
  detail::TomlReader reader(meta);
  std::string availability = "public_auto";
  reader.get("id", b.id);
  reader.get("group", b.group);
  reader.get("availability", availability);
  reader.get("source", b.source);
  reader.get("note", b.note);
  reader.get("targets", b.targets);
  reader.get("reference_targets", b.reference_targets);
  std::map<std::string, double> floors;
  if (const auto* f = meta.get_as<toml::table>("floors")) {
    for (const auto& [k, v] : *f) {
      const std::string name(k.str());
      double value = 0.0;
      reader.get("floors." + name, value);
      floors[name] = value;
    }
  }
  reader.reject_unknown();

  if (availability == "public_auto") b.availability = Availability::public_auto;
  else if (availability == "user_supplied") b.availability = Availability::user_supplied;
  else fail(ErrorKind::config, source + ": availability must be public_auto or user_supplied");
  require(!b.id.empty(), ErrorKind::config, "benchmark config needs bench.id");
  group_metric(b.group);

  detail::TomlReader run_reader(root);
  detail::read_run_config(run_reader, b.run);
  run_reader.reject_unknown();
  if (b.targets.empty()) b.targets = {b.run.target};
  if (b.run.target.empty()) b.run.target = b.targets.front();
  if (b.reference_targets.empty()) b.reference_targets = b.targets;
  if (b.reference_targets.size() != b.targets.size())
    fail(ErrorKind::config, source + ": reference_targets must pair up with targets");
  for (const auto& [name, value] : floors) {
    if (std::find(b.targets.begin(), b.targets.end(), name) == b.targets.end())
      fail(ErrorKind::config, source + ": floor for unknown target '" + name + "'");
    b.floors.push_back({name, value});
  }
  validate(b.run);
  return b;
}

inline BenchmarkConfig load_benchmark_config(const std::string& path) {
  auto b = parse_benchmark_config(detail::read_text(path, ErrorKind::config), path);
  b.run.base_dir = std::filesystem::path(path).parent_path().string();
  return b;
}

// suite.toml: datasets = ["hcv.toml", ...], relative to the suite file.
inline std::vector<std::string> load_suite(const std::string& path) {
  const auto root = detail::parse_toml(detail::read_text(path, ErrorKind::config), path);
  detail::TomlReader reader(root);
  std::vector<std::string> files;
  reader.get("datasets", files);
  reader.reject_unknown();
  require(!files.empty(), ErrorKind::config, "suite lists no datasets");
  const auto base = std::filesystem::path(path).parent_path();
  for (auto& f : files)
    if (std::filesystem::path(f).is_relative()) f = (base / f).string();
  return files;
}

// ---------------------------------------------------------------------------
// Running

enum class RowStatus { ok, skipped, failed };

inline std::string_view to_string(RowStatus s) {
  return s == RowStatus::ok ? "ok" : s == RowStatus::skipped ? "skipped" : "failed";
}

struct ComparisonRow {
  std::string dataset;
  std::string group;
  std::string target;  // reference target name
  MetricId metric = MetricId::r2;
  double paper = kNone;             // best model from the dataset's source study
  double discovery_engine = kNone;  // published Discovery Engine result
  double ours = kNone;
  std::optional<double> floor;
  std::optional<bool> pass;  // against the floor, when there is one
  RowStatus status = RowStatus::ok;
  std::string reason;  // skip or failure reason
  std::string run_dir;
  double seconds = 0.0;

  // Signed so that positive means better than the source paper.
  double delta() const { return higher_is_better(metric) ? ours - paper : paper - ours; }
};

struct BenchOptions {
  std::optional<std::uint64_t> seed;  // overrides every config's seed
  std::string out = "runs/bench";
  bool write_runs = true;
};

namespace detail {

inline ComparisonRow base_row(const BenchmarkConfig& b, std::size_t k) {
  ComparisonRow row;
  row.dataset = b.id;
  row.group = b.group;
  row.target = b.reference_targets[k];
  row.metric = group_metric(b.group);
  row.paper = reference_value(b.group, row.target, "paper");
  row.discovery_engine = reference_value(b.group, row.target, "discovery_engine");
  for (const auto& f : b.floors)
    if (f.target == b.targets[k]) row.floor = f.value;
  return row;
}

}  // namespace detail

// One row per target. A missing CSV gives skipped rows; a pipeline error
// gives a failed row and the remaining targets still run.
inline std::vector<ComparisonRow> run_benchmark(const BenchmarkConfig& b, const BenchOptions& options = {}) {
  std::vector<ComparisonRow> rows;
  RunConfig base = b.run;
  if (options.seed) base.seed = *options.seed;
  const auto path = resolve_data_path(base);
  if (!std::filesystem::exists(path)) {
    for (std::size_t k = 0; k < b.targets.size(); ++k) {
      auto row = detail::base_row(b, k);
      row.status = RowStatus::skipped;
      row.reason = b.availability == Availability::user_supplied
                       ? "user-supplied data not found at " + path
                       : "data not found at " + path + " (see tools/fetch_data.sh)";
      rows.push_back(std::move(row));
    }
    return rows;
  }
  const Table raw = load_table(base);
  for (std::size_t k = 0; k < b.targets.size(); ++k) {
    auto row = detail::base_row(b, k);
    RunConfig c = base;
    c.target = b.targets[k];
    for (const auto& other : b.targets)
      if (other != c.target) c.ignore.push_back(other);
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto result = run_pipeline(c, raw);
      if (result.primary != row.metric)
        fail(ErrorKind::config, "primary_metric must be " + std::string(to_string(row.metric)) + " for this benchmark");
      row.ours = result.holdout_metrics.at(row.metric);
      if (options.write_runs) {
        const auto report = build_report(result);
        row.run_dir = write_run_directory(result, report, options.out).string();
      }
      if (row.floor)
        row.pass = higher_is_better(row.metric) ? row.ours >= *row.floor : row.ours <= *row.floor;
    } catch (const Error& e) {
      row.status = RowStatus::failed;
      row.reason = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

struct GroupMean {
  std::string group;
  MetricId metric = MetricId::r2;
  std::size_t measured = 0;  // rows that produced a value
  std::size_t rows = 0;
  double paper = kNone;
  double discovery_engine = kNone;
  double ours = kNone;  // NaN when no row of the group was measured
};

// Arithmetic mean per group, groups in order of first appearance. The
// reference means cover the targets present in `rows`.
inline std::vector<GroupMean> aggregate(const std::vector<ComparisonRow>& rows) {
  require(!rows.empty(), ErrorKind::invalid_argument, "nothing to aggregate");
  std::vector<GroupMean> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupMean& g) { return g.group == r.group; });
    if (it == out.end()) {
      out.push_back({r.group, r.metric, 0, 0, 0.0, 0.0, 0.0});
      it = out.end() - 1;
    }
    ++it->rows;
    it->paper += r.paper;
    it->discovery_engine += r.discovery_engine;
    if (r.status == RowStatus::ok) {
      ++it->measured;
      it->ours += r.ours;
    }
  }
  for (auto& g : out) {
    g.paper /= static_cast<double>(g.rows);
    g.discovery_engine /= static_cast<double>(g.rows);
    g.ours = g.measured ? g.ours / static_cast<double>(g.measured) : kNone;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string num(double v, const char* spec = "%.4g") {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string csv_field(const std::string& s) { return quote_if_needed(s); }

}  // namespace detail

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "dataset,group,target,metric,paper,discovery_engine,ours,delta,floor,pass,status,reason,seconds,run_dir\n";
  for (const auto& r : rows) {
    out << r.dataset << "," << detail::csv_field(r.group) << "," << r.target << "," << to_string(r.metric) << ","
        << detail::num(r.paper) << "," << detail::num(r.discovery_engine) << "," << detail::num(r.ours, "%.6g")
        << "," << (r.status == RowStatus::ok ? detail::num(r.delta(), "%.6g") : "") << ","
        << (r.floor ? detail::num(*r.floor) : "") << "," << (r.pass ? (*r.pass ? "pass" : "fail") : "") << ","
        << to_string(r.status) << "," << detail::csv_field(r.reason) << "," << detail::num(r.seconds, "%.1f") << ","
        << detail::csv_field(r.run_dir) << "\n";
  }
  return out.str();
}

inline std::string comparison_markdown(const std::vector<ComparisonRow>& rows, const std::vector<GroupMean>& means,
                                       const std::vector<std::pair<std::string, std::string>>& notes = {}) {
  std::ostringstream md;
  md << "# Benchmark comparison\n\n";
  md << "| dataset | target | metric | paper | Discovery Engine | ours | delta | floor | result |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    std::string result = std::string(to_string(r.status));
    if (r.status == RowStatus::ok && r.pass) result = *r.pass ? "pass" : "FAIL";
    if (r.status != RowStatus::ok) result += ": " + r.reason;
    md << "| " << r.dataset << " | " << r.target << " | " << to_string(r.metric) << " | " << detail::num(r.paper)
       << " | " << detail::num(r.discovery_engine) << " | " << detail::num(r.ours) << " | "
       << (r.status == RowStatus::ok ? detail::num(r.delta()) : "") << " | "
       << (r.floor ? detail::num(*r.floor) : "") << " | " << result << " |\n";
  }
  md << "\n## Mean per paper\n\n";
  md << "| group | metric | targets run | paper mean | Discovery Engine mean | our mean |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& g : means) {
    md << "| " << g.group << " | " << to_string(g.metric) << " | " << g.measured << "/" << g.rows << " | "
       << detail::num(g.paper, "%.3f") << " | " << detail::num(g.discovery_engine, "%.3f") << " | "
       << (g.measured ? detail::num(g.ours, "%.3f") : "skipped") << " |\n";
  }
  md << "\nDelta is oriented so that positive means better than the source paper.\n";
  if (!notes.empty()) {
    md << "\n## Notes\n\n";
    for (const auto& [id, note] : notes) md << "- " << id << ": " << note << "\n";
  }
  return md.str();
}

}  // namespace discover
