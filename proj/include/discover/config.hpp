#pragma once

// Run configuration: a TOML file with a fixed set of keys. Unknown keys and
// wrongly typed values are config errors, raised before any work starts.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "discover/automl.hpp"
#include "discover/error.hpp"
#include "discover/hash.hpp"
#include "discover/metrics.hpp"
#include "discover/patterns.hpp"
#include "discover/preprocess.hpp"
#include "discover/table.hpp"
#include "json.hpp"
#include "toml.hpp"

namespace discover {

struct SplitConfig {
  double holdout_fraction = 0.2;
  bool stratified = true;
  bool dedup = false;  // drop rows with duplicate features before splitting
  std::string column;  // predefined split column; empty = seeded random split
  std::vector<std::string> holdout_values = {"test"};
};

struct RunConfig {
  std::string data;
  std::string target;
  std::string task = "auto";  // auto | regression | classification
  std::vector<std::string> positive_levels;
  std::vector<std::string> ignore;
  std::vector<std::string> categorical;
  std::uint64_t seed = 0;
  std::string out = "runs";
  SplitConfig split;
  PreprocessOptions preprocess;
  std::string primary_metric = "auto";  // auto = accuracy or rmse
  SearchBudget budget;
  SearchOptions search;
  MiningConfig mining;
  std::size_t importance_repeats = 5;

  // Directory of the file the config came from; relative data paths resolve
  // against it. Not part of the config's identity.
  std::string base_dir;
};

namespace detail {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed is read as size_t");

class TomlReader {
 public:
  explicit TomlReader(const toml::table& root) : root_(root) {}

  template <class T>
  void get(const std::string& path, T& out) {
    seen_.insert(path);
    const auto node = root_.at_path(path);
    if (!node) return;
    read(path, node.node(), out);
  }

  // Every leaf key in the document must have been asked for.
  void reject_unknown() const {
    std::vector<std::string> unknown;
    collect(root_, "", unknown);
    if (!unknown.empty()) fail(ErrorKind::config, "unknown config key '" + unknown.front() + "'");
  }

 private:
  static void wrong_type(const std::string& path, const char* want) {
    fail(ErrorKind::config, "config key '" + path + "' must be " + want);
  }

  static void read(const std::string& path, const toml::node* n, std::string& out) {
    if (!n->is_string()) wrong_type(path, "a string");
    out = n->as_string()->get();
  }
  static void read(const std::string& path, const toml::node* n, bool& out) {
    if (!n->is_boolean()) wrong_type(path, "true or false");
    out = n->as_boolean()->get();
  }
  static void read(const std::string& path, const toml::node* n, double& out) {
    if (n->is_integer()) out = static_cast<double>(n->as_integer()->get());
    else if (n->is_floating_point()) out = n->as_floating_point()->get();
    else wrong_type(path, "a number");
  }
  static void read(const std::string& path, const toml::node* n, std::size_t& out) {
    if (!n->is_integer() || n->as_integer()->get() < 0) wrong_type(path, "a non-negative integer");
    out = static_cast<std::size_t>(n->as_integer()->get());
  }
  static void read(const std::string& path, const toml::node* n, std::vector<std::string>& out) {
    if (!n->is_array()) wrong_type(path, "an array of strings");
    out.clear();
    for (const auto& e : *n->as_array()) {
      if (!e.is_string()) wrong_type(path, "an array of strings");
      out.push_back(e.as_string()->get());
    }
  }
  static void read(const std::string& path, const toml::node* n, std::vector<double>& out) {
    if (!n->is_array()) wrong_type(path, "an array of numbers");
    out.clear();
    for (const auto& e : *n->as_array()) {
      double v = 0;
      read(path, &e, v);
      out.push_back(v);
    }
  }

  void collect(const toml::table& t, const std::string& prefix, std::vector<std::string>& out) const {
    for (const auto& [k, v] : t) {
      const std::string path = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
      if (v.is_table()) collect(*v.as_table(), path, out);
      else if (!seen_.count(path)) out.push_back(path);
    }
  }

  const toml::table& root_;
  std::set<std::string> seen_;
};

inline toml::table parse_toml(const std::string& text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorKind::config, msg.str());
  }
}

inline std::string read_text(const std::string& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(kind, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void read_run_config(TomlReader& r, RunConfig& c) {
  r.get("data", c.data);
  r.get("target", c.target);
  r.get("task", c.task);
  r.get("positive_levels", c.positive_levels);
  r.get("ignore", c.ignore);
  r.get("categorical", c.categorical);
  r.get("seed", c.seed);
  r.get("out", c.out);

  r.get("split.holdout_fraction", c.split.holdout_fraction);
  r.get("split.stratified", c.split.stratified);
  r.get("split.dedup", c.split.dedup);
  r.get("split.column", c.split.column);
  r.get("split.holdout_values", c.split.holdout_values);

  r.get("preprocess.dedup", c.preprocess.dedup);
  r.get("preprocess.outliers", c.preprocess.outliers.enabled);
  r.get("preprocess.outlier_z", c.preprocess.outliers.z_threshold);
  r.get("preprocess.outlier_max_fraction", c.preprocess.outliers.max_flag_fraction);

  r.get("search.primary_metric", c.primary_metric);
  r.get("search.max_candidates", c.budget.max_candidates);
  r.get("search.forest", c.budget.family_candidates[ModelFamily::random_forest]);
  r.get("search.gbdt", c.budget.family_candidates[ModelFamily::gbdt]);
  r.get("search.mlp", c.budget.family_candidates[ModelFamily::mlp]);
  r.get("search.time_limit", c.budget.time_limit_seconds);
  r.get("search.validation_fraction", c.search.validation_fraction);
  r.get("search.overfit_gap", c.search.overfit_gap);
  r.get("search.overfit_relative", c.search.overfit_relative);
  r.get("search.refit", c.search.refit);

  r.get("mining.beam_width", c.mining.beam_width);
  r.get("mining.max_arity", c.mining.max_arity);
  r.get("mining.n_min", c.mining.n_min);
  r.get("mining.top_k_features", c.mining.top_k_features);
  r.get("mining.alpha_discovery", c.mining.alpha_discovery);
  r.get("mining.alpha_hypothesis", c.mining.alpha_hypothesis);
  r.get("mining.quantile_grid", c.mining.quantile_grid);
  r.get("mining.max_interval_bins", c.mining.max_interval_bins);
  r.get("mining.productivity_alpha", c.mining.productivity_alpha);
  r.get("mining.variance_effects", c.mining.variance_effects);
  r.get("mining.importance_repeats", c.importance_repeats);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  require(!c.data.empty(), ErrorKind::config, "config needs 'data'");
  require(!c.target.empty(), ErrorKind::config, "config needs 'target'");
  require(c.task == "auto" || c.task == "regression" || c.task == "classification", ErrorKind::config,
          "task must be auto, regression or classification");
  require(c.split.holdout_fraction > 0 && c.split.holdout_fraction < 1, ErrorKind::config,
          "split.holdout_fraction must lie in (0, 1)");
  require(!c.split.column.empty() || c.split.holdout_values.size() >= 1, ErrorKind::config,
          "split.holdout_values must not be empty");
  require(c.preprocess.outliers.z_threshold > 0, ErrorKind::config, "preprocess.outlier_z must be positive");
  require(c.preprocess.outliers.max_flag_fraction >= 0 && c.preprocess.outliers.max_flag_fraction <= 1,
          ErrorKind::config, "preprocess.outlier_max_fraction must lie in [0, 1]");
  if (c.primary_metric != "auto") {
    try {
      metric_from_string(c.primary_metric);
    } catch (const Error&) {
      fail(ErrorKind::config, "unknown primary_metric '" + c.primary_metric + "'");
    }
  }
  c.budget.validate();
  require(c.search.validation_fraction > 0 && c.search.validation_fraction < 1, ErrorKind::config,
          "search.validation_fraction must lie in (0, 1)");
  require(c.search.overfit_gap >= 0 && c.search.overfit_relative >= 0, ErrorKind::config,
          "overfit thresholds must not be negative");
  c.mining.validate();
  require(c.importance_repeats >= 1, ErrorKind::config, "mining.importance_repeats must be at least 1");
}

// Parses and validates. `source` names the input in error messages.
inline RunConfig parse_run_config(const std::string& text, const std::string& source = "config") {
  const auto root = detail::parse_toml(text, source);
  detail::TomlReader reader(root);
  RunConfig c;
  detail::read_run_config(reader, c);
  reader.reject_unknown();
  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  auto c = parse_run_config(detail::read_text(path, ErrorKind::config), path);
  c.base_dir = std::filesystem::path(path).parent_path().string();
  return c;
}

// Canonical form: every setting, defaults included, in a fixed order. The
// config hash is FNV-1a over its compact dump.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["data"] = c.data;
  j["target"] = c.target;
  j["task"] = c.task;
  j["positive_levels"] = c.positive_levels;
  j["ignore"] = c.ignore;
  j["categorical"] = c.categorical;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["split"] = {{"holdout_fraction", c.split.holdout_fraction},
                {"stratified", c.split.stratified},
                {"dedup", c.split.dedup},
                {"column", c.split.column},
                {"holdout_values", c.split.holdout_values}};
  j["preprocess"] = {{"dedup", c.preprocess.dedup},
                     {"outliers", c.preprocess.outliers.enabled},
                     {"outlier_z", c.preprocess.outliers.z_threshold},
                     {"outlier_max_fraction", c.preprocess.outliers.max_flag_fraction}};
  auto count = [&](ModelFamily f) {
    auto it = c.budget.family_candidates.find(f);
    return it == c.budget.family_candidates.end() ? std::size_t{0} : it->second;
  };
  j["search"] = {{"primary_metric", c.primary_metric},
                 {"max_candidates", c.budget.max_candidates},
                 {"forest", count(ModelFamily::random_forest)},
                 {"gbdt", count(ModelFamily::gbdt)},
                 {"mlp", count(ModelFamily::mlp)},
                 {"time_limit", c.budget.time_limit_seconds},
                 {"validation_fraction", c.search.validation_fraction},
                 {"overfit_gap", c.search.overfit_gap},
                 {"overfit_relative", c.search.overfit_relative},
                 {"refit", c.search.refit}};
  j["mining"] = {{"beam_width", c.mining.beam_width},
                 {"max_arity", c.mining.max_arity},
                 {"n_min", c.mining.n_min},
                 {"top_k_features", c.mining.top_k_features},
                 {"alpha_discovery", c.mining.alpha_discovery},
                 {"alpha_hypothesis", c.mining.alpha_hypothesis},
                 {"quantile_grid", c.mining.quantile_grid},
                 {"max_interval_bins", c.mining.max_interval_bins},
                 {"productivity_alpha", c.mining.productivity_alpha},
                 {"variance_effects", c.mining.variance_effects},
                 {"importance_repeats", c.importance_repeats}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::ordered_json& j) {
  RunConfig c;
  c.data = j.at("data").get<std::string>();
  c.target = j.at("target").get<std::string>();
  c.task = j.at("task").get<std::string>();
  c.positive_levels = j.at("positive_levels").get<std::vector<std::string>>();
  c.ignore = j.at("ignore").get<std::vector<std::string>>();
  c.categorical = j.at("categorical").get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.out = j.at("out").get<std::string>();
  const auto& s = j.at("split");
  c.split.holdout_fraction = s.at("holdout_fraction").get<double>();
  c.split.stratified = s.at("stratified").get<bool>();
  c.split.dedup = s.at("dedup").get<bool>();
  c.split.column = s.at("column").get<std::string>();
  c.split.holdout_values = s.at("holdout_values").get<std::vector<std::string>>();
  const auto& p = j.at("preprocess");
  c.preprocess.dedup = p.at("dedup").get<bool>();
  c.preprocess.outliers.enabled = p.at("outliers").get<bool>();
  c.preprocess.outliers.z_threshold = p.at("outlier_z").get<double>();
  c.preprocess.outliers.max_flag_fraction = p.at("outlier_max_fraction").get<double>();
  const auto& a = j.at("search");
  c.primary_metric = a.at("primary_metric").get<std::string>();
  c.budget.max_candidates = a.at("max_candidates").get<std::size_t>();
  c.budget.family_candidates = {{ModelFamily::random_forest, a.at("forest").get<std::size_t>()},
                                {ModelFamily::gbdt, a.at("gbdt").get<std::size_t>()},
                                {ModelFamily::mlp, a.at("mlp").get<std::size_t>()}};
  c.budget.time_limit_seconds = a.at("time_limit").get<double>();
  c.search.validation_fraction = a.at("validation_fraction").get<double>();
  c.search.overfit_gap = a.at("overfit_gap").get<double>();
  c.search.overfit_relative = a.at("overfit_relative").get<double>();
  c.search.refit = a.at("refit").get<bool>();
  const auto& m = j.at("mining");
  c.mining.beam_width = m.at("beam_width").get<std::size_t>();
  c.mining.max_arity = m.at("max_arity").get<std::size_t>();
  c.mining.n_min = m.at("n_min").get<std::size_t>();
  c.mining.top_k_features = m.at("top_k_features").get<std::size_t>();
  c.mining.alpha_discovery = m.at("alpha_discovery").get<double>();
  c.mining.alpha_hypothesis = m.at("alpha_hypothesis").get<double>();
  c.mining.quantile_grid = m.at("quantile_grid").get<std::vector<double>>();
  c.mining.max_interval_bins = m.at("max_interval_bins").get<std::size_t>();
  c.mining.productivity_alpha = m.at("productivity_alpha").get<double>();
  c.mining.variance_effects = m.at("variance_effects").get<bool>();
  c.importance_repeats = m.at("importance_repeats").get<std::size_t>();
  return c;
}

inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

// Absolute paths are used as given. A relative path is tried against the
// config's directory, then under DISCOVER_DATA_DIR (as written, then by file
// name alone) when that is set.
inline std::string resolve_data_path(const RunConfig& c) {
  namespace fs = std::filesystem;
  const fs::path p(c.data);
  if (p.is_absolute()) return p.string();
  const fs::path local = fs::path(c.base_dir) / p;
  if (fs::exists(local)) return local.string();
  if (const char* root = std::getenv("DISCOVER_DATA_DIR"); root && *root) {
    for (const auto& candidate : {fs::path(root) / p, fs::path(root) / p.filename()})
      if (fs::exists(candidate)) return candidate.string();
  }
  return local.string();
}

}  // namespace discover
