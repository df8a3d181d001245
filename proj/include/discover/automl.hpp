#pragma once

// Random search over the model zoo. Candidates train on the training rows,
// are scored on a validation split carved from them, and the best one that
// does not look overfit wins. The final holdout is never touched here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "discover/error.hpp"
#include "discover/metrics.hpp"
#include "discover/models/model.hpp"
#include "discover/parallel.hpp"
#include "discover/rng.hpp"
#include "discover/table.hpp"
#include "discover/task.hpp"
#include "json.hpp"

namespace discover {

struct SearchBudget {
  std::size_t max_candidates = 30;
  std::map<ModelFamily, std::size_t> family_candidates = {
      {ModelFamily::random_forest, 10}, {ModelFamily::gbdt, 10}, {ModelFamily::mlp, 10}};
  // Soft: candidates not yet started when the limit passes are skipped.
  // 0 disables the limit. A run that hits it is no longer reproducible.
  double time_limit_seconds = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(max_candidates >= 1, ErrorKind::config, "max_candidates must be at least 1");
    require(time_limit_seconds >= 0, ErrorKind::config, "time_limit must not be negative");
    std::size_t total = 0;
    for (const auto& [f, n] : family_candidates) total += n;
    require(total >= 1, ErrorKind::config, "the search needs at least one candidate");
  }
};

struct SearchOptions {
  double validation_fraction = 0.2;
  double overfit_gap = 0.15;       // absolute, for metrics on [0, 1]
  double overfit_relative = 0.25;  // relative to validation error, for rmse and mae
  bool refit = true;               // refit the winner on train + validation
};

struct LeaderboardEntry {
  ModelSpec spec;
  MetricSet validation;
  MetricSet train;
  double overfit_gap = 0.0;
  bool overfit = false;
  std::size_t early_stop_point = 0;
};

struct CandidateFailure {
  ModelSpec spec;
  std::string reason;
};

struct Leaderboard {
  Task task = Task::regression;
  MetricId primary = MetricId::rmse;
  std::vector<LeaderboardEntry> entries;  // best validation score first
  std::size_t best_index = 0;
  std::vector<CandidateFailure> failures;
  std::vector<std::string> warnings;
};

struct SearchResult {
  Leaderboard leaderboard;
  TrainedModel best;
};

// Gap between training and validation score, oriented so that larger means
// more overfit: train - validation for scores on [0, 1], and
// (validation - train) / validation for error metrics.
inline double overfit_gap(MetricId primary, double train_score, double validation_score) {
  if (higher_is_better(primary)) return train_score - validation_score;
  if (!(validation_score > 0)) return 0.0;
  return (validation_score - train_score) / validation_score;
}

inline bool overfit_flag(const LeaderboardEntry& e, MetricId primary, const SearchOptions& options = {}) {
  const double threshold = higher_is_better(primary) ? options.overfit_gap : options.overfit_relative;
  return e.overfit_gap > threshold;
}

namespace detail {

inline double pick(Rng& rng, std::initializer_list<double> values) {
  const auto k = rng.below(values.size());
  return *(values.begin() + static_cast<std::ptrdiff_t>(k));
}

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

inline Hyperparameters sample_hyperparameters(ModelFamily family, Rng& rng) {
  switch (family) {
    case ModelFamily::random_forest:
      return {{"trees", pick(rng, {100, 200, 300, 500})},
              {"depth", pick(rng, {4, 6, 8, 12, 16, 0})},
              {"leaf_min", pick(rng, {1, 2, 3, 5})},
              {"feature_fraction", pick(rng, {0, 0.33, 0.5, 0.8, 1.0})}};
    case ModelFamily::gbdt:
      return {{"rounds", pick(rng, {100, 300, 500, 1000, 2000})},
              {"learning_rate", log_uniform(rng, 0.01, 0.3)},
              {"depth", pick(rng, {2, 3, 4, 5, 6, 7, 8})},
              {"leaf_min", pick(rng, {1, 3, 5, 10})},
              {"lambda", pick(rng, {0, 1, 5})},
              {"subsample", pick(rng, {0.7, 0.85, 1.0})},
              {"colsample", pick(rng, {0.7, 1.0})},
              {"patience", 30}};
    case ModelFamily::mlp:
      return {{"layers", pick(rng, {1, 2, 3})},
              {"units", pick(rng, {32, 64, 128})},
              {"epochs", 200},
              {"batch", pick(rng, {32, 64})},
              {"learning_rate", log_uniform(rng, 3e-4, 1e-2)},
              {"patience", 20}};
  }
  return {};
}

}  // namespace detail

// Candidate specs in draw order: families take turns (forest, gbdt, mlp)
// until each has its quota or max_candidates is reached. Hyperparameters and
// model seeds come from the budget seed alone.
inline std::vector<ModelSpec> sample_candidates(Task task, const SearchBudget& budget) {
  budget.validate();
  Rng rng(budget.seed);
  std::map<ModelFamily, std::size_t> left = budget.family_candidates;
  std::vector<ModelSpec> out;
  bool any = true;
  while (out.size() < budget.max_candidates && any) {
    any = false;
    for (auto family : {ModelFamily::random_forest, ModelFamily::gbdt, ModelFamily::mlp}) {
      if (out.size() == budget.max_candidates) break;
      auto it = left.find(family);
      if (it == left.end() || it->second == 0) continue;
      --it->second;
      any = true;
      ModelSpec s;
      s.family = family;
      s.task = task;
      s.hyperparameters = detail::sample_hyperparameters(family, rng);
      s.seed = derive_seed(budget.seed, out.size());
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Leaderboard order (best score first, NaN last, ties by key) and the
// position in that order of the best candidate not flagged as overfit, or
// of the best overall when every candidate is flagged.
inline std::pair<std::vector<std::size_t>, std::size_t> rank_candidates(
    const std::vector<double>& scores, const std::vector<std::string>& keys,
    const std::vector<bool>& flagged, bool higher_better) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto before = [&](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return higher_better ? a > b : a < b;
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (before(scores[a], scores[b])) return true;
    if (before(scores[b], scores[a])) return false;
    return keys[a] < keys[b];
  });
  for (std::size_t k = 0; k < order.size(); ++k)
    if (!flagged[order[k]]) return {order, k};
  return {order, 0};
}

// Trains every candidate on `train`, scores it on `validation` (both encoded)
// and ranks the results. The returned model is the winner as trained.
inline SearchResult search_candidates(const Dataset& train, const Dataset& validation,
                                      const std::vector<ModelSpec>& candidates, MetricId primary,
                                      const SearchBudget& budget, const SearchOptions& options = {}) {
  require(!candidates.empty(), ErrorKind::config, "no candidates to search");
  require(validation.rows > 0, ErrorKind::data, "the search needs validation rows");
  const Task task = candidates.front().task;
  if (!metric_applies(primary, task))
    fail(ErrorKind::config, "primary metric '" + std::string(to_string(primary)) + "' does not fit the task");
  check_target(task, train.y);

  struct Outcome {
    std::optional<TrainedModel> model;
    LeaderboardEntry entry;
    std::string error;
  };
  std::vector<Outcome> outcomes(candidates.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(candidates.size(), [&](std::size_t i) {
    auto& o = outcomes[i];
    o.entry.spec = candidates[i];
    if (budget.time_limit_seconds > 0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() > budget.time_limit_seconds) {
        o.error = "skipped: time limit reached";
        return;
      }
    }
    try {
      auto model = fit_model(candidates[i], train, validation);
      o.entry.train = compute_metrics(task, train.y, model.predict(train));
      o.entry.validation = compute_metrics(task, validation.y, model.predict(validation));
      o.entry.early_stop_point = model.info.early_stop_point;
      o.entry.overfit_gap =
          overfit_gap(primary, o.entry.train.at(primary), o.entry.validation.at(primary));
      o.entry.overfit = overfit_flag(o.entry, primary, options);
      o.model = std::move(model);
    } catch (const Error& e) {
      o.error = e.what();
    }
  });

  SearchResult result;
  auto& board = result.leaderboard;
  board.task = task;
  board.primary = primary;
  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].model) ok.push_back(i);
    else board.failures.push_back({candidates[i], outcomes[i].error});
  }
  if (ok.empty()) fail(ErrorKind::pipeline, "no candidate model trained successfully");

  std::vector<double> scores;
  std::vector<std::string> keys;
  std::vector<bool> flagged;
  for (auto i : ok) {
    scores.push_back(outcomes[i].entry.validation.at(primary));
    keys.push_back(spec_key(candidates[i]) + "#" + std::to_string(i));
    flagged.push_back(outcomes[i].entry.overfit);
  }
  const auto [order, best] = rank_candidates(scores, keys, flagged, higher_is_better(primary));
  for (auto k : order) board.entries.push_back(outcomes[ok[k]].entry);
  if (flagged[order[best]])
    board.warnings.push_back("every candidate was flagged as overfit; the best of them was kept");
  board.best_index = best;
  result.best = std::move(*outcomes[ok[order[best]]].model);
  return result;
}

// Carves a seeded validation split (stratified for classification) from the
// encoded training table, searches, and optionally refits the winner on all
// training rows with the iteration count it reached under early stopping.
inline SearchResult search(const Table& train, const TargetEncoding& encoding, MetricId primary,
                           const SearchBudget& budget, const SearchOptions& options = {}) {
  budget.validate();
  require(options.validation_fraction > 0 && options.validation_fraction < 1, ErrorKind::config,
          "validation_fraction must lie in (0, 1)");
  const bool classification = encoding.task == Task::binary_classification;
  const auto held = holdout_rows(
      train, SplitSpec{options.validation_fraction, classification, derive_seed(budget.seed, 0x5eed)});
  const auto parts = split_by_holdout(train, held);
  const auto names = encoded_feature_names(train);
  const auto d_train = to_dataset(parts.train, names, &encoding);
  const auto d_valid = to_dataset(parts.holdout, names, &encoding);

  auto result = search_candidates(d_train, d_valid, sample_candidates(encoding.task, budget), primary,
                                  budget, options);
  if (!options.refit) return result;

  const auto& entry = result.leaderboard.entries[result.leaderboard.best_index];
  ModelSpec spec = entry.spec;
  if (spec.family == ModelFamily::gbdt)
    spec.hyperparameters["rounds"] = static_cast<double>(entry.early_stop_point);
  if (spec.family == ModelFamily::mlp)
    spec.hyperparameters["epochs"] = static_cast<double>(std::max<std::size_t>(1, entry.early_stop_point));
  const auto d_all = to_dataset(train, names, &encoding);
  auto refit = fit_model(spec, d_all, Dataset{}, FitOptions{true, false});
  refit.spec = entry.spec;
  result.best = std::move(refit);
  return result;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const MetricSet& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, v] : m.values) {
    if (std::isfinite(v)) j[std::string(to_string(id))] = v;
    else j[std::string(to_string(id))] = nullptr;
  }
  return j;
}

inline MetricSet metric_set_from_json(const nlohmann::ordered_json& j, Task task) {
  MetricSet m;
  m.task = task;
  for (const auto& [k, v] : j.items())
    m.values[metric_from_string(k)] = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  return m;
}

inline nlohmann::ordered_json to_json(const Leaderboard& b) {
  nlohmann::ordered_json j;
  j["task"] = to_string(b.task);
  j["primary_metric"] = to_string(b.primary);
  j["best_index"] = b.best_index;
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : b.entries) {
    nlohmann::ordered_json x;
    x["spec"] = to_json(e.spec);
    x["key"] = spec_key(e.spec);
    x["validation"] = to_json(e.validation);
    x["train"] = to_json(e.train);
    x["overfit_gap"] = e.overfit_gap;
    x["overfit"] = e.overfit;
    x["early_stop_point"] = e.early_stop_point;
    j["entries"].push_back(std::move(x));
  }
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : b.failures)
    j["failures"].push_back({{"spec", to_json(f.spec)}, {"reason", f.reason}});
  j["warnings"] = b.warnings;
  return j;
}

inline Leaderboard leaderboard_from_json(const nlohmann::ordered_json& j) {
  Leaderboard b;
  b.task = task_from_string(j.at("task").get<std::string>());
  b.primary = metric_from_string(j.at("primary_metric").get<std::string>());
  b.best_index = j.at("best_index").get<std::size_t>();
  for (const auto& x : j.at("entries")) {
    LeaderboardEntry e;
    e.spec = spec_from_json(x.at("spec"));
    e.validation = metric_set_from_json(x.at("validation"), b.task);
    e.train = metric_set_from_json(x.at("train"), b.task);
    e.overfit_gap = x.at("overfit_gap").get<double>();
    e.overfit = x.at("overfit").get<bool>();
    e.early_stop_point = x.at("early_stop_point").get<std::size_t>();
    b.entries.push_back(std::move(e));
  }
  for (const auto& f : j.at("failures"))
    b.failures.push_back({spec_from_json(f.at("spec")), f.at("reason").get<std::string>()});
  b.warnings = j.at("warnings").get<std::vector<std::string>>();
  return b;
}

}  // namespace discover
