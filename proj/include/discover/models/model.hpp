#pragma once

// Uniform front end over the three model families: hyperparameter validation,
// training with the degeneracy contract, prediction, permutation importance
// and JSON export.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "discover/error.hpp"
#include "discover/metrics.hpp"
#include "discover/models/dataset.hpp"
#include "discover/models/forest.hpp"
#include "discover/models/gbdt.hpp"
#include "discover/models/mlp.hpp"
#include "discover/parallel.hpp"
#include "discover/rng.hpp"
#include "discover/task.hpp"
#include "json.hpp"

namespace discover {

enum class ModelFamily { random_forest, gbdt, mlp };

inline std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::random_forest: return "random_forest";
    case ModelFamily::gbdt: return "gbdt";
    case ModelFamily::mlp: return "mlp";
  }
  return "?";
}

inline ModelFamily model_family_from_string(std::string_view s) {
  for (auto f : {ModelFamily::random_forest, ModelFamily::gbdt, ModelFamily::mlp})
    if (to_string(f) == s) return f;
  fail(ErrorKind::invalid_argument, "unknown model family '" + std::string(s) + "'");
}

using Hyperparameters = std::map<std::string, double>;

struct ModelSpec {
  ModelFamily family = ModelFamily::random_forest;
  Task task = Task::regression;
  Hyperparameters hyperparameters;
  std::uint64_t seed = 0;
};

namespace detail {

struct HyperRange {
  const char* key;
  double lo;
  double hi;
  bool integral;
  bool lo_open;
};

// Legal ranges per family. Keys missing from a spec take the family default.
inline std::span<const HyperRange> hyper_ranges(ModelFamily family) {
  static constexpr HyperRange forest[] = {
      {"trees", 1, 5000, true, false},         {"depth", 0, 64, true, false},
      {"leaf_min", 1, 10000, true, false},     {"feature_fraction", 0, 1, false, false},
      {"bootstrap", 0, 1, true, false},
  };
  static constexpr HyperRange gbdt[] = {
      {"rounds", 0, 10000, true, false},     {"learning_rate", 0, 1, false, true},
      {"depth", 1, 16, true, false},         {"leaf_min", 1, 10000, true, false},
      {"lambda", 0, 1000, false, false},     {"subsample", 0, 1, false, true},
      {"colsample", 0, 1, false, true},      {"patience", 1, 10000, true, false},
  };
  static constexpr HyperRange mlp[] = {
      {"layers", 1, 4, true, false},         {"units", 1, 1024, true, false},
      {"epochs", 1, 5000, true, false},      {"batch", 1, 100000, true, false},
      {"learning_rate", 0, 1, false, true},  {"patience", 1, 10000, true, false},
  };
  switch (family) {
    case ModelFamily::random_forest: return forest;
    case ModelFamily::gbdt: return gbdt;
    case ModelFamily::mlp: return mlp;
  }
  return {};
}

inline double hyper(const ModelSpec& spec, const char* key, double fallback) {
  auto it = spec.hyperparameters.find(key);
  return it == spec.hyperparameters.end() ? fallback : it->second;
}

}  // namespace detail

inline void validate(const ModelSpec& spec) {
  const auto ranges = detail::hyper_ranges(spec.family);
  for (const auto& [key, value] : spec.hyperparameters) {
    auto it = std::find_if(ranges.begin(), ranges.end(),
                           [&](const detail::HyperRange& r) { return key == r.key; });
    if (it == ranges.end())
      fail(ErrorKind::invalid_argument,
           "hyperparameter '" + key + "' does not apply to " + std::string(to_string(spec.family)));
    const bool low_ok = it->lo_open ? value > it->lo : value >= it->lo;
    if (!std::isfinite(value) || !low_ok || value > it->hi ||
        (it->integral && value != std::floor(value)))
      fail(ErrorKind::invalid_argument, "hyperparameter '" + key + "' out of range");
  }
}

// Stable textual identity of a spec, used for deterministic tie-breaking.
inline std::string spec_key(const ModelSpec& spec) {
  std::string key(to_string(spec.family));
  key += '(';
  bool first = true;
  for (const auto& [k, v] : spec.hyperparameters) {
    if (!first) key += ',';
    first = false;
    key += k + "=" + detail::format_real(v);
  }
  key += ')';
  return key;
}

inline ForestParams forest_params(const ModelSpec& s) {
  ForestParams p;
  p.trees = static_cast<std::size_t>(detail::hyper(s, "trees", 200));
  p.max_depth = static_cast<int>(detail::hyper(s, "depth", 0));
  p.min_leaf = detail::hyper(s, "leaf_min", 1);
  p.feature_fraction = detail::hyper(s, "feature_fraction", 0);
  p.bootstrap = detail::hyper(s, "bootstrap", 1) != 0.0;
  return p;
}

inline GbdtParams gbdt_params(const ModelSpec& s) {
  GbdtParams p;
  p.rounds = static_cast<std::size_t>(detail::hyper(s, "rounds", 300));
  p.learning_rate = detail::hyper(s, "learning_rate", 0.1);
  p.max_depth = static_cast<int>(detail::hyper(s, "depth", 4));
  p.min_leaf = detail::hyper(s, "leaf_min", 1);
  p.lambda = detail::hyper(s, "lambda", 1.0);
  p.subsample = detail::hyper(s, "subsample", 1.0);
  p.colsample = detail::hyper(s, "colsample", 1.0);
  p.patience = static_cast<std::size_t>(detail::hyper(s, "patience", 30));
  return p;
}

inline MlpParams mlp_params(const ModelSpec& s) {
  MlpParams p;
  const auto layers = static_cast<std::size_t>(detail::hyper(s, "layers", 2));
  const auto units = static_cast<std::size_t>(detail::hyper(s, "units", 64));
  p.hidden.assign(layers, units);
  p.epochs = static_cast<std::size_t>(detail::hyper(s, "epochs", 200));
  p.batch = static_cast<std::size_t>(detail::hyper(s, "batch", 32));
  p.learning_rate = detail::hyper(s, "learning_rate", 1e-3);
  p.patience = static_cast<std::size_t>(detail::hyper(s, "patience", 20));
  return p;
}

struct TrainingInfo {
  std::size_t iterations = 0;       // trees grown or epochs run
  std::size_t early_stop_point = 0; // trees or epochs kept
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
};

using ModelState = std::variant<RandomForest, Gbdt, Mlp>;

struct TrainedModel {
  ModelSpec spec;
  std::vector<std::string> feature_names;
  ModelState state;
  TrainingInfo info;

  // Class-1 probability for classification, the prediction for regression.
  double predict_row(std::span<const double> row) const {
    return std::visit([&](const auto& m) { return m.predict(row); }, state);
  }

  std::vector<double> predict(const Dataset& d) const {
    require(d.cols == feature_names.size(), ErrorKind::schema, "feature layout mismatch");
    std::vector<double> out(d.rows);
    for (std::size_t i = 0; i < d.rows; ++i) out[i] = predict_row(d.row(i));
    return out;
  }
};

struct FitOptions {
  bool check_degenerate = true;
  bool require_validation = true;  // for gbdt and mlp
};

// Throws ErrorKind::degenerate when the target cannot support a model.
inline void check_target(Task task, std::span<const double> y) {
  require(!y.empty(), ErrorKind::degenerate, "no training rows");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi) {
    fail(ErrorKind::degenerate, task == Task::binary_classification
                                    ? "degenerate target: single class in training data"
                                    : "degenerate target: zero variance in training data");
  }
}

inline TrainedModel fit_model(const ModelSpec& spec, const Dataset& train, const Dataset& validation,
                              const FitOptions& options = {}) {
  validate(spec);
  require(validation.rows == 0 || validation.cols == train.cols, ErrorKind::schema,
          "validation layout differs from training layout");
  if (options.check_degenerate) check_target(spec.task, train.y);
  const bool classification = spec.task == Task::binary_classification;
  TrainedModel m;
  m.spec = spec;
  m.feature_names = train.feature_names;
  switch (spec.family) {
    case ModelFamily::random_forest: {
      const auto p = forest_params(spec);
      m.state = fit_forest(train, p, classification, spec.seed);
      m.info.iterations = m.info.early_stop_point = p.trees;
      break;
    }
    case ModelFamily::gbdt: {
      require(validation.rows > 0 || !options.require_validation, ErrorKind::invalid_argument,
              "gbdt needs a validation set for early stopping");
      auto fit = fit_gbdt(train, validation, gbdt_params(spec), classification, spec.seed);
      m.info.iterations = fit.train_loss.size() - 1;
      m.info.early_stop_point = fit.best_rounds;
      m.info.train_loss = std::move(fit.train_loss);
      m.info.validation_loss = std::move(fit.validation_loss);
      m.state = std::move(fit.model);
      break;
    }
    case ModelFamily::mlp: {
      require(validation.rows > 0 || !options.require_validation, ErrorKind::invalid_argument,
              "mlp needs a validation set for early stopping");
      auto fit = fit_mlp(train, validation, mlp_params(spec), classification, spec.seed);
      m.info.iterations = fit.epochs_run;
      m.info.early_stop_point = fit.best_epoch;
      m.info.train_loss = std::move(fit.train_loss);
      m.info.validation_loss = std::move(fit.validation_loss);
      m.state = std::move(fit.model);
      break;
    }
  }
  return m;
}

// Table front end: the tables are preprocessed (all features numeric). An
// empty validation table is allowed only for the forest family.
inline TrainedModel train(const ModelSpec& spec, const Table& train_table, const Table& validation,
                          const TargetEncoding& encoding) {
  const auto names = encoded_feature_names(train_table);
  const auto d_train = to_dataset(train_table, names, &encoding);
  const auto d_valid = validation.row_count() > 0 ? to_dataset(validation, names, &encoding) : Dataset{};
  return fit_model(spec, d_train, d_valid);
}

inline std::vector<double> predict(const TrainedModel& model, const Table& rows) {
  return model.predict(to_dataset(rows, model.feature_names));
}

// Mean degradation of `metric` when the columns of each group are permuted
// together (same row permutation for every column of the group). Degradation
// is oriented so that positive means the feature helps.
inline std::vector<double> grouped_permutation_importance(
    const TrainedModel& model, const Dataset& holdout, const std::vector<std::vector<std::size_t>>& groups,
    MetricId metric, std::size_t repeats, std::uint64_t seed) {
  require(repeats >= 1, ErrorKind::invalid_argument, "repeats must be at least 1");
  require(holdout.rows >= 1, ErrorKind::invalid_argument, "holdout must be nonempty");
  require(metric_applies(metric, model.spec.task), ErrorKind::invalid_argument,
          "metric does not fit the task");
  const Task task = model.spec.task;
  const double base = compute_metric(metric, task, holdout.y, model.predict(holdout));
  const double sign = higher_is_better(metric) ? 1.0 : -1.0;
  std::vector<double> out(groups.size(), 0.0);
  parallel_for(groups.size(), [&](std::size_t g) {
    Dataset shuffled = holdout;
    std::vector<std::size_t> perm(holdout.rows);
    double total = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(derive_seed(seed, g * repeats + r));
      shuffle(std::span<std::size_t>(perm), rng);
      for (auto j : groups[g])
        for (std::size_t i = 0; i < holdout.rows; ++i)
          shuffled.x[i * holdout.cols + j] = holdout.at(perm[i], j);
      const double s = compute_metric(metric, task, shuffled.y, model.predict(shuffled));
      total += sign * (base - s);
    }
    out[g] = total / static_cast<double>(repeats);
  });
  return out;
}

inline std::vector<double> permutation_importance(const TrainedModel& model, const Dataset& holdout,
                                                  MetricId metric, std::size_t repeats,
                                                  std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> groups(holdout.cols);
  for (std::size_t j = 0; j < holdout.cols; ++j) groups[j] = {j};
  return grouped_permutation_importance(model, holdout, groups, metric, repeats, seed);
}

inline std::vector<double> permutation_importance(const TrainedModel& model, const Dataset& holdout,
                                                  std::string_view metric, std::size_t repeats,
                                                  std::uint64_t seed) {
  return permutation_importance(model, holdout, metric_from_string(metric), repeats, seed);
}

inline nlohmann::ordered_json to_json(const ModelSpec& spec) {
  nlohmann::ordered_json j;
  j["family"] = to_string(spec.family);
  j["task"] = to_string(spec.task);
  j["hyperparameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : spec.hyperparameters) j["hyperparameters"][k] = v;
  j["seed"] = spec.seed;
  return j;
}

inline ModelSpec spec_from_json(const nlohmann::ordered_json& j) {
  ModelSpec s;
  s.family = model_family_from_string(j.at("family").get<std::string>());
  s.task = task_from_string(j.at("task").get<std::string>());
  for (const auto& [k, v] : j.at("hyperparameters").items()) s.hyperparameters[k] = v.get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline nlohmann::ordered_json to_json(const TrainedModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "discover-model";
  j["spec"] = to_json(m.spec);
  j["feature_names"] = m.feature_names;
  j["training"] = {{"iterations", m.info.iterations},
                   {"early_stop_point", m.info.early_stop_point},
                   {"train_loss", m.info.train_loss},
                   {"validation_loss", m.info.validation_loss}};
  nlohmann::ordered_json state;
  if (const auto* f = std::get_if<RandomForest>(&m.state)) {
    state["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : f->trees()) state["trees"].push_back(to_json(t));
  } else if (const auto* g = std::get_if<Gbdt>(&m.state)) {
    state["base"] = g->base();
    state["learning_rate"] = g->learning_rate();
    state["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : g->trees()) state["trees"].push_back(to_json(t));
  } else {
    const auto& net = std::get<Mlp>(m.state);
    const auto& sizes = net.sizes();
    const auto& p = net.params();
    state["target_mean"] = net.target_mean();
    state["target_scale"] = net.target_scale();
    state["layers"] = nlohmann::ordered_json::array();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const std::size_t in = sizes[l], out = sizes[l + 1];
      nlohmann::ordered_json layer;
      layer["activation"] = l + 2 < sizes.size() ? "relu" : "linear";
      auto weights = nlohmann::ordered_json::array();
      for (std::size_t o = 0; o < out; ++o)
        weights.push_back(std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(off + o * in),
                                              p.begin() + static_cast<std::ptrdiff_t>(off + (o + 1) * in)));
      layer["weights"] = std::move(weights);
      layer["biases"] = std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(off + out * in),
                                            p.begin() + static_cast<std::ptrdiff_t>(off + out * (in + 1)));
      state["layers"].push_back(std::move(layer));
      off += out * (in + 1);
    }
  }
  j["state"] = std::move(state);
  return j;
}

inline TrainedModel model_from_json(const nlohmann::ordered_json& j) {
  require(j.value("format", "") == "discover-model", ErrorKind::schema, "not a model artifact");
  TrainedModel m;
  m.spec = spec_from_json(j.at("spec"));
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const auto& t = j.at("training");
  m.info.iterations = t.at("iterations").get<std::size_t>();
  m.info.early_stop_point = t.at("early_stop_point").get<std::size_t>();
  m.info.train_loss = t.at("train_loss").get<std::vector<double>>();
  m.info.validation_loss = t.at("validation_loss").get<std::vector<double>>();
  const auto& s = j.at("state");
  const bool classification = m.spec.task == Task::binary_classification;
  switch (m.spec.family) {
    case ModelFamily::random_forest: {
      std::vector<DecisionTree> trees;
      for (const auto& tj : s.at("trees")) trees.push_back(tree_from_json(tj));
      m.state = RandomForest(std::move(trees));
      break;
    }
    case ModelFamily::gbdt: {
      std::vector<DecisionTree> trees;
      for (const auto& tj : s.at("trees")) trees.push_back(tree_from_json(tj));
      m.state = Gbdt(s.at("base").get<double>(), s.at("learning_rate").get<double>(), classification,
                     std::move(trees));
      break;
    }
    case ModelFamily::mlp: {
      std::vector<std::size_t> sizes{m.feature_names.size()};
      std::vector<double> params;
      for (const auto& layer : s.at("layers")) {
        const auto w = layer.at("weights").get<std::vector<std::vector<double>>>();
        const auto b = layer.at("biases").get<std::vector<double>>();
        require(w.size() == b.size(), ErrorKind::schema, "layer shape mismatch");
        for (const auto& row : w) {
          require(row.size() == sizes.back(), ErrorKind::schema, "layer shape mismatch");
          params.insert(params.end(), row.begin(), row.end());
        }
        params.insert(params.end(), b.begin(), b.end());
        sizes.push_back(b.size());
      }
      m.state = Mlp(std::move(sizes), std::move(params), classification,
                    s.at("target_mean").get<double>(), s.at("target_scale").get<double>());
      break;
    }
  }
  return m;
}

}  // namespace discover
