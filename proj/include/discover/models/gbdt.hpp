#pragma once

// Gradient-boosted trees with squared loss (regression) or logistic loss
// (binary classification). Leaves carry Newton weights -G / (H + lambda).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "discover/models/dataset.hpp"
#include "discover/models/tree.hpp"
#include "discover/rng.hpp"

namespace discover {

struct GbdtParams {
  std::size_t rounds = 300;
  double learning_rate = 0.1;
  int max_depth = 4;
  double min_leaf = 1.0;
  double lambda = 1.0;
  double subsample = 1.0;  // row share per round, drawn without replacement
  double colsample = 1.0;  // feature share per node
  std::size_t patience = 30;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

class Gbdt {
 public:
  Gbdt() = default;
  Gbdt(double base, double learning_rate, bool classification, std::vector<DecisionTree> trees)
      : base_(base), learning_rate_(learning_rate), classification_(classification),
        trees_(std::move(trees)) {}

  // Raw score after the first `rounds` trees, accumulated one tree at a time.
  double predict_margin(std::span<const double> row, std::size_t rounds) const {
    double m = base_;
    const std::size_t k = std::min(rounds, trees_.size());
    for (std::size_t t = 0; t < k; ++t) m += learning_rate_ * trees_[t].predict(row);
    return m;
  }
  double predict_margin(std::span<const double> row) const {
    return predict_margin(row, trees_.size());
  }

  double predict(std::span<const double> row) const {
    const double m = predict_margin(row);
    return classification_ ? sigmoid(m) : m;
  }

  double base() const { return base_; }
  double learning_rate() const { return learning_rate_; }
  bool classification() const { return classification_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  double base_ = 0.0;
  double learning_rate_ = 0.1;
  bool classification_ = false;
  std::vector<DecisionTree> trees_;
};

struct GbdtFit {
  Gbdt model;
  std::size_t best_rounds = 0;
  std::vector<double> train_loss;  // entry k: loss after k rounds
  std::vector<double> validation_loss;
};

namespace detail {

inline double boost_loss(bool classification, std::span<const double> y, std::span<const double> margin) {
  if (y.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (classification) {
      // log(1 + e^m) - y m, written to stay finite for large |m|
      const double m = margin[i];
      sum += std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m))) - y[i] * m;
    } else {
      const double e = margin[i] - y[i];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace detail

// Trains up to params.rounds trees. With a nonempty validation set, training
// stops once validation loss has not improved for `patience` rounds and the
// model is cut back to the best round count. No degeneracy check here; the
// model-level train() performs it.
inline GbdtFit fit_gbdt(const Dataset& train, const Dataset& validation, const GbdtParams& params,
                        bool classification, std::uint64_t seed) {
  require(train.rows >= 1, ErrorKind::invalid_argument, "boosting needs training rows");
  require(params.learning_rate > 0.0, ErrorKind::invalid_argument, "learning_rate must be positive");
  const std::size_t n = train.rows;
  const double mean = std::accumulate(train.y.begin(), train.y.end(), 0.0) / static_cast<double>(n);
  double base = mean;
  if (classification) {
    const double p = std::clamp(mean, 1e-6, 1.0 - 1e-6);
    base = std::log(p / (1.0 - p));
  }

  const SortedIndex sorted(train);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;
  tp.lambda = params.lambda;
  tp.feature_fraction = params.colsample;
  Rng rng(seed);

  std::vector<double> f(n, base), fv(validation.rows, base);
  std::vector<double> g(n), h(n), w(n, 1.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const std::size_t sample =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))),
                              1, n);

  GbdtFit fit;
  fit.train_loss.push_back(detail::boost_loss(classification, train.y, f));
  const bool validate = validation.rows > 0;
  double best = validate ? detail::boost_loss(classification, validation.y, fv) : 0.0;
  if (validate) fit.validation_loss.push_back(best);
  std::size_t best_rounds = 0;
  std::vector<DecisionTree> trees;

  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      if (classification) {
        const double p = sigmoid(f[i]);
        g[i] = p - train.y[i];
        h[i] = std::max(p * (1.0 - p), 1e-16);
      } else {
        g[i] = f[i] - train.y[i];
        h[i] = 1.0;
      }
    }
    if (sample < n) {
      for (std::size_t i = 0; i < sample; ++i)
        std::swap(perm[i], perm[i + static_cast<std::size_t>(rng.below(n - i))]);
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t i = 0; i < sample; ++i) w[perm[i]] = 1.0;
    }
    trees.push_back(grow_tree(train, sorted, g, h, w, tp, rng));
    const auto& tree = trees.back();
    for (std::size_t i = 0; i < n; ++i) f[i] += params.learning_rate * tree.predict(train.row(i));
    fit.train_loss.push_back(detail::boost_loss(classification, train.y, f));
    if (!validate) {
      best_rounds = trees.size();
      continue;
    }
    for (std::size_t i = 0; i < validation.rows; ++i)
      fv[i] += params.learning_rate * tree.predict(validation.row(i));
    const double loss = detail::boost_loss(classification, validation.y, fv);
    fit.validation_loss.push_back(loss);
    if (loss < best) {
      best = loss;
      best_rounds = trees.size();
    } else if (trees.size() - best_rounds >= params.patience) {
      break;
    }
  }
  trees.resize(best_rounds);
  fit.best_rounds = best_rounds;
  fit.model = Gbdt(base, params.learning_rate, classification, std::move(trees));
  return fit;
}

}  // namespace discover
