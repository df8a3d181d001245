#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "discover/models/dataset.hpp"
#include "discover/models/tree.hpp"
#include "discover/parallel.hpp"
#include "discover/rng.hpp"

namespace discover {

struct ForestParams {
  std::size_t trees = 200;
  int max_depth = 0;  // 0 = grow until pure or min_leaf
  double min_leaf = 1.0;
  double feature_fraction = 0.0;  // 0 = sqrt(d)/d for classification, 1/3 for regression
  bool bootstrap = true;
};

class RandomForest {
 public:
  RandomForest() = default;
  explicit RandomForest(std::vector<DecisionTree> trees) : trees_(std::move(trees)) {}

  double predict(std::span<const double> row) const {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(row);
    return sum / static_cast<double>(trees_.size());
  }

  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  std::vector<DecisionTree> trees_;
};

inline double resolved_feature_fraction(const ForestParams& p, std::size_t cols, bool classification) {
  if (p.feature_fraction > 0.0) return p.feature_fraction;
  const double d = static_cast<double>(std::max<std::size_t>(cols, 1));
  return classification ? std::sqrt(d) / d : 1.0 / 3.0;
}

// Each tree draws its bootstrap counts and feature subsets from its own stream
// derived from (seed, tree index), so results do not depend on scheduling.
inline RandomForest fit_forest(const Dataset& data, const ForestParams& params, bool classification,
                               std::uint64_t seed) {
  require(params.trees >= 1, ErrorKind::invalid_argument, "forest needs at least one tree");
  require(data.rows >= 1, ErrorKind::invalid_argument, "forest needs training rows");
  const SortedIndex sorted(data);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;
  tp.lambda = 0.0;
  tp.feature_fraction = resolved_feature_fraction(params, data.cols, classification);

  std::vector<DecisionTree> trees(params.trees);
  parallel_for(params.trees, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<double> w(data.rows, 1.0);
    if (params.bootstrap) {
      std::fill(w.begin(), w.end(), 0.0);
      for (std::size_t i = 0; i < data.rows; ++i) w[static_cast<std::size_t>(rng.below(data.rows))] += 1.0;
    }
    std::vector<double> g(data.rows), h(w);
    for (std::size_t i = 0; i < data.rows; ++i) g[i] = -w[i] * data.y[i];
    trees[t] = grow_tree(data, sorted, g, h, w, tp, rng);
  });
  return RandomForest(std::move(trees));
}

}  // namespace discover
