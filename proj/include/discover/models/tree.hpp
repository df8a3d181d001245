#pragma once

// Exact greedy CART on gradient statistics. Random forests grow it with
// g = -w*y, h = w (variance reduction, leaf = weighted mean); gradient
// boosting grows it with loss gradients and hessians (Newton leaf weights
// with L2 penalty lambda).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "discover/models/dataset.hpp"
#include "discover/rng.hpp"
#include "json.hpp"

namespace discover {

struct TreeParams {
  int max_depth = 6;  // 0 = unlimited
  double min_leaf = 1.0;  // minimum row weight per child
  double lambda = 0.0;
  double feature_fraction = 1.0;  // share of features tried at each node
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 for leaves
  // Row goes left iff x[feature] <= threshold. The threshold is the largest
  // training value on the left, so a strictly increasing transform of a
  // feature leaves every routing decision unchanged, unseen values included.
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
    }
    return nodes_[i].value;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

  bool uses_feature(std::size_t j) const {
    return std::any_of(nodes_.begin(), nodes_.end(),
                       [&](const TreeNode& n) { return n.feature == static_cast<std::int32_t>(j); });
  }

 private:
  std::vector<TreeNode> nodes_;
};

// Rows with weight 0 do not take part. grad/hess/weight are indexed by row.
inline DecisionTree grow_tree(const Dataset& data, const SortedIndex& sorted,
                              std::span<const double> grad, std::span<const double> hess,
                              std::span<const double> weight, const TreeParams& params, Rng& rng) {
  const std::size_t cols = data.cols;
  require(grad.size() == data.rows && hess.size() == data.rows && weight.size() == data.rows,
          ErrorKind::invalid_argument, "gradient statistics must cover every row");
  std::size_t n = 0;
  double g_all = 0.0, h_all = 0.0;
  for (std::size_t r = 0; r < data.rows; ++r) {
    if (weight[r] > 0.0) {
      ++n;
      g_all += grad[r];
      h_all += hess[r];
    }
  }
  if (cols == 0 || n == 0) {
    const double denom = h_all + params.lambda;
    return DecisionTree({TreeNode{-1, 0.0, -1, -1, denom > 0.0 ? -g_all / denom : 0.0}});
  }

  // lists[j*n + k]: k-th active row of the current ordering for feature j.
  std::vector<std::uint32_t> lists(cols * n);
  for (std::size_t j = 0; j < cols; ++j) {
    std::size_t k = 0;
    for (auto r : sorted.order[j])
      if (weight[r] > 0.0) lists[j * n + k++] = r;
  }
  std::vector<std::uint32_t> scratch(n);
  std::vector<std::uint8_t> goes_left(data.rows, 0);
  std::vector<std::size_t> features(cols);
  std::iota(features.begin(), features.end(), std::size_t{0});
  const std::size_t tried =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(params.feature_fraction *
                                                                    static_cast<double>(cols))),
                              1, cols);

  struct Pending {
    std::size_t begin, end;
    int depth;
    std::size_t node;
  };
  std::vector<TreeNode> nodes(1);
  std::vector<Pending> stack{{0, n, 0, 0}};
  const double lambda = params.lambda;

  while (!stack.empty()) {
    const Pending cur = stack.back();
    stack.pop_back();
    double G = 0.0, H = 0.0, W = 0.0;
    for (std::size_t k = cur.begin; k < cur.end; ++k) {
      const auto r = lists[k];
      G += grad[r];
      H += hess[r];
      W += weight[r];
    }
    TreeNode& node = nodes[cur.node];
    node.value = H + lambda > 0.0 ? -G / (H + lambda) : 0.0;
    if ((params.max_depth > 0 && cur.depth >= params.max_depth) || W < 2.0 * params.min_leaf ||
        cur.end - cur.begin < 2)
      continue;

    if (tried < cols) {
      for (std::size_t i = 0; i < tried; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(cols - i));
        std::swap(features[i], features[j]);
      }
    }
    const double parent_score = G * G / (H + lambda);
    double best_gain = 0.0;
    std::size_t best_feature = cols;
    std::size_t best_pos = 0;
    double best_threshold = 0.0;
    for (std::size_t fi = 0; fi < tried; ++fi) {
      const std::size_t f = tried < cols ? features[fi] : fi;
      const std::uint32_t* list = lists.data() + f * n;
      double gl = 0.0, hl = 0.0, wl = 0.0;
      for (std::size_t k = cur.begin; k + 1 < cur.end; ++k) {
        const auto r = list[k];
        gl += grad[r];
        hl += hess[r];
        wl += weight[r];
        const double lo = data.at(r, f);
        const double hi = data.at(list[k + 1], f);
        if (lo == hi) continue;
        if (wl < params.min_leaf) continue;
        if (W - wl < params.min_leaf) break;
        const double gr = G - gl, hr = H - hl;
        const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_pos = k;
          best_threshold = lo;
        }
      }
    }
    if (best_feature == cols || !(best_gain > 1e-12 * std::abs(parent_score))) continue;

    const std::uint32_t* split_list = lists.data() + best_feature * n;
    for (std::size_t k = cur.begin; k < cur.end; ++k) goes_left[split_list[k]] = k <= best_pos;
    const std::size_t left_count = best_pos + 1 - cur.begin;
    for (std::size_t j = 0; j < cols; ++j) {
      std::uint32_t* list = lists.data() + j * n;
      std::size_t l = 0, r = left_count;
      for (std::size_t k = cur.begin; k < cur.end; ++k) {
        const auto row = list[k];
        scratch[goes_left[row] ? l++ : r++] = row;
      }
      std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(cur.end - cur.begin),
                list + cur.begin);
    }

    const auto left = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({});
    nodes.push_back({});
    TreeNode& parent = nodes[cur.node];
    parent.feature = static_cast<std::int32_t>(best_feature);
    parent.threshold = best_threshold;
    parent.left = left;
    parent.right = left + 1;
    const std::size_t mid = cur.begin + left_count;
    stack.push_back({mid, cur.end, cur.depth + 1, static_cast<std::size_t>(left + 1)});
    stack.push_back({cur.begin, mid, cur.depth + 1, static_cast<std::size_t>(left)});
  }
  return DecisionTree(std::move(nodes));
}

inline nlohmann::ordered_json to_json(const DecisionTree& tree) {
  // Nested form: {"feature", "threshold", "left", "right"} or {"value"}.
  const auto& nodes = tree.nodes();
  auto build = [&](auto&& self, std::size_t i) -> nlohmann::ordered_json {
    const auto& n = nodes[i];
    if (n.feature < 0) return {{"value", n.value}};
    nlohmann::ordered_json j;
    j["feature"] = n.feature;
    j["threshold"] = n.threshold;
    j["value"] = n.value;
    j["left"] = self(self, static_cast<std::size_t>(n.left));
    j["right"] = self(self, static_cast<std::size_t>(n.right));
    return j;
  };
  return build(build, 0);
}

inline DecisionTree tree_from_json(const nlohmann::ordered_json& root) {
  std::vector<TreeNode> nodes;
  auto add = [&](auto&& self, const nlohmann::ordered_json& j) -> std::int32_t {
    const auto index = static_cast<std::int32_t>(nodes.size());
    nodes.push_back({});
    nodes[static_cast<std::size_t>(index)].value = j.at("value").get<double>();
    if (j.contains("feature")) {
      const auto f = j.at("feature").get<std::int32_t>();
      const double t = j.at("threshold").get<double>();
      const auto l = self(self, j.at("left"));
      const auto r = self(self, j.at("right"));
      auto& n = nodes[static_cast<std::size_t>(index)];
      n.feature = f;
      n.threshold = t;
      n.left = l;
      n.right = r;
    }
    return index;
  };
  add(add, root);
  return DecisionTree(std::move(nodes));
}

}  // namespace discover
