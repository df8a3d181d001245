#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "discover/error.hpp"
#include "discover/table.hpp"
#include "discover/task.hpp"

namespace discover {

// Dense row-major design matrix plus labels, built from an encoded table.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<std::string> feature_names;

  std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return x[i * cols + j]; }
};

// Builds the matrix from the named columns of an encoded table. Every listed
// column must be numeric and free of missing cells. When `encoding` is given
// the target is encoded into y and rows with a missing target are rejected.
inline Dataset to_dataset(const Table& table, const std::vector<std::string>& feature_names,
                          const TargetEncoding* encoding = nullptr) {
  Dataset d;
  d.rows = table.row_count();
  d.cols = feature_names.size();
  d.feature_names = feature_names;
  d.x.resize(d.rows * d.cols);
  for (std::size_t j = 0; j < d.cols; ++j) {
    auto idx = table.find(feature_names[j]);
    if (!idx) fail(ErrorKind::schema, "feature layout mismatch: missing '" + feature_names[j] + "'");
    const auto& c = table.column(*idx);
    if (!c.is_numeric()) fail(ErrorKind::schema, "feature '" + feature_names[j] + "' is not encoded");
    for (std::size_t i = 0; i < d.rows; ++i) {
      if (c.missing[i]) fail(ErrorKind::schema, "feature '" + feature_names[j] + "' has missing cells");
      d.x[i * d.cols + j] = c.values[i];
    }
  }
  if (encoding) {
    d.y = encode_target(table.target(), *encoding);
    for (double v : d.y)
      if (std::isnan(v)) fail(ErrorKind::data, "training rows must have a target");
  }
  return d;
}

// Encoded feature names of a table: every numeric non-target column in order.
inline std::vector<std::string> encoded_feature_names(const Table& table) {
  std::vector<std::string> names;
  for (auto j : table.feature_indices()) names.push_back(table.column(j).schema.name);
  return names;
}

// Per-feature row order by value (ties by row index), computed once and shared
// by every tree grown on the dataset.
struct SortedIndex {
  std::vector<std::vector<std::uint32_t>> order;

  explicit SortedIndex(const Dataset& d) : order(d.cols) {
    for (std::size_t j = 0; j < d.cols; ++j) {
      auto& o = order[j];
      o.resize(d.rows);
      std::iota(o.begin(), o.end(), std::uint32_t{0});
      std::stable_sort(o.begin(), o.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return d.at(a, j) < d.at(b, j); });
    }
  }
};

}  // namespace discover
