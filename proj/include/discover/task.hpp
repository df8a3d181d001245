#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "discover/error.hpp"
#include "discover/table.hpp"

namespace discover {

enum class Task { regression, binary_classification };

inline std::string_view to_string(Task task) {
  return task == Task::regression ? "regression" : "binary_classification";
}

inline Task task_from_string(std::string_view s) {
  if (s == "regression") return Task::regression;
  if (s == "binary_classification" || s == "classification") return Task::binary_classification;
  fail(ErrorKind::config, "unknown task '" + std::string(s) + "'");
}

// How the raw target column maps onto model labels. For classification the
// listed levels (or numeric values written as text) count as class 1.
struct TargetEncoding {
  Task task = Task::regression;
  std::vector<std::string> positive_levels;
};

namespace detail {

inline std::string numeric_label(double v) {
  return v == std::floor(v) && std::abs(v) < 1e15 ? std::to_string(static_cast<long long>(v))
                                                  : detail::format_real(v);
}

}  // namespace detail

// Picks the task from the column's contents: categorical/binary columns and
// numeric columns holding exactly {0, 1} are classification targets.
inline Task infer_task(const Column& target) {
  if (!target.is_numeric()) return Task::binary_classification;
  std::set<double> distinct;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target.missing[i]) continue;
    distinct.insert(target.values[i]);
    if (distinct.size() > 2) return Task::regression;
  }
  if (distinct == std::set<double>{0.0, 1.0}) return Task::binary_classification;
  return Task::regression;
}

// Resolves the positive class when none was configured.
inline TargetEncoding resolve_encoding(const Column& target, TargetEncoding encoding) {
  if (encoding.task == Task::regression) {
    require(target.is_numeric(), ErrorKind::config, "regression target must be numeric");
    return encoding;
  }
  if (!encoding.positive_levels.empty()) return encoding;
  if (target.is_numeric()) {
    encoding.positive_levels = {"1"};
    return encoding;
  }
  std::vector<std::string> used;
  std::set<std::uint32_t> codes;
  for (std::size_t i = 0; i < target.size(); ++i)
    if (!target.missing[i]) codes.insert(target.codes[i]);
  if (codes.size() != 2)
    fail(ErrorKind::config, "classification target '" + target.schema.name + "' has " +
                                std::to_string(codes.size()) +
                                " classes; set positive_levels to binarise it");
  encoding.positive_levels = {target.levels[*codes.rbegin()]};
  return encoding;
}

// Target as reals: raw values for regression, 0/1 labels for classification,
// NaN where the target is missing.
inline std::vector<double> encode_target(const Column& target, const TargetEncoding& encoding) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> y(target.size(), nan);
  if (encoding.task == Task::regression) {
    require(target.is_numeric(), ErrorKind::schema, "regression target must be numeric");
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!target.missing[i]) y[i] = target.values[i];
    return y;
  }
  const std::set<std::string> positive(encoding.positive_levels.begin(),
                                       encoding.positive_levels.end());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (target.missing[i]) continue;
    const std::string label =
        target.is_numeric() ? detail::numeric_label(target.values[i]) : target.level_of(i);
    y[i] = positive.count(label) ? 1.0 : 0.0;
  }
  return y;
}

}  // namespace discover
