#pragma once

// Seeded synthetic tables with known structure, shared by the tests, the
// acceptance suite and the make_synthetic tool.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "discover/patterns.hpp"
#include "discover/rng.hpp"
#include "discover/table.hpp"

namespace discover::synthetic {

// Planted subgroup: x1 > 0.6 and 0.3 <= x2 <= 0.55 (10% of rows under
// uniform features). y ~ N(0, 1) plus `shift` inside the subgroup.
struct PlantedSpec {
  std::size_t rows = 1000;
  std::size_t noise_features = 4;
  double shift = 2.0;
  double x1_above = 0.6;
  double x2_lo = 0.3;
  double x2_hi = 0.55;
};

inline bool in_planted(const PlantedSpec& s, double x1, double x2) {
  return x1 > s.x1_above && x2 >= s.x2_lo && x2 <= s.x2_hi;
}

inline Table planted_table(std::uint64_t seed, const PlantedSpec& s = {}) {
  Rng rng(seed);
  const std::size_t nf = 2 + s.noise_features;
  std::vector<std::vector<double>> x(nf, std::vector<double>(s.rows));
  std::vector<double> y(s.rows);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < nf; ++j) x[j][i] = rng.uniform();
    y[i] = rng.normal() + (in_planted(s, x[0][i], x[1][i]) ? s.shift : 0.0);
  }
  std::vector<Column> cols;
  for (std::size_t j = 0; j < nf; ++j) cols.push_back(Column::numeric("x" + std::to_string(j + 1), x[j]));
  auto target = Column::numeric("y", y);
  target.schema.role = ColumnRole::target;
  cols.push_back(std::move(target));
  return Table(std::move(cols));
}

// Pure noise: every feature and the target independent standard normals.
inline Table noise_table(std::uint64_t seed, std::size_t rows, std::size_t features) {
  Rng rng(seed);
  std::vector<Column> cols;
  for (std::size_t j = 0; j < features; ++j) {
    std::vector<double> v(rows);
    for (auto& e : v) e = rng.normal();
    cols.push_back(Column::numeric("f" + std::to_string(j + 1), std::move(v)));
  }
  std::vector<double> y(rows);
  for (auto& e : y) e = rng.normal();
  auto target = Column::numeric("y", std::move(y));
  target.schema.role = ColumnRole::target;
  cols.push_back(std::move(target));
  return Table(std::move(cols));
}

// Same two features as the planted subgroup, same effect direction, and every
// bound within one decile bin (0.1 in raw units, as the features are uniform
// on [0, 1]) of the planted bound it stands for.
inline bool matches_planted(const Pattern& p, const PlantedSpec& s = {}) {
  if (p.conditions.size() != 2 || p.effect != Effect::mean_increase) return false;
  const Condition* c1 = nullptr;
  const Condition* c2 = nullptr;
  for (const auto& c : p.conditions) {
    if (c.feature == "x1") c1 = &c;
    if (c.feature == "x2") c2 = &c;
  }
  if (!c1 || !c2) return false;
  constexpr double bin = 0.1;
  const bool x1_ok = c1->form == ConditionForm::quantile_above &&
                     std::abs(c1->threshold - s.x1_above) <= bin;
  const bool x2_ok = c2->form == ConditionForm::interval && std::abs(c2->lo - s.x2_lo) <= bin &&
                     std::abs(c2->hi - s.x2_hi) <= bin;
  return x1_ok && x2_ok;
}

}  // namespace discover::synthetic
