#pragma once

// Subgroup patterns: conjunctions of conditions on raw features whose
// subgroup shifts the target. Beam search on the training rows, validation
// on the holdout rows, Benjamini-Hochberg across everything emitted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "discover/error.hpp"
#include "discover/parallel.hpp"
#include "discover/stats.hpp"
#include "discover/table.hpp"
#include "discover/task.hpp"
#include "json.hpp"

namespace discover {

enum class ConditionForm { quantile_above, quantile_below, interval, category_equals };

inline std::string_view to_string(ConditionForm f) {
  switch (f) {
    case ConditionForm::quantile_above: return "quantile_above";
    case ConditionForm::quantile_below: return "quantile_below";
    case ConditionForm::interval: return "interval";
    case ConditionForm::category_equals: return "category_equals";
  }
  return "?";
}

inline ConditionForm condition_form_from_string(std::string_view s) {
  for (auto f : {ConditionForm::quantile_above, ConditionForm::quantile_below, ConditionForm::interval,
                 ConditionForm::category_equals})
    if (to_string(f) == s) return f;
  fail(ErrorKind::invalid_argument, "unknown condition form '" + std::string(s) + "'");
}

// Bound values are in raw feature units. q_lo/q_hi record which quantiles an
// interval was cut from (both 0 for intervals given directly).
struct Condition {
  std::string feature;
  ConditionForm form = ConditionForm::quantile_above;
  double q = 0.0;
  double threshold = 0.0;
  double q_lo = 0.0;
  double q_hi = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::string level;

  bool operator==(const Condition&) const = default;
};

enum class Effect {
  mean_increase,
  mean_decrease,
  odds_increase,
  odds_decrease,
  variance_increase,
  variance_decrease,
};

inline std::string_view to_string(Effect e) {
  switch (e) {
    case Effect::mean_increase: return "mean_increase";
    case Effect::mean_decrease: return "mean_decrease";
    case Effect::odds_increase: return "odds_increase";
    case Effect::odds_decrease: return "odds_decrease";
    case Effect::variance_increase: return "variance_increase";
    case Effect::variance_decrease: return "variance_decrease";
  }
  return "?";
}

inline Effect effect_from_string(std::string_view s) {
  for (auto e : {Effect::mean_increase, Effect::mean_decrease, Effect::odds_increase,
                 Effect::odds_decrease, Effect::variance_increase, Effect::variance_decrease})
    if (to_string(e) == s) return e;
  fail(ErrorKind::invalid_argument, "unknown effect '" + std::string(s) + "'");
}

inline Direction direction_of(Effect e) {
  return e == Effect::mean_increase || e == Effect::odds_increase || e == Effect::variance_increase
             ? Direction::greater
             : Direction::less;
}

inline bool is_variance_effect(Effect e) {
  return e == Effect::variance_increase || e == Effect::variance_decrease;
}

enum class PatternKind { discovery, hypothesis };

inline std::string_view to_string(PatternKind k) {
  return k == PatternKind::discovery ? "discovery" : "hypothesis";
}

inline PatternKind pattern_kind_from_string(std::string_view s) {
  if (s == "discovery") return PatternKind::discovery;
  if (s == "hypothesis") return PatternKind::hypothesis;
  fail(ErrorKind::invalid_argument, "unknown pattern kind '" + std::string(s) + "'");
}

struct Pattern {
  std::vector<Condition> conditions;
  Effect effect = Effect::mean_increase;
  std::optional<PatternKind> kind;

  bool operator==(const Pattern&) const = default;
};

// Evidence for one pattern on one table. Rows with a missing target take no
// part. effect_size is mu - mu_complement; for variance effects it is the
// difference of mean absolute deviations from each group's own median.
struct PatternEvidence {
  std::size_t n = 0;
  double mu = 0.0;
  double p = 1.0;
  TestResult test;
  std::size_t novelty_rank = 0;
  std::size_t n_complement = 0;
  double mu_complement = 0.0;
  double effect_size = 0.0;
  bool degenerate = false;  // empty subgroup or empty complement
};

struct MiningConfig {
  std::size_t beam_width = 20;
  std::size_t max_arity = 3;
  std::size_t n_min = 10;
  std::size_t top_k_features = 12;
  double alpha_discovery = 0.01;
  double alpha_hypothesis = 0.05;
  std::vector<double> quantile_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t max_interval_bins = 3;
  // A refinement must beat its parent's remaining rows at this level,
  // divided by the number of refinements tried for that parent.
  double productivity_alpha = 0.05;
  bool variance_effects = true;

  void validate() const {
    require(beam_width >= 1, ErrorKind::config, "beam_width must be at least 1");
    require(max_arity >= 1 && max_arity <= 6, ErrorKind::config, "max_arity must lie in [1, 6]");
    require(n_min >= 1, ErrorKind::config, "n_min must be at least 1");
    require(top_k_features >= 1, ErrorKind::config, "top_k_features must be at least 1");
    require(alpha_discovery > 0 && alpha_discovery < 1, ErrorKind::config,
            "alpha_discovery must lie in (0, 1)");
    require(alpha_hypothesis > 0 && alpha_hypothesis < 1, ErrorKind::config,
            "alpha_hypothesis must lie in (0, 1)");
    require(productivity_alpha > 0 && productivity_alpha <= 1, ErrorKind::config,
            "productivity_alpha must lie in (0, 1]");
    require(!quantile_grid.empty(), ErrorKind::config, "quantile_grid must not be empty");
    for (std::size_t i = 0; i < quantile_grid.size(); ++i) {
      require(quantile_grid[i] > 0 && quantile_grid[i] < 1, ErrorKind::config,
              "quantile_grid values must lie in (0, 1)");
      require(i == 0 || quantile_grid[i] > quantile_grid[i - 1], ErrorKind::config,
              "quantile_grid must be strictly increasing");
    }
  }
};

// ---------------------------------------------------------------------------
// Conditions

// Linear interpolation between order statistics: h = (n - 1) q.
inline double empirical_quantile(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorKind::invalid_argument, "quantile of an empty sample");
  require(q >= 0 && q <= 1, ErrorKind::invalid_argument, "quantile position must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace detail {

inline std::vector<double> sorted_values(const Column& c, std::span<const std::size_t> rows) {
  std::vector<double> v;
  v.reserve(rows.size());
  for (auto r : rows)
    if (!c.missing[r]) v.push_back(c.values[r]);
  std::sort(v.begin(), v.end());
  return v;
}

inline std::vector<std::size_t> all_rows(const Table& t) {
  std::vector<std::size_t> rows(t.row_count());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

inline const Column& numeric_feature(const Table& t, const std::string& name) {
  const auto& c = t.column(name);
  if (!c.is_numeric()) fail(ErrorKind::schema, "feature '" + name + "' is not numeric");
  return c;
}

inline std::string short_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string percent(double share) {
  return short_real(std::round(share * 1e6) / 1e4) + "%";
}

}  // namespace detail

// Quantile condition with its threshold bound to the non-missing values of
// `feature` in `table`.
inline Condition quantile_condition(const Table& table, const std::string& feature, ConditionForm form,
                                    double q) {
  require(form == ConditionForm::quantile_above || form == ConditionForm::quantile_below,
          ErrorKind::invalid_argument, "not a quantile form");
  require(q > 0 && q < 1, ErrorKind::invalid_argument, "quantile position must lie in (0, 1)");
  const auto& c = detail::numeric_feature(table, feature);
  const auto v = detail::sorted_values(c, detail::all_rows(table));
  require(!v.empty(), ErrorKind::data, "feature has no observed values");
  Condition out;
  out.feature = feature;
  out.form = form;
  out.q = q;
  out.threshold = empirical_quantile(v, q);
  return out;
}

inline Condition interval_condition(std::string feature, double lo, double hi) {
  require(lo < hi, ErrorKind::invalid_argument, "interval needs lo < hi");
  Condition c;
  c.feature = std::move(feature);
  c.form = ConditionForm::interval;
  c.lo = lo;
  c.hi = hi;
  return c;
}

inline Condition category_condition(std::string feature, std::string level) {
  Condition c;
  c.feature = std::move(feature);
  c.form = ConditionForm::category_equals;
  c.level = std::move(level);
  return c;
}

// Row mask of `condition` over `table`. Missing values never match. A level
// unknown to the table is an error unless allow_absent_level is set, in which
// case nothing matches (a holdout may lack a rare training level).
inline std::vector<std::uint8_t> bind_conditions(const Table& table, const Condition& condition,
                                                 bool allow_absent_level = false) {
  const auto& c = table.column(condition.feature);
  std::vector<std::uint8_t> mask(table.row_count(), 0);
  if (condition.form == ConditionForm::category_equals) {
    if (c.is_numeric())
      fail(ErrorKind::schema, "category condition on numeric feature '" + condition.feature + "'");
    const auto code = c.find_level(condition.level);
    if (!code) {
      if (allow_absent_level) return mask;
      fail(ErrorKind::schema,
           "unknown level '" + condition.level + "' for feature '" + condition.feature + "'");
    }
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = !c.missing[i] && c.codes[i] == *code;
    return mask;
  }
  if (!c.is_numeric())
    fail(ErrorKind::schema, "numeric condition on non-numeric feature '" + condition.feature + "'");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (c.missing[i]) continue;
    const double v = c.values[i];
    switch (condition.form) {
      case ConditionForm::quantile_above: mask[i] = v > condition.threshold; break;
      case ConditionForm::quantile_below: mask[i] = v <= condition.threshold; break;
      default: mask[i] = v >= condition.lo && v <= condition.hi; break;
    }
  }
  return mask;
}

inline std::vector<std::uint8_t> bind_pattern(const Table& table, const Pattern& pattern,
                                              bool allow_absent_level = false) {
  std::vector<std::uint8_t> mask(table.row_count(), 1);
  for (const auto& c : pattern.conditions) {
    const auto m = bind_conditions(table, c, allow_absent_level);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] &= m[i];
  }
  return mask;
}

// Sort key: feature, form, then bound values.
inline std::string condition_key(const Condition& c) {
  std::string k = c.feature + "|" + std::string(to_string(c.form)) + "|";
  switch (c.form) {
    case ConditionForm::quantile_above:
    case ConditionForm::quantile_below:
      k += detail::format_real(c.q) + "|" + detail::format_real(c.threshold);
      break;
    case ConditionForm::interval: k += detail::format_real(c.lo) + "|" + detail::format_real(c.hi); break;
    case ConditionForm::category_equals: k += c.level; break;
  }
  return k;
}

inline std::string pattern_key(const Pattern& p) {
  std::vector<std::string> keys;
  for (const auto& c : p.conditions) keys.push_back(condition_key(c));
  std::sort(keys.begin(), keys.end());
  std::string k;
  for (const auto& s : keys) k += s + " & ";
  return k + std::string(to_string(p.effect));
}

// Reader-facing wording, e.g. "AST in the top 20%", "ALP between 50 and 66".
inline std::string condition_label(const Condition& c) {
  switch (c.form) {
    case ConditionForm::quantile_above:
      return c.feature + " in the top " + detail::percent(1.0 - c.q) + " (> " +
             detail::short_real(c.threshold) + ")";
    case ConditionForm::quantile_below:
      return c.feature + " in the bottom " + detail::percent(c.q) + " (<= " +
             detail::short_real(c.threshold) + ")";
    case ConditionForm::interval:
      return c.feature + " between " + detail::short_real(c.lo) + " and " + detail::short_real(c.hi);
    case ConditionForm::category_equals: return c.feature + " is " + c.level;
  }
  return c.feature;
}

inline std::string pattern_label(const Pattern& p) {
  std::string s;
  for (std::size_t i = 0; i < p.conditions.size(); ++i) {
    if (i) s += " AND ";
    s += condition_label(p.conditions[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Evidence

namespace detail {

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double median_in_place(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)) + upper);
}

inline std::vector<double> abs_deviations(std::span<const double> v) {
  std::vector<double> copy(v.begin(), v.end());
  const double m = median_in_place(copy);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i] - m);
  return out;
}

// One-tailed comparison of a subgroup against a reference group for the
// effect family (mean, odds, variance). Returns the test and the effect size.
inline std::pair<TestResult, double> compare_groups(std::span<const double> sub,
                                                    std::span<const double> ref, Effect effect) {
  const Direction dir = direction_of(effect);
  if (effect == Effect::odds_increase || effect == Effect::odds_decrease) {
    std::size_t s1 = 0, s2 = 0;
    for (double v : sub) s1 += v == 1.0;
    for (double v : ref) s2 += v == 1.0;
    return {proportions_z_one_tailed(s1, sub.size(), s2, ref.size(), dir),
            mean_of(sub) - mean_of(ref)};
  }
  if (is_variance_effect(effect)) {
    const auto a = abs_deviations(sub);
    const auto b = abs_deviations(ref);
    return {mann_whitney_one_tailed(a, b, dir), mean_of(a) - mean_of(b)};
  }
  return {mann_whitney_one_tailed(sub, ref, dir), mean_of(sub) - mean_of(ref)};
}

inline TestKind test_kind_of(Effect e) {
  return e == Effect::odds_increase || e == Effect::odds_decrease ? TestKind::proportions_z
                                                                   : TestKind::mann_whitney;
}

// y holds the encoded target per row (NaN = missing).
inline PatternEvidence evidence_from_mask(std::span<const double> y, std::span<const std::uint8_t> mask,
                                          Effect effect) {
  std::vector<double> sub, ref;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::isnan(y[i])) continue;
    (mask[i] ? sub : ref).push_back(y[i]);
  }
  PatternEvidence e;
  e.n = sub.size();
  e.n_complement = ref.size();
  e.mu = mean_of(sub);
  e.mu_complement = mean_of(ref);
  e.test.test = test_kind_of(effect);
  e.test.direction = direction_of(effect);
  e.test.n_subgroup = e.n;
  e.test.n_reference = e.n_complement;
  if (sub.empty() || ref.empty()) {
    e.degenerate = true;
    e.p = 1.0;
    e.test.p_value = 1.0;
    return e;
  }
  auto [test, size] = compare_groups(sub, ref, effect);
  e.test = test;
  e.effect_size = size;
  e.p = test.p_value;
  return e;
}

}  // namespace detail

// Evidence of `pattern` on `table`, whose target is encoded by `encoding`.
// An empty subgroup (or complement) gives p = 1 and degenerate = true.
inline PatternEvidence evaluate_pattern(const Table& table, const TargetEncoding& encoding,
                                        const Pattern& pattern) {
  require(!pattern.conditions.empty(), ErrorKind::invalid_argument, "pattern has no conditions");
  const auto y = encode_target(table.target(), encoding);
  const auto mask = bind_pattern(table, pattern);
  return detail::evidence_from_mask(y, mask, pattern.effect);
}

// Discovery iff holdout n >= n_min and the BH-adjusted holdout p is at most
// alpha_discovery. Otherwise hypothesis iff train p <= alpha_hypothesis and
// the model's predicted subgroup effect points the same way. Otherwise
// dropped (nullopt). model_effect is absent when the model cannot speak to
// the effect (variance effects).
inline std::optional<PatternKind> classify_pattern(const PatternEvidence& train,
                                                   const PatternEvidence& holdout,
                                                   double holdout_adjusted_p, Effect effect,
                                                   std::optional<double> model_effect,
                                                   const MiningConfig& config) {
  if (holdout.n >= config.n_min && !holdout.degenerate && holdout_adjusted_p <= config.alpha_discovery)
    return PatternKind::discovery;
  if (train.p <= config.alpha_hypothesis && model_effect) {
    const bool agrees = direction_of(effect) == Direction::greater ? *model_effect > 0.0
                                                                   : *model_effect < 0.0;
    if (agrees) return PatternKind::hypothesis;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mining

struct MinedPattern {
  Pattern pattern;
  PatternEvidence train;
  PatternEvidence holdout;
  double holdout_adjusted_p = 1.0;
  std::optional<double> model_effect;
};

struct MiningResult {
  std::vector<MinedPattern> patterns;  // all emitted, ranked; pattern.kind unset = dropped
  std::vector<std::string> features;   // features searched, most important first
  std::size_t candidates_evaluated = 0;
};

namespace detail {

class RowSet {
 public:
  explicit RowSet(std::size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }

  RowSet operator&(const RowSet& o) const {
    RowSet r(n_);
    for (std::size_t k = 0; k < words_.size(); ++k) r.words_[k] = words_[k] & o.words_[k];
    return r;
  }

  std::size_t count_and(const RowSet& o) const {
    std::size_t c = 0;
    for (std::size_t k = 0; k < words_.size(); ++k)
      c += static_cast<std::size_t>(__builtin_popcountll(words_[k] & o.words_[k]));
    return c;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      std::uint64_t w = words_[k];
      while (w) {
        const int b = __builtin_ctzll(w);
        f(k * 64 + static_cast<std::size_t>(b));
        w &= w - 1;
      }
    }
  }

  std::string bytes() const {
    return std::string(reinterpret_cast<const char*>(words_.data()), words_.size() * 8);
  }

  bool operator==(const RowSet&) const = default;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> words_;
};

struct Candidate {
  Condition condition;
  std::size_t slot = 0;  // index into the searched feature list
  std::string key;
  RowSet mask;
};

struct Node {
  std::vector<std::size_t> candidates;  // sorted by condition key
  RowSet mask;
  Effect effect = Effect::mean_increase;
  double p = 1.0;
  double effect_size = 0.0;
  std::size_t n = 0;
  std::string key;
};

inline bool node_before(const Node& a, const Node& b) {
  if (a.p != b.p) return a.p < b.p;
  if (std::abs(a.effect_size) != std::abs(b.effect_size))
    return std::abs(a.effect_size) > std::abs(b.effect_size);
  return a.key < b.key;
}

inline Effect effect_for(Task task, bool variance, Direction d) {
  const bool up = d == Direction::greater;
  if (task == Task::binary_classification) return up ? Effect::odds_increase : Effect::odds_decrease;
  if (variance) return up ? Effect::variance_increase : Effect::variance_decrease;
  return up ? Effect::mean_increase : Effect::mean_decrease;
}

// Training rows with a target, in compact index space, plus precomputed
// ranks so that a mean-effect test costs one pass over the subgroup.
struct SearchSpace {
  Task task = Task::regression;
  std::vector<double> y;
  PooledRanks ranks;
  bool has_ties = false;
  double total = 0.0;
  RowSet positives;

  std::size_t size() const { return y.size(); }

  std::vector<double> values(const RowSet& mask) const {
    std::vector<double> v;
    mask.for_each([&](std::size_t i) { v.push_back(y[i]); });
    return v;
  }

  std::vector<double> values_outside(const RowSet& mask) const {
    std::vector<double> v;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (!mask.test(i)) v.push_back(y[i]);
    return v;
  }

  // Test of mask against all other rows. With `fixed` unset, both directions
  // are tried and the smaller p kept.
  std::pair<Effect, std::pair<double, double>> score(const RowSet& mask, std::size_t n, bool variance,
                                                     std::optional<Direction> fixed) const {
    const std::size_t m = size() - n;
    auto pick = [&](auto&& test_for) {
      if (fixed) return std::pair{*fixed, test_for(*fixed)};
      const double pg = test_for(Direction::greater);
      const double pl = test_for(Direction::less);
      return pl < pg ? std::pair{Direction::less, pl} : std::pair{Direction::greater, pg};
    };
    if (task == Task::binary_classification) {
      const std::size_t s = mask.count_and(positives);
      const std::size_t s_all = positives.count();
      auto [d, p] = pick([&](Direction dir) {
        return proportions_z_one_tailed(s, n, s_all - s, m, dir).p_value;
      });
      const double eff = static_cast<double>(s) / static_cast<double>(n) -
                         static_cast<double>(s_all - s) / static_cast<double>(m);
      return {effect_for(task, false, d), {p, eff}};
    }
    if (variance) {
      const auto a = abs_deviations(values(mask));
      const auto b = abs_deviations(values_outside(mask));
      auto [d, p] = pick([&](Direction dir) { return mann_whitney_one_tailed(a, b, dir).p_value; });
      return {effect_for(task, true, d), {p, mean_of(a) - mean_of(b)}};
    }
    double rank_sum = 0.0, sum = 0.0;
    mask.for_each([&](std::size_t i) {
      rank_sum += ranks.ranks[i];
      sum += y[i];
    });
    auto [d, p] = pick([&](Direction dir) {
      return mann_whitney_from_ranks(rank_sum, n, m, ranks.tie_term, has_ties, dir).p_value;
    });
    const double eff = sum / static_cast<double>(n) - (total - sum) / static_cast<double>(m);
    return {effect_for(task, false, d), {p, eff}};
  }

  // Does the refinement `child` of `parent` beat the parent's other rows?
  double productivity_p(const RowSet& parent, const RowSet& child, Effect effect) const {
    std::vector<double> in, rest;
    parent.for_each([&](std::size_t i) { (child.test(i) ? in : rest).push_back(y[i]); });
    if (in.empty() || rest.empty()) return 1.0;
    return compare_groups(in, rest, effect).first.p_value;
  }
};

inline std::vector<Candidate> build_candidates(const Table& train, std::span<const std::size_t> rows,
                                               const std::vector<std::string>& features,
                                               const MiningConfig& config) {
  std::vector<Candidate> out;
  const std::size_t N = rows.size();
  for (std::size_t slot = 0; slot < features.size(); ++slot) {
    const auto& col = train.column(features[slot]);
    std::vector<Condition> conds;
    if (col.is_numeric()) {
      const auto v = sorted_values(col, rows);
      if (v.size() < 2) continue;
      std::vector<double> cuts;
      for (double q : config.quantile_grid) cuts.push_back(empirical_quantile(v, q));
      for (std::size_t g = 0; g < cuts.size(); ++g) {
        for (auto form : {ConditionForm::quantile_above, ConditionForm::quantile_below}) {
          Condition c;
          c.feature = features[slot];
          c.form = form;
          c.q = config.quantile_grid[g];
          c.threshold = cuts[g];
          conds.push_back(c);
        }
      }
      for (std::size_t a = 0; a < cuts.size(); ++a) {
        for (std::size_t k = 1; k <= config.max_interval_bins && a + k < cuts.size(); ++k) {
          if (!(cuts[a] < cuts[a + k])) continue;
          Condition c = interval_condition(features[slot], cuts[a], cuts[a + k]);
          c.q_lo = config.quantile_grid[a];
          c.q_hi = config.quantile_grid[a + k];
          conds.push_back(c);
        }
      }
    } else {
      std::set<std::uint32_t> codes;
      for (auto r : rows)
        if (!col.missing[r]) codes.insert(col.codes[r]);
      for (auto code : codes) conds.push_back(category_condition(features[slot], col.levels[code]));
    }

    std::unordered_set<std::string> seen;
    for (auto& c : conds) {
      const auto full = bind_conditions(train, c);
      RowSet mask(N);
      std::size_t n = 0;
      for (std::size_t i = 0; i < N; ++i)
        if (full[rows[i]]) {
          mask.set(i);
          ++n;
        }
      if (n < config.n_min || N - n < config.n_min) continue;
      if (!seen.insert(mask.bytes()).second) continue;
      out.push_back({c, slot, condition_key(c), std::move(mask)});
    }
  }
  return out;
}

inline Node make_node(std::vector<std::size_t> ids, const std::vector<Candidate>& cands, RowSet mask,
                      std::size_t n, Effect effect, double p, double size) {
  std::sort(ids.begin(), ids.end(),
            [&](std::size_t a, std::size_t b) { return cands[a].key < cands[b].key; });
  Node node;
  node.candidates = std::move(ids);
  node.mask = std::move(mask);
  node.n = n;
  node.effect = effect;
  node.p = p;
  node.effect_size = size;
  for (auto id : node.candidates) node.key += cands[id].key + " & ";
  node.key += std::string(to_string(effect));
  return node;
}

// Best nodes first; a row set already kept for the same effect is skipped.
inline std::vector<Node> select_beam(std::vector<Node> nodes, std::size_t width) {
  std::sort(nodes.begin(), nodes.end(), node_before);
  std::vector<Node> beam;
  std::unordered_set<std::string> seen;
  for (auto& node : nodes) {
    if (beam.size() == width) break;
    if (!seen.insert(node.mask.bytes() + std::string(to_string(node.effect))).second) continue;
    beam.push_back(std::move(node));
  }
  return beam;
}

}  // namespace detail

// Beam search over conjunctions of grid conditions on the first
// top_k_features entries of `ranked_features` (raw feature names, most
// important first). `train_predictions` holds the model's output for each
// training row; empty disables hypotheses.
inline MiningResult mine_patterns(const Table& train, const Table& holdout, const TargetEncoding& encoding,
                                  const std::vector<std::string>& ranked_features,
                                  std::span<const double> train_predictions, const MiningConfig& config) {
  config.validate();
  MiningResult result;
  for (const auto& f : ranked_features) {
    if (result.features.size() == config.top_k_features) break;
    const auto j = train.find(f);
    if (!j || train.column(*j).schema.role != ColumnRole::feature) continue;
    result.features.push_back(f);
  }
  if (result.features.empty()) fail(ErrorKind::data, "no features survive importance ranking");
  require(train_predictions.empty() || train_predictions.size() == train.row_count(),
          ErrorKind::invalid_argument, "one model prediction per training row expected");

  const Task task = encoding.task;
  const auto y_all = encode_target(train.target(), encoding);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < y_all.size(); ++i)
    if (!std::isnan(y_all[i])) rows.push_back(i);
  const std::size_t N = rows.size();
  if (N < 2 * config.n_min) return result;

  detail::SearchSpace space;
  space.task = task;
  space.positives = detail::RowSet(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double v = y_all[rows[i]];
    space.y.push_back(v);
    space.total += v;
    if (v == 1.0) space.positives.set(i);
  }
  space.ranks = midranks(space.y);
  space.has_ties = space.ranks.tie_term > 0.0;

  const auto cands = detail::build_candidates(train, rows, result.features, config);
  std::vector<bool> families{false};
  if (task == Task::regression && config.variance_effects) families.push_back(true);

  // Level 1.
  std::vector<detail::Node> level;
  {
    std::vector<detail::Node> nodes(cands.size() * families.size());
    parallel_for(nodes.size(), [&](std::size_t k) {
      const std::size_t c = k / families.size();
      const bool variance = families[k % families.size()];
      const std::size_t n = cands[c].mask.count();
      auto [effect, ps] = space.score(cands[c].mask, n, variance, std::nullopt);
      nodes[k] = detail::make_node({c}, cands, cands[c].mask, n, effect, ps.first, ps.second);
    });
    result.candidates_evaluated += nodes.size();
    level = detail::select_beam(std::move(nodes), config.beam_width);
  }

  std::map<std::string, detail::Node> emitted;
  for (const auto& node : level) emitted.emplace(node.key, node);

  for (std::size_t arity = 2; arity <= config.max_arity && !level.empty(); ++arity) {
    std::vector<std::pair<std::size_t, std::size_t>> work;
    std::vector<double> alpha(level.size());
    for (std::size_t b = 0; b < level.size(); ++b) {
      std::set<std::size_t> used;
      for (auto id : level[b].candidates) used.insert(cands[id].slot);
      const std::size_t before = work.size();
      for (std::size_t c = 0; c < cands.size(); ++c)
        if (!used.count(cands[c].slot)) work.emplace_back(b, c);
      alpha[b] = config.productivity_alpha / static_cast<double>(std::max<std::size_t>(1, work.size() - before));
    }
    std::vector<std::optional<detail::Node>> children(work.size());
    parallel_for(work.size(), [&](std::size_t k) {
      const auto& parent = level[work[k].first];
      const std::size_t c = work[k].second;
      auto mask = parent.mask & cands[c].mask;
      const std::size_t n = mask.count();
      if (n < config.n_min || N - n < config.n_min || n == parent.n) return;
      auto [effect, ps] = space.score(mask, n, is_variance_effect(parent.effect),
                                      direction_of(parent.effect));
      if (!(ps.first < parent.p)) return;
      if (space.productivity_p(parent.mask, mask, effect) > alpha[work[k].first]) return;
      auto ids = parent.candidates;
      ids.push_back(c);
      children[k] = detail::make_node(std::move(ids), cands, std::move(mask), n, effect, ps.first,
                                      ps.second);
    });
    result.candidates_evaluated += work.size();

    std::vector<detail::Node> nodes;
    std::unordered_set<std::string> keys;
    for (auto& child : children)
      if (child && keys.insert(child->key).second) nodes.push_back(std::move(*child));
    level = detail::select_beam(std::move(nodes), config.beam_width);
    for (const auto& node : level) emitted.emplace(node.key, node);
  }

  // Patterns over the same features with the same effect differ only in cut
  // points; the one with the best training score stands for all of them.
  std::map<std::string, const detail::Node*> family_best;
  for (const auto& [key, node] : emitted) {
    std::vector<std::string> features;
    for (auto id : node.candidates) features.push_back(cands[id].condition.feature);
    std::sort(features.begin(), features.end());
    std::string family(to_string(node.effect));
    for (const auto& f : features) family += '\x1f' + f;
    auto& best = family_best[family];
    if (!best || detail::node_before(node, *best)) best = &node;
  }

  // Holdout validation.
  const auto y_hold = encode_target(holdout.target(), encoding);
  std::vector<MinedPattern> mined;
  for (const auto& [family, node_ptr] : family_best) {
    const auto& node = *node_ptr;
    MinedPattern m;
    for (auto id : node.candidates) m.pattern.conditions.push_back(cands[id].condition);
    m.pattern.effect = node.effect;
    const auto train_mask = bind_pattern(train, m.pattern);
    m.train = detail::evidence_from_mask(y_all, train_mask, node.effect);
    const auto hold_mask = bind_pattern(holdout, m.pattern, true);
    m.holdout = detail::evidence_from_mask(y_hold, hold_mask, node.effect);
    if (!train_predictions.empty() && !is_variance_effect(node.effect)) {
      double in = 0.0, out = 0.0;
      std::size_t n_in = 0, n_out = 0;
      for (auto r : rows) {
        if (train_mask[r]) {
          in += train_predictions[r];
          ++n_in;
        } else {
          out += train_predictions[r];
          ++n_out;
        }
      }
      if (n_in && n_out)
        m.model_effect = in / static_cast<double>(n_in) - out / static_cast<double>(n_out);
    }
    mined.push_back(std::move(m));
  }

  std::vector<double> raw(mined.size());
  for (std::size_t i = 0; i < mined.size(); ++i) raw[i] = mined[i].holdout.p;
  const auto adjusted = benjamini_hochberg(raw);
  for (std::size_t i = 0; i < mined.size(); ++i) {
    auto& m = mined[i];
    m.holdout_adjusted_p = adjusted[i];
    m.pattern.kind =
        classify_pattern(m.train, m.holdout, adjusted[i], m.pattern.effect, m.model_effect, config);
  }

  std::vector<std::string> keys(mined.size());
  for (std::size_t i = 0; i < mined.size(); ++i) keys[i] = pattern_key(mined[i].pattern);
  std::vector<std::size_t> order(mined.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = mined[a].holdout;
    const auto& z = mined[b].holdout;
    if (x.p != z.p) return x.p < z.p;
    if (std::abs(x.effect_size) != std::abs(z.effect_size))
      return std::abs(x.effect_size) > std::abs(z.effect_size);
    return keys[a] < keys[b];
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto m = std::move(mined[order[k]]);
    m.train.novelty_rank = m.holdout.novelty_rank = k + 1;
    result.patterns.push_back(std::move(m));
  }
  return result;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const Condition& c) {
  nlohmann::ordered_json j;
  j["feature"] = c.feature;
  j["form"] = to_string(c.form);
  switch (c.form) {
    case ConditionForm::quantile_above:
    case ConditionForm::quantile_below:
      j["q"] = c.q;
      j["threshold"] = c.threshold;
      break;
    case ConditionForm::interval:
      j["lo"] = c.lo;
      j["hi"] = c.hi;
      j["q_lo"] = c.q_lo;
      j["q_hi"] = c.q_hi;
      break;
    case ConditionForm::category_equals: j["level"] = c.level; break;
  }
  j["label"] = condition_label(c);
  return j;
}

inline Condition condition_from_json(const nlohmann::ordered_json& j) {
  Condition c;
  c.feature = j.at("feature").get<std::string>();
  c.form = condition_form_from_string(j.at("form").get<std::string>());
  switch (c.form) {
    case ConditionForm::quantile_above:
    case ConditionForm::quantile_below:
      c.q = j.at("q").get<double>();
      c.threshold = j.at("threshold").get<double>();
      break;
    case ConditionForm::interval:
      c.lo = j.at("lo").get<double>();
      c.hi = j.at("hi").get<double>();
      c.q_lo = j.at("q_lo").get<double>();
      c.q_hi = j.at("q_hi").get<double>();
      break;
    case ConditionForm::category_equals: c.level = j.at("level").get<std::string>(); break;
  }
  return c;
}

inline nlohmann::ordered_json to_json(const TestResult& t) {
  return {{"test", to_string(t.test)},         {"direction", to_string(t.direction)},
          {"statistic", t.statistic},          {"p_value", t.p_value},
          {"n_subgroup", t.n_subgroup},        {"n_reference", t.n_reference},
          {"method", to_string(t.method)}};
}

inline TestResult test_result_from_json(const nlohmann::ordered_json& j) {
  TestResult t;
  t.test = j.at("test") == "mann_whitney" ? TestKind::mann_whitney : TestKind::proportions_z;
  t.direction = j.at("direction") == "greater" ? Direction::greater : Direction::less;
  t.statistic = j.at("statistic").get<double>();
  t.p_value = j.at("p_value").get<double>();
  t.n_subgroup = j.at("n_subgroup").get<std::size_t>();
  t.n_reference = j.at("n_reference").get<std::size_t>();
  t.method = j.at("method") == "exact" ? TestMethod::exact : TestMethod::normal_approx;
  return t;
}

inline nlohmann::ordered_json to_json(const PatternEvidence& e) {
  nlohmann::ordered_json j;
  j["n"] = e.n;
  j["mu"] = e.mu;
  j["p"] = e.p;
  j["novelty_rank"] = e.novelty_rank;
  j["n_complement"] = e.n_complement;
  j["mu_complement"] = e.mu_complement;
  j["effect_size"] = e.effect_size;
  j["degenerate"] = e.degenerate;
  j["test"] = to_json(e.test);
  return j;
}

inline PatternEvidence evidence_from_json(const nlohmann::ordered_json& j) {
  PatternEvidence e;
  e.n = j.at("n").get<std::size_t>();
  e.mu = j.at("mu").get<double>();
  e.p = j.at("p").get<double>();
  e.novelty_rank = j.at("novelty_rank").get<std::size_t>();
  e.n_complement = j.at("n_complement").get<std::size_t>();
  e.mu_complement = j.at("mu_complement").get<double>();
  e.effect_size = j.at("effect_size").get<double>();
  e.degenerate = j.at("degenerate").get<bool>();
  e.test = test_result_from_json(j.at("test"));
  return e;
}

inline nlohmann::ordered_json to_json(const Pattern& p) {
  nlohmann::ordered_json j;
  j["label"] = pattern_label(p);
  j["effect"] = to_string(p.effect);
  if (p.kind) j["kind"] = to_string(*p.kind);
  j["conditions"] = nlohmann::ordered_json::array();
  for (const auto& c : p.conditions) j["conditions"].push_back(to_json(c));
  return j;
}

inline Pattern pattern_from_json(const nlohmann::ordered_json& j) {
  Pattern p;
  p.effect = effect_from_string(j.at("effect").get<std::string>());
  if (j.contains("kind")) p.kind = pattern_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& c : j.at("conditions")) p.conditions.push_back(condition_from_json(c));
  return p;
}

inline nlohmann::ordered_json to_json(const MinedPattern& m) {
  nlohmann::ordered_json j;
  j["pattern"] = to_json(m.pattern);
  j["train"] = to_json(m.train);
  j["holdout"] = to_json(m.holdout);
  j["holdout_adjusted_p"] = m.holdout_adjusted_p;
  if (m.model_effect) j["model_effect"] = *m.model_effect;
  return j;
}

inline MinedPattern mined_pattern_from_json(const nlohmann::ordered_json& j) {
  MinedPattern m;
  m.pattern = pattern_from_json(j.at("pattern"));
  m.train = evidence_from_json(j.at("train"));
  m.holdout = evidence_from_json(j.at("holdout"));
  m.holdout_adjusted_p = j.at("holdout_adjusted_p").get<double>();
  if (j.contains("model_effect")) m.model_effect = j.at("model_effect").get<double>();
  return m;
}

}  // namespace discover
