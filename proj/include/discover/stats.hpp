#pragma once

// One-tailed tests comparing a subgroup's target values against a reference
// group, plus Benjamini-Hochberg adjustment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "discover/error.hpp"

namespace discover {

enum class TestKind { mann_whitney, proportions_z };
enum class Direction { greater, less };
enum class TestMethod { exact, normal_approx };

inline std::string_view to_string(TestKind k) {
  return k == TestKind::mann_whitney ? "mann_whitney" : "proportions_z";
}
inline std::string_view to_string(Direction d) { return d == Direction::greater ? "greater" : "less"; }
inline std::string_view to_string(TestMethod m) {
  return m == TestMethod::exact ? "exact" : "normal_approx";
}

struct TestResult {
  TestKind test = TestKind::mann_whitney;
  Direction direction = Direction::greater;
  double statistic = 0.0;  // U or z
  double p_value = 1.0;
  std::size_t n_subgroup = 0;
  std::size_t n_reference = 0;
  TestMethod method = TestMethod::normal_approx;
};

// Largest combined size for which Mann-Whitney p-values are exact.
inline constexpr std::size_t kExactCutoff = 12;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

inline double clamp_p(double p) {
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

// Upper and lower standard-normal tails at z, arranged so that the pair sums
// to exactly 1 in floating point: the smaller tail is computed directly and
// the other as its complement.
inline std::pair<double, double> normal_tails(double z) {
  if (z >= 0) {
    const double upper = normal_cdf(-z);
    return {upper, 1.0 - upper};
  }
  const double lower = normal_cdf(z);
  return {1.0 - lower, lower};
}

// Number of k-subsets of {1..n} with each rank sum, by the standard
// counting recursion. counts[s] indexes sums 0..max.
inline std::vector<double> rank_sum_counts(std::size_t n, std::size_t k) {
  const std::size_t max_sum = n * (n + 1) / 2;
  // ways[j][s]: j elements chosen with sum s, over the ranks seen so far.
  std::vector<std::vector<double>> ways(k + 1, std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t j = std::min(k, r); j >= 1; --j) {
      for (std::size_t s = max_sum; s >= r; --s) ways[j][s] += ways[j - 1][s - r];
    }
  }
  return ways[k];
}

}  // namespace detail

// Midranks (1-based) of the pooled sample, plus the tie term sum(t^3 - t).
struct PooledRanks {
  std::vector<double> ranks;
  double tie_term = 0.0;
};

inline PooledRanks midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  PooledRanks out;
  out.ranks.resize(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = midrank;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  return out;
}

// Mann-Whitney from a precomputed subgroup rank sum. Used directly by pattern
// search, where the pooled sample is fixed and only the subgroup changes.
inline TestResult mann_whitney_from_ranks(double subgroup_rank_sum, std::size_t n_sub,
                                          std::size_t n_ref, double tie_term, bool has_ties,
                                          Direction direction) {
  require(n_sub > 0 && n_ref > 0, ErrorKind::invalid_argument,
          "Mann-Whitney needs two nonempty samples");
  const double n = static_cast<double>(n_sub);
  const double m = static_cast<double>(n_ref);
  const double total = n + m;
  TestResult r;
  r.test = TestKind::mann_whitney;
  r.direction = direction;
  r.n_subgroup = n_sub;
  r.n_reference = n_ref;
  r.statistic = subgroup_rank_sum - n * (n + 1.0) / 2.0;

  if (n_sub + n_ref <= kExactCutoff && !has_ties) {
    const auto counts = detail::rank_sum_counts(n_sub + n_ref, n_sub);
    const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto observed = static_cast<std::size_t>(std::llround(subgroup_rank_sum));
    double tail = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      if (direction == Direction::greater ? s >= observed : s <= observed) tail += counts[s];
    }
    r.method = TestMethod::exact;
    r.p_value = detail::clamp_p(tail / all);
    return r;
  }

  r.method = TestMethod::normal_approx;
  const double mean = n * m / 2.0;
  const double variance = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (!(variance > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double sd = std::sqrt(variance);
  if (direction == Direction::greater) {
    const double z = (r.statistic - mean - 0.5) / sd;
    r.p_value = detail::clamp_p(detail::normal_tails(z).first);
  } else {
    const double z = (r.statistic - mean + 0.5) / sd;
    r.p_value = detail::clamp_p(detail::normal_tails(z).second);
  }
  return r;
}

// `greater` tests whether the subgroup is stochastically larger than the
// reference. Midranks for ties; exact p by rank-allocation counting when the
// combined size is at most kExactCutoff and there are no ties, otherwise a
// tie-corrected normal approximation with continuity correction.
inline TestResult mann_whitney_one_tailed(std::span<const double> subgroup,
                                          std::span<const double> reference,
                                          Direction direction) {
  require(!subgroup.empty() && !reference.empty(), ErrorKind::invalid_argument,
          "Mann-Whitney needs two nonempty samples");
  std::vector<double> pooled(subgroup.begin(), subgroup.end());
  pooled.insert(pooled.end(), reference.begin(), reference.end());
  const auto ranked = midranks(pooled);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < subgroup.size(); ++i) rank_sum += ranked.ranks[i];
  return mann_whitney_from_ranks(rank_sum, subgroup.size(), reference.size(), ranked.tie_term,
                                 ranked.tie_term > 0.0, direction);
}

// Pooled two-proportion z-test. With a pooled proportion of 0 or 1 there is
// no evidence either way and p = 1.
inline TestResult proportions_z_one_tailed(std::size_t successes_sub, std::size_t n_sub,
                                           std::size_t successes_ref, std::size_t n_ref,
                                           Direction direction) {
  require(n_sub >= 1 && n_ref >= 1, ErrorKind::invalid_argument,
          "proportions test needs nonempty groups");
  require(successes_sub <= n_sub && successes_ref <= n_ref, ErrorKind::invalid_argument,
          "successes exceed group size");
  TestResult r;
  r.test = TestKind::proportions_z;
  r.direction = direction;
  r.method = TestMethod::normal_approx;
  r.n_subgroup = n_sub;
  r.n_reference = n_ref;
  const double n1 = static_cast<double>(n_sub);
  const double n2 = static_cast<double>(n_ref);
  const double pooled = static_cast<double>(successes_sub + successes_ref) / (n1 + n2);
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  r.statistic = (static_cast<double>(successes_sub) / n1 - static_cast<double>(successes_ref) / n2) / se;
  const auto [upper, lower] = detail::normal_tails(r.statistic);
  r.p_value = detail::clamp_p(direction == Direction::greater ? upper : lower);
  return r;
}

// Benjamini-Hochberg adjusted p-values (step-up, monotone, capped at 1), in
// the input order.
inline std::vector<double> benjamini_hochberg(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m, 1.0);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double q = p_values[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, q);
    adjusted[order[k]] = std::min(1.0, running);
  }
  return adjusted;
}

}  // namespace discover
