#include "persival/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace persival {

namespace {

struct RankedSamples {
  double rank_sum_a = 0;
  double rank_sum_b = 0;
  bool has_ties = false;
  double tie_term = 0;  // sum of t^3 - t over tie groups
};

// Midranks over the pooled samples: a tied group spanning ranks r..r+t-1 gets
// the average rank for every member.
RankedSamples rank(std::span<const double> a, std::span<const double> b) {
  struct Item {
    double value;
    bool from_a;
  };
  std::vector<Item> pool;
  pool.reserve(a.size() + b.size());
  for (double v : a) pool.push_back({v, true});
  for (double v : b) pool.push_back({v, false});
  std::sort(pool.begin(), pool.end(),
            [](const Item& x, const Item& y) { return x.value < y.value; });

  RankedSamples out;
  size_t i = 0;
  while (i < pool.size()) {
    size_t j = i;
    while (j < pool.size() && pool[j].value == pool[i].value) ++j;
    double group = static_cast<double>(j - i);
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k)
      (pool[k].from_a ? out.rank_sum_a : out.rank_sum_b) += midrank;
    if (group > 1) {
      out.has_ties = true;
      out.tie_term += group * group * group - group;
    }
    i = j;
  }
  return out;
}

// Number of rank splits of n1 + n2 items whose U statistic equals each value,
// by the usual recurrence on whether the largest rank belongs to sample a.
double exact_tail(uint64_t u_min, size_t n1, size_t n2) {
  size_t max_u = n1 * n2;
  // table[n][u] = count for (m fixed by outer loop, n, u)
  std::vector<std::vector<double>> table(n2 + 1, std::vector<double>(max_u + 1, 0.0));
  for (size_t n = 0; n <= n2; ++n) table[n][0] = 1.0;  // m = 0
  for (size_t m = 1; m <= n1; ++m) {
    std::vector<std::vector<double>> next(n2 + 1, std::vector<double>(max_u + 1, 0.0));
    for (size_t n = 0; n <= n2; ++n)
      for (size_t u = 0; u <= m * n; ++u) {
        double ways = u >= n ? table[n][u - n] : 0.0;  // largest rank in a
        if (n > 0) ways += next[n - 1][u];             // largest rank in b
        next[n][u] = ways;
      }
    table = std::move(next);
  }
  double below = 0;
  for (uint64_t u = 0; u <= u_min && u <= max_u; ++u) below += table[n2][u];
  double total = 0;
  for (size_t u = 0; u <= max_u; ++u) total += table[n2][u];
  return below / total;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                           double alpha, bool two_sided) {
  if (sample_a.empty() || sample_b.empty())
    throw std::invalid_argument("mann_whitney_u requires non-empty samples");

  const auto n1 = static_cast<double>(sample_a.size());
  const auto n2 = static_cast<double>(sample_b.size());
  RankedSamples ranks = rank(sample_a, sample_b);

  UTestResult result;
  result.u_ab = ranks.rank_sum_a - n1 * (n1 + 1) / 2.0;
  result.u_ba = ranks.rank_sum_b - n2 * (n2 + 1) / 2.0;
  result.u = std::min(result.u_ab, result.u_ba);

  if (!ranks.has_ties && sample_a.size() + sample_b.size() <= 12) {
    result.exact = true;
    // Without ties U is integral, so the cast is lossless.
    double tail = exact_tail(static_cast<uint64_t>(std::llround(result.u)), sample_a.size(),
                             sample_b.size());
    result.p = two_sided ? std::min(1.0, 2.0 * tail) : tail;
  } else {
    double n = n1 + n2;
    double mean = n1 * n2 / 2.0;
    double variance = n1 * n2 / 12.0 * ((n + 1) - ranks.tie_term / (n * (n - 1)));
    if (variance <= 0) {
      result.p = 1.0;
    } else {
      // u <= mean by the min convention; the 0.5 shifts toward the mean.
      double z = (result.u - mean + 0.5) / std::sqrt(variance);
      double tail = normal_cdf(z);
      result.p = two_sided ? std::min(1.0, 2.0 * tail) : tail;
    }
  }
  result.significant = result.p < alpha;
  return result;
}

std::vector<UTestResult> equivalence_verdicts(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    double alpha) {
  std::vector<UTestResult> table;
  table.reserve(pairs.size());
  for (const auto& [a, b] : pairs) table.push_back(mann_whitney_u(a, b, alpha));
  return table;
}

}  // namespace persival
