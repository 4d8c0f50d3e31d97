#pragma once

#include <span>
#include <utility>
#include <vector>

namespace persival {

/// Mann-Whitney U outcome. `u` follows the min convention; `u_ab` and `u_ba`
/// are the directed statistics computed independently from each sample's rank
/// sum (so u_ab + u_ba == n1*n2 is a checkable property, not an identity of
/// the code). `exact` is set when the p-value came from full enumeration of
/// rank splits rather than the normal approximation.
struct UTestResult {
  double u = 0;
  double u_ab = 0;
  double u_ba = 0;
  double p = 1;
  bool significant = false;
  bool exact = false;
};

/// Rank-sum test with midranks for ties. Exact p by enumeration when
/// n1 + n2 <= 12 and there are no ties; otherwise normal approximation with
/// tie correction and a 0.5 continuity correction. A zero-variance rank
/// distribution (all values tied) yields p = 1. With two_sided false the
/// p-value covers only the tail the data leans toward. Throws
/// std::invalid_argument on an empty sample.
UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                           double alpha = 0.05, bool two_sided = true);

/// Runs the test over each (a, b) pair; errors propagate from the pair that
/// raised them.
std::vector<UTestResult> equivalence_verdicts(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs,
    double alpha = 0.05);

}  // namespace persival
