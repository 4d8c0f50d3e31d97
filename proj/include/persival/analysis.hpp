#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "persival/buslogger.hpp"
#include "persival/litmus.hpp"
#include "persival/rational.hpp"

namespace persival {

/// Raised when a captured preamble cannot be matched to the requested
/// per-location write counts. Callers normally respond by re-running the
/// preamble with a fresh allocation.
class FingerprintError : public std::runtime_error {
 public:
  explicit FingerprintError(const std::string& what) : std::runtime_error(what) {}
};

/// Outcome of matching preamble traffic against the declared ratios.
/// `ambiguous` is set when some count matched more than one candidate
/// address and an arbitrary (but deterministic) pick was made.
struct FingerprintResult {
  std::map<std::string, addr::GeometricAddress> assignment;
  bool ambiguous = false;
  bool used_fallback = false;
};

/// Matches per-address event counts in `trace` against `expected` (location
/// name, write count) pairs. Exact counts are tried first; if any location
/// has no exact match, a +-10% relative tolerance pass is tried for all of
/// them. Throws FingerprintError when no consistent assignment exists.
FingerprintResult fingerprint(const probe::Trace& trace,
                              const std::vector<std::pair<std::string, uint64_t>>& expected);

/// Keeps only records whose address is one of the assigned lines.
probe::Trace filter_trace(const probe::Trace& trace,
                          const std::map<std::string, addr::GeometricAddress>& assignment);

enum class AnomalyKind { MissingOrSwapped, Extra };

struct AnomalyPosition {
  uint64_t iteration = 0;
  AnomalyKind kind = AnomalyKind::MissingOrSwapped;
  std::string loc;

  bool operator==(const AnomalyPosition&) const = default;
};

/// Reordering count plus the classified deviations from the expected
/// per-iteration pattern.
struct ReorderingReport {
  uint64_t reorderings = 0;
  std::vector<AnomalyPosition> anomalies;
};

/// Scans a filtered trace against the expected pattern. A reordering is an
/// adjacent pair of records for the same location; classification walks the
/// pattern and re-synchronises at the next iteration boundary after each
/// mismatch. Throws std::invalid_argument if the trace contains an address
/// outside `assignment`.
ReorderingReport count_reorderings(const probe::Trace& trace,
                                   const std::map<std::string, addr::GeometricAddress>& assignment,
                                   const litmus::PersistPattern& pattern);

/// Per-location and aggregate deviation between issued and observed counts,
/// in percent, kept exact.
struct DeviationReport {
  Rational unsigned_pct;                       // sum over locations of |P - I| / I * 100
  std::map<std::string, Rational> signed_pct;  // (P - I) / I * 100 per location
};

/// `issued` maps location -> write count sent into the memory system,
/// `persisted` maps location -> count observed on the bus. Locations missing
/// from `persisted` count as zero observed. Throws std::invalid_argument when
/// `issued` is empty, when any issued count is zero, or when `persisted`
/// names a location absent from `issued`.
DeviationReport deviation(const std::map<std::string, uint64_t>& issued,
                          const std::map<std::string, uint64_t>& persisted);

/// One verdict per iteration, true when the iteration's window conformed to
/// the expected pattern.
struct VerdictReport {
  std::vector<bool> verdicts;
  bool no_data = false;  // empty trace: nothing to falsify and nothing held
};

VerdictReport check_post_condition(const probe::Trace& trace,
                                   const std::map<std::string, addr::GeometricAddress>& assignment,
                                   const litmus::LitmusTest& test);

/// Bucketed counts of anomaly positions across the iteration space, keyed
/// "missing_or_swapped:<loc>" / "extra:<loc>".
using Histogram = std::map<std::string, std::vector<uint64_t>>;

Histogram anomaly_distribution(const std::vector<AnomalyPosition>& positions,
                               uint64_t iterations, size_t buckets);

}  // namespace persival
