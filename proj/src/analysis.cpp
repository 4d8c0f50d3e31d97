#include "persival/analysis.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace persival {

namespace {

std::map<addr::GeometricAddress, uint64_t> count_by_address(const probe::Trace& trace) {
  std::map<addr::GeometricAddress, uint64_t> counts;
  for (const auto& rec : trace.records) ++counts[rec.address];
  return counts;
}

bool within_tolerance(uint64_t observed, uint64_t expected) {
  // +-10% relative, in integers: |observed - expected| * 10 <= expected.
  uint64_t diff = observed > expected ? observed - expected : expected - observed;
  return diff * 10 <= expected;
}

uint64_t distance(uint64_t a, uint64_t b) { return a > b ? a - b : b - a; }

}  // namespace

FingerprintResult fingerprint(const probe::Trace& trace,
                              const std::vector<std::pair<std::string, uint64_t>>& expected) {
  if (expected.empty()) throw std::invalid_argument("fingerprint with no expected locations");
  for (const auto& [loc, count] : expected)
    if (count == 0) throw std::invalid_argument("fingerprint expected count for '" + loc + "' is zero");
  for (size_t i = 0; i < expected.size(); ++i)
    for (size_t j = i + 1; j < expected.size(); ++j)
      if (expected[i].second == expected[j].second)
        throw std::invalid_argument("fingerprint expected counts must be pairwise distinct");

  const auto counts = count_by_address(trace);

  // Exact pass: a location's candidates are the unassigned addresses seen
  // exactly `count` times. All locations must resolve or the pass is void.
  FingerprintResult exact;
  bool exact_ok = true;
  {
    std::set<addr::GeometricAddress> used;
    for (const auto& [name, want] : expected) {
      std::vector<addr::GeometricAddress> candidates;
      for (const auto& [address, seen] : counts)
        if (seen == want && !used.contains(address)) candidates.push_back(address);
      if (candidates.empty()) {
        exact_ok = false;
        break;
      }
      if (candidates.size() > 1) exact.ambiguous = true;
      addr::GeometricAddress pick = *std::min_element(candidates.begin(), candidates.end());
      exact.assignment.emplace(name, pick);
      used.insert(pick);
    }
  }
  if (exact_ok) return exact;

  // Ratio fallback: accept counts within +-10% relative tolerance, closest
  // count first, smallest address on ties. Ordering by expected count keeps
  // the matching independent of declaration order.
  FingerprintResult fallback;
  fallback.used_fallback = true;
  auto by_count = expected;
  std::sort(by_count.begin(), by_count.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::set<addr::GeometricAddress> used;
  for (const auto& [name, want] : by_count) {
    std::vector<std::pair<uint64_t, addr::GeometricAddress>> candidates;
    for (const auto& [address, seen] : counts)
      if (within_tolerance(seen, want) && !used.contains(address))
        candidates.emplace_back(distance(seen, want), address);
    if (candidates.empty())
      throw FingerprintError("no address within tolerance of " + std::to_string(want) +
                             " writes for location '" + name + "'");
    if (candidates.size() > 1) fallback.ambiguous = true;
    auto pick = *std::min_element(candidates.begin(), candidates.end());
    fallback.assignment.emplace(name, pick.second);
    used.insert(pick.second);
  }
  return fallback;
}

probe::Trace filter_trace(const probe::Trace& trace,
                   const std::map<std::string, addr::GeometricAddress>& assignment) {
  std::set<addr::GeometricAddress> keep;
  for (const auto& [name, address] : assignment) keep.insert(address);
  probe::Trace out;
  out.config = trace.config;
  for (const auto& rec : trace.records)
    if (keep.contains(rec.address)) out.records.push_back(rec);
  return out;
}

namespace {

/// Walks observed location tokens against the expected per-iteration pattern.
/// On a mismatch the due token is reported as missing-or-swapped and the walk
/// re-synchronises at the start of the next iteration; the observed token is
/// kept only if it can open that iteration. Tokens past the last iteration
/// are extras.
class PatternWalk {
 public:
  PatternWalk(const litmus::PersistPattern& pattern, std::vector<AnomalyPosition>& out)
      : pattern_(pattern), out_(out) {}

  void feed(const std::string& loc) {
    if (iteration_ >= pattern_.iterations) {
      out_.push_back({pattern_.iterations - 1, AnomalyKind::Extra, loc});
      return;
    }
    if (loc == pattern_.tokens[position_]) {
      advance();
      return;
    }
    out_.push_back({iteration_, AnomalyKind::MissingOrSwapped, pattern_.tokens[position_]});
    ++iteration_;
    position_ = 0;
    if (iteration_ >= pattern_.iterations) {
      out_.push_back({pattern_.iterations - 1, AnomalyKind::Extra, loc});
      return;
    }
    if (loc == pattern_.tokens[0]) advance();
    // Otherwise the token is dropped: it belonged to the abandoned window.
  }

 private:
  void advance() {
    if (++position_ == pattern_.tokens.size()) {
      position_ = 0;
      ++iteration_;
    }
  }

  const litmus::PersistPattern& pattern_;
  std::vector<AnomalyPosition>& out_;
  uint64_t iteration_ = 0;
  size_t position_ = 0;
};

}  // namespace

ReorderingReport count_reorderings(const probe::Trace& trace,
                                   const std::map<std::string, addr::GeometricAddress>& assignment,
                                   const litmus::PersistPattern& pattern) {
  std::map<addr::GeometricAddress, std::string> names;
  for (const auto& [name, address] : assignment) names.emplace(address, name);

  ReorderingReport report;
  PatternWalk walk(pattern, report.anomalies);
  const std::string* previous = nullptr;
  for (const auto& rec : trace.records) {
    auto it = names.find(rec.address);
    if (it == names.end())
      throw std::invalid_argument("trace contains an address with no assigned location");
    const std::string& loc = it->second;
    if (previous && *previous == loc) ++report.reorderings;
    previous = &it->second;
    walk.feed(loc);
  }
  return report;
}

DeviationReport deviation(const std::map<std::string, uint64_t>& issued,
                          const std::map<std::string, uint64_t>& persisted) {
  if (issued.empty()) throw std::invalid_argument("deviation with no issued counts");
  for (const auto& [name, count] : issued)
    if (count == 0)
      throw std::invalid_argument("deviation with zero issued count for location '" + name + "'");
  for (const auto& [name, count] : persisted)
    if (!issued.contains(name))
      throw std::invalid_argument("location '" + name + "' persisted but never issued");

  DeviationReport report;
  report.unsigned_pct = Rational::whole(0);
  for (const auto& [name, sent] : issued) {
    auto it = persisted.find(name);
    int64_t seen = it == persisted.end() ? 0 : static_cast<int64_t>(it->second);
    Rational dev = Rational::of((seen - static_cast<int64_t>(sent)) * 100,
                                static_cast<int64_t>(sent));
    report.signed_pct.emplace(name, dev);
    report.unsigned_pct = report.unsigned_pct + dev.abs();
  }
  return report;
}

VerdictReport check_post_condition(const probe::Trace& trace,
                                   const std::map<std::string, addr::GeometricAddress>& assignment,
                                   const litmus::LitmusTest& test) {
  litmus::PersistPattern pattern = litmus::expected_pattern(test);
  VerdictReport report;
  if (trace.records.empty()) {
    report.no_data = true;
    return report;
  }
  ReorderingReport scan = count_reorderings(trace, assignment, pattern);
  report.verdicts.assign(pattern.iterations, true);
  for (const auto& anomaly : scan.anomalies) {
    uint64_t slot = std::min(anomaly.iteration, pattern.iterations - 1);
    report.verdicts[slot] = false;
  }
  return report;
}

namespace {

std::string histogram_key(const AnomalyPosition& position) {
  const char* kind =
      position.kind == AnomalyKind::MissingOrSwapped ? "missing_or_swapped" : "extra";
  return std::string(kind) + ":" + position.loc;
}

}  // namespace

Histogram anomaly_distribution(const std::vector<AnomalyPosition>& positions,
                               uint64_t iterations, size_t buckets) {
  if (buckets == 0) throw std::invalid_argument("anomaly distribution needs at least one bucket");
  if (iterations == 0) throw std::invalid_argument("anomaly distribution needs iterations > 0");
  Histogram histogram;
  for (const auto& position : positions) {
    auto& row = histogram[histogram_key(position)];
    if (row.empty()) row.assign(buckets, 0);
    uint64_t clamped = std::min(position.iteration, iterations - 1);
    size_t bucket = static_cast<size_t>(clamped * buckets / iterations);
    ++row[bucket];
  }
  return histogram;
}

}  // namespace persival
