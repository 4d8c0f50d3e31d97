#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "persival/analysis.hpp"
#include "persival/buslogger.hpp"
#include "persival/litmus.hpp"
#include "persival/memsim.hpp"
#include "persival/stats.hpp"

namespace persival {

/// Inputs for one validation flow. `profile` is a built-in name or a path to
/// a profile file. An empty `out_dir` runs everything in memory without
/// writing report files (campaigns use this).
struct FlowConfig {
  std::string test_path;
  std::string profile = "arm-nopop";
  uint64_t mapping_seed = 1;
  uint64_t seed = 1;
  size_t depth = probe::kDefaultDepth;
  uint64_t preamble_base = 100;
  unsigned memory_bits = 30;
  size_t histogram_buckets = 10;
  std::string out_dir;
};

/// Infrastructure failure: unusable configuration, fingerprinting exhausted
/// its retries, unreadable inputs. Distinct from a litmus-test violation,
/// which is a result, not an error.
class FlowError : public std::runtime_error {
 public:
  explicit FlowError(const std::string& what) : std::runtime_error(what) {}
};

/// Persist-order audit from the simulator's ground truth, for profiles that
/// stamp one (a real probe has no such signal). `violations` counts adjacent
/// same-location pairs in true persist order over the body phase.
struct GroundTruthAudit {
  bool available = false;
  uint64_t violations = 0;
};

struct RunReport {
  std::string profile_name;
  sim::ArchProfile profile;
  std::string test_path;
  uint64_t iterations = 0;
  uint64_t mapping_seed = 0;
  uint64_t run_seed = 0;
  size_t depth = 0;
  uint64_t preamble_base = 0;
  size_t histogram_buckets = 10;
  int attempts = 0;  // fingerprint attempts used; 0 for offline analysis
  bool used_fallback = false;
  bool ambiguous = false;
  std::map<std::string, addr::GeometricAddress> assignment;
  addr::WildcardMask mask;
  std::string mapping_description;  // serialized mapping, empty for offline analysis
  std::map<std::string, uint64_t> issued;
  std::map<std::string, uint64_t> persisted;
  ReorderingReport reordering;
  DeviationReport dev;
  VerdictReport verdicts;
  Histogram histogram;
  GroundTruthAudit audit;
  probe::Trace preamble_trace;
  probe::Trace body_trace;  // as captured under qualification, before filtering

  bool post_condition_held() const;
  uint64_t verdicts_false() const;
};

/// The full flow: parse, allocate, strict preamble under an armed probe,
/// fingerprint (fresh allocation on ambiguity, up to 3 retries), wildcard
/// qualification, body capture, filter, metrics, verdicts, ground-truth
/// audit. Writes the report directory when cfg.out_dir is non-empty.
RunReport run_flow(const FlowConfig& cfg);

/// Same flow on an already-parsed (possibly transformed) test.
RunReport run_flow_on(const FlowConfig& cfg, const litmus::LitmusTest& test);

/// Offline pipeline over a previously captured trace CSV: filter against the
/// assignment, then metrics and verdicts. Issued counts are reconstructed
/// from the test (iterations x writes per location).
RunReport analyze_offline(const std::string& log_csv, const std::string& assignment_csv,
                          const litmus::LitmusTest& test, size_t histogram_buckets = 10);

// Report renderings; all output files are built from these so tests can pin
// bytes without touching the filesystem.
std::string render_report_kv(const RunReport& report);
std::string render_report_text(const RunReport& report);
std::string render_histogram_csv(const Histogram& histogram, size_t buckets);
std::string render_assignment_csv(const std::map<std::string, addr::GeometricAddress>& assignment);
std::map<std::string, addr::GeometricAddress> parse_assignment_csv(std::string_view text);

void write_report_dir(const RunReport& report, const std::string& out_dir);

// Campaign sweeps. For PersistKind the points are persist counts and each
// (point, repetition) runs once per kind with the same derived seed.
enum class Sweep { PersistCount, SleepNs, AllocBytes, PersistKind };

std::string_view sweep_name(Sweep sweep);

struct CampaignSpec {
  Sweep sweep = Sweep::PersistCount;
  std::vector<uint64_t> points;
  uint64_t repetitions = 1;
  FlowConfig base;
};

/// key = value format; `points` accepts a comma list or an inclusive
/// `lo..hi` range. Throws ParseError with line numbers.
CampaignSpec parse_campaign(std::string_view text);

struct CampaignRow {
  uint64_t value = 0;
  std::string kind;  // empty unless sweeping persist kind
  uint64_t rep = 0;
  uint64_t seed = 0;
  bool ok = false;
  uint64_t reorderings = 0;
  Rational deviation_pct;
  std::map<std::string, Rational> signed_dev;
  std::string error;
};

struct MannWhitneyRow {
  uint64_t value = 0;
  std::string metric;
  size_t n_a = 0;  // cvap population size
  size_t n_b = 0;  // cvac population size
  UTestResult result;
};

struct CampaignResult {
  Sweep sweep = Sweep::PersistCount;
  std::vector<std::string> locations;  // column order for signed deviations
  std::vector<CampaignRow> rows;
  std::vector<MannWhitneyRow> mannwhitney;  // persist-kind sweeps only
};

/// Point seeds: base ^ ((index + 1) * golden), index = point * repetitions +
/// rep, so every (point, rep) cell gets a distinct, documented seed stream.
uint64_t campaign_seed(uint64_t base, uint64_t point_index, uint64_t repetitions, uint64_t rep);

/// Runs every (point, repetition) cell; a failed cell becomes an error row
/// and the sweep continues.
CampaignResult run_campaign(const CampaignSpec& spec);

std::string render_campaign_csv(const CampaignResult& result);
std::string render_campaign_summary(const CampaignResult& result);
std::string render_mannwhitney_csv(const CampaignResult& result);

/// Writes campaign.csv, summary.txt and (for persist-kind sweeps)
/// mannwhitney.csv under out_dir.
void write_campaign_dir(const CampaignResult& result, const std::string& out_dir);

// Sweep transforms over a parsed test.
litmus::LitmusTest with_persist_count(const litmus::LitmusTest& test, uint64_t count);
litmus::LitmusTest with_sleep_after_barriers(const litmus::LitmusTest& test, uint64_t duration_ns);
litmus::LitmusTest with_alloc_size(const litmus::LitmusTest& test, uint64_t size_bytes);
litmus::LitmusTest with_persist_kind(const litmus::LitmusTest& test, litmus::PersistKind kind);

}  // namespace persival
