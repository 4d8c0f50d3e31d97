#include "persival/orchestrator.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

namespace persival {

namespace {

constexpr uint64_t kSeedGolden = 0x9E3779B97F4A7C15ull;
constexpr int kFingerprintAttempts = 4;  // first try plus three retries

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FlowError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FlowError("cannot write '" + path.string() + "'");
  out << content;
}

std::string fmt_g(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%g", value);
  return buffer;
}

sim::ArchProfile resolve_profile(const std::string& name_or_path) {
  const auto& builtin = sim::default_profiles();
  if (auto it = builtin.find(name_or_path); it != builtin.end()) return it->second;
  std::error_code ec;
  if (std::filesystem::exists(name_or_path, ec)) return sim::parse_profile(read_file(name_or_path));
  throw FlowError("unknown profile '" + name_or_path + "': not a built-in and not a file");
}

std::vector<std::pair<std::string, uint64_t>> preamble_counts(const litmus::LitmusTest& test,
                                                              uint64_t base) {
  std::vector<std::pair<std::string, uint64_t>> counts;
  for (const auto& decl : test.locations)
    counts.emplace_back(decl.name, static_cast<uint64_t>(decl.ratio) * base);
  return counts;
}

std::map<std::string, uint64_t> persisted_counts(
    const probe::Trace& filtered, const std::map<std::string, addr::GeometricAddress>& assignment,
    const std::map<std::string, uint64_t>& issued) {
  std::map<addr::GeometricAddress, std::string> names;
  for (const auto& [name, address] : assignment) names.emplace(address, name);
  std::map<std::string, uint64_t> out;
  for (const auto& [name, count] : issued) out[name] = 0;
  for (const auto& rec : filtered.records) {
    const std::string& name = names.at(rec.address);
    if (out.contains(name)) ++out[name];
  }
  return out;
}

uint64_t count_truth_violations(const std::vector<sim::PersistEvent>& events) {
  uint64_t violations = 0;
  for (size_t i = 1; i < events.size(); ++i)
    if (events[i].loc == events[i - 1].loc) ++violations;
  return violations;
}

std::string sanitize_cell(std::string text) {
  for (char& c : text)
    if (c == ',')
      c = ';';
    else if (c == '\n' || c == '\r')
      c = ' ';
  return text;
}

std::string signed_fixed2(const Rational& value) {
  std::string body = fixed2(value);
  if (value.num > 0) return "+" + body;
  return body;
}

}  // namespace

bool RunReport::post_condition_held() const {
  if (verdicts.no_data) return false;
  return std::all_of(verdicts.verdicts.begin(), verdicts.verdicts.end(),
                     [](bool held) { return held; });
}

uint64_t RunReport::verdicts_false() const {
  return static_cast<uint64_t>(
      std::count(verdicts.verdicts.begin(), verdicts.verdicts.end(), false));
}

RunReport run_flow(const FlowConfig& cfg) {
  litmus::LitmusTest test = litmus::parse_litmus(read_file(cfg.test_path));
  return run_flow_on(cfg, test);
}

RunReport run_flow_on(const FlowConfig& cfg, const litmus::LitmusTest& test) {
  sim::ArchProfile profile = resolve_profile(cfg.profile);
  litmus::PersistPattern pattern = litmus::expected_pattern(test);
  if (cfg.depth < 2 * pattern.tokens.size())
    throw FlowError("capture depth " + std::to_string(cfg.depth) +
                    " cannot hold two iterations of a " +
                    std::to_string(pattern.tokens.size()) + "-write pattern");

  addr::MappingFunction mapping = addr::random_mapping(cfg.mapping_seed, cfg.memory_bits);
  sim::Machine machine(profile, mapping, cfg.seed);
  const auto counts = preamble_counts(test, cfg.preamble_base);

  RunReport report;
  report.profile_name = cfg.profile;
  report.profile = profile;
  report.test_path = cfg.test_path;
  report.iterations = test.iterations;
  report.mapping_seed = cfg.mapping_seed;
  report.run_seed = cfg.seed;
  report.depth = cfg.depth;
  report.preamble_base = cfg.preamble_base;
  report.histogram_buckets = cfg.histogram_buckets;
  report.mapping_description = mapping.serialize();

  // Fingerprint loop: each attempt runs the strict preamble on a fresh
  // allocation under an armed, unqualified probe.
  FingerprintResult fp;
  for (int attempt = 1;; ++attempt) {
    machine.allocate_all(test);
    probe::LiveCapture capture({probe::Trigger::FirstWrite, cfg.depth, std::nullopt});
    sim::RunOptions options;
    options.sink = [&capture](const sim::BusEvent& event) { capture.on_write(event); };
    options.collect_bus_events = false;
    machine.run_preamble(counts, options);
    report.preamble_trace = capture.take();
    report.attempts = attempt;
    bool retry = false;
    try {
      fp = fingerprint(report.preamble_trace, counts);
      retry = fp.ambiguous;
    } catch (const FingerprintError& error) {
      if (attempt == kFingerprintAttempts)
        throw FlowError("fingerprinting failed after " + std::to_string(attempt) +
                        " attempts: " + error.what());
      retry = true;
    }
    if (!retry) break;
    if (attempt == kFingerprintAttempts)
      throw FlowError("fingerprinting stayed ambiguous after " + std::to_string(attempt) +
                      " attempts");
  }
  report.assignment = fp.assignment;
  report.used_fallback = fp.used_fallback;
  report.ambiguous = fp.ambiguous;

  std::vector<addr::GeometricAddress> fingerprinted;
  for (const auto& [name, address] : fp.assignment) fingerprinted.push_back(address);
  report.mask = addr::compute_wildcard_mask(fingerprinted);
  for (const auto& address : fingerprinted)
    if (!report.mask.matches(address))
      throw FlowError("wildcard mask rejects a fingerprinted address");

  // Body phase under storage qualification.
  probe::LiveCapture body_capture({probe::Trigger::FirstWrite, cfg.depth, report.mask});
  sim::RunOptions body_options;
  body_options.sink = [&body_capture](const sim::BusEvent& event) {
    body_capture.on_write(event);
  };
  body_options.collect_bus_events = false;
  sim::PhaseRun body = machine.run_body(test, body_options);
  report.body_trace = body_capture.take();

  probe::Trace filtered = filter_trace(report.body_trace, fp.assignment);
  report.issued = body.issued;
  report.persisted = persisted_counts(filtered, fp.assignment, report.issued);
  report.reordering = count_reorderings(filtered, fp.assignment, pattern);
  report.dev = deviation(report.issued, report.persisted);
  report.verdicts = check_post_condition(filtered, fp.assignment, test);
  report.histogram =
      anomaly_distribution(report.reordering.anomalies, test.iterations, cfg.histogram_buckets);

  if (profile.kind != sim::ArchKind::ArmNopop) {
    report.audit.available = true;
    report.audit.violations = count_truth_violations(body.ground_truth);
  }

  if (!cfg.out_dir.empty()) write_report_dir(report, cfg.out_dir);
  return report;
}

RunReport analyze_offline(const std::string& log_csv, const std::string& assignment_csv,
                          const litmus::LitmusTest& test, size_t histogram_buckets) {
  RunReport report;
  report.body_trace = probe::parse_csv(read_file(log_csv));
  report.assignment = parse_assignment_csv(read_file(assignment_csv));
  report.iterations = test.iterations;
  report.histogram_buckets = histogram_buckets;
  report.attempts = 0;

  litmus::PersistPattern pattern = litmus::expected_pattern(test);
  for (const auto& thread : test.threads)
    for (const auto& instruction : thread)
      if (const auto* write = std::get_if<litmus::Write>(&instruction))
        report.issued[write->loc] += test.iterations;

  std::vector<addr::GeometricAddress> addresses;
  for (const auto& [name, address] : report.assignment) addresses.push_back(address);
  report.mask = addr::compute_wildcard_mask(addresses);

  probe::Trace filtered = filter_trace(report.body_trace, report.assignment);
  report.persisted = persisted_counts(filtered, report.assignment, report.issued);
  report.reordering = count_reorderings(filtered, report.assignment, pattern);
  report.dev = deviation(report.issued, report.persisted);
  report.verdicts = check_post_condition(filtered, report.assignment, test);
  report.histogram =
      anomaly_distribution(report.reordering.anomalies, test.iterations, histogram_buckets);
  return report;
}

namespace {

std::string arch_token(sim::ArchKind kind) {
  switch (kind) {
    case sim::ArchKind::X86Wpq: return "x86_wpq";
    case sim::ArchKind::ArmPop: return "arm_pop";
    case sim::ArchKind::ArmNopop: return "arm_nopop";
  }
  return "?";
}

}  // namespace

std::string render_report_kv(const RunReport& report) {
  std::ostringstream out;
  out << "test=" << report.test_path << "\n";
  out << "profile=" << report.profile_name << "\n";
  out << "arch=" << arch_token(report.profile.kind) << "\n";
  out << "reorder_window=" << report.profile.reorder_window << "\n";
  out << "coalesce_prob=" << fmt_g(report.profile.coalesce_prob) << "\n";
  out << "spurious_prob=" << fmt_g(report.profile.spurious_prob) << "\n";
  out << "noise_rate=" << fmt_g(report.profile.noise_rate) << "\n";
  out << "iterations=" << report.iterations << "\n";
  out << "mapping_seed=" << report.mapping_seed << "\n";
  out << "run_seed=" << report.run_seed << "\n";
  out << "depth=" << report.depth << "\n";
  out << "preamble_base=" << report.preamble_base << "\n";
  out << "attempts=" << report.attempts << "\n";
  out << "used_fallback=" << (report.used_fallback ? 1 : 0) << "\n";
  out << "mask=" << report.mask.to_string() << "\n";
  for (const auto& [name, address] : report.assignment)
    out << "assignment." << name << "=" << address.bank_group << ":" << address.bank << ":"
        << address.row << ":" << address.column << "\n";
  for (const auto& [name, count] : report.issued) out << "issued." << name << "=" << count << "\n";
  for (const auto& [name, count] : report.persisted)
    out << "persisted." << name << "=" << count << "\n";
  for (const auto& [name, dev] : report.dev.signed_pct)
    out << "signed_dev." << name << "=" << fixed2(dev) << "\n";
  out << "reorderings=" << report.reordering.reorderings << "\n";
  out << "deviation_pct=" << fixed2(report.dev.unsigned_pct) << "\n";
  out << "verdicts_total=" << report.verdicts.verdicts.size() << "\n";
  out << "verdicts_false=" << report.verdicts_false() << "\n";
  out << "no_data=" << (report.verdicts.no_data ? 1 : 0) << "\n";
  out << "post_condition_held=" << (report.post_condition_held() ? 1 : 0) << "\n";
  out << "ground_truth_available=" << (report.audit.available ? 1 : 0) << "\n";
  out << "ground_truth_violations=" << report.audit.violations << "\n";
  return out.str();
}

std::string render_report_text(const RunReport& report) {
  std::ostringstream out;
  out << "validation run\n";
  out << "  test: " << report.test_path << " (" << report.iterations << " iterations)\n";
  out << "  profile: " << report.profile_name << " (arch=" << arch_token(report.profile.kind)
      << " reorder_window=" << report.profile.reorder_window
      << " coalesce_prob=" << fmt_g(report.profile.coalesce_prob)
      << " spurious_prob=" << fmt_g(report.profile.spurious_prob)
      << " noise_rate=" << fmt_g(report.profile.noise_rate) << ")\n";
  out << "  seeds: mapping=" << report.mapping_seed << " run=" << report.run_seed
      << "  depth: " << report.depth << "  preamble base: " << report.preamble_base << "\n";
  out << "\n";
  if (report.attempts > 0) {
    out << "fingerprint: attempt " << report.attempts << ", "
        << (report.used_fallback ? "ratio fallback" : "exact counts") << "\n";
  } else {
    out << "fingerprint: taken from assignment file\n";
  }
  for (const auto& [name, address] : report.assignment)
    out << "  " << name << " -> bank_group=" << address.bank_group << " bank=" << address.bank
        << " row=" << address.row << " column=" << address.column << "\n";
  out << "  qualification mask: " << report.mask.to_string() << "\n";
  out << "\n";
  out << "metrics\n";
  out << "  issued:   ";
  for (const auto& [name, count] : report.issued) out << " " << name << "=" << count;
  out << "\n  persisted:";
  for (const auto& [name, count] : report.persisted) out << " " << name << "=" << count;
  out << "\n";
  out << "  reorderings: " << report.reordering.reorderings;
  if (report.iterations > 0)
    out << " ("
        << fixed2(Rational::of(static_cast<int64_t>(report.reordering.reorderings) * 100,
                               static_cast<int64_t>(report.iterations)))
        << "% of " << report.iterations << " iterations)";
  out << "\n";
  out << "  deviation: " << fixed2(report.dev.unsigned_pct) << "% unsigned\n";
  for (const auto& [name, dev] : report.dev.signed_pct)
    out << "    " << name << ": " << signed_fixed2(dev) << "%\n";
  if (report.verdicts.no_data) {
    out << "  post-condition: no data captured\n";
  } else if (report.post_condition_held()) {
    out << "  post-condition: held in all " << report.verdicts.verdicts.size()
        << " iterations\n";
  } else {
    out << "  post-condition: violated in " << report.verdicts_false() << " of "
        << report.verdicts.verdicts.size() << " iterations\n";
  }
  if (report.audit.available) {
    out << "  ground truth: " << report.audit.violations
        << " persist-order violations stamped by the simulator\n";
  } else {
    out << "  ground truth: not provided by this profile\n";
  }
  return out.str();
}

std::string render_histogram_csv(const Histogram& histogram, size_t buckets) {
  std::ostringstream out;
  out << "kind,location,bucket,count\n";
  for (const auto& [key, row] : histogram) {
    auto split = key.find(':');
    std::string kind = key.substr(0, split);
    std::string loc = key.substr(split + 1);
    for (size_t bucket = 0; bucket < buckets; ++bucket) {
      uint64_t count = bucket < row.size() ? row[bucket] : 0;
      out << kind << ',' << loc << ',' << bucket << ',' << count << "\n";
    }
  }
  return out.str();
}

std::string render_assignment_csv(const std::map<std::string, addr::GeometricAddress>& assignment) {
  std::ostringstream out;
  out << "location,bank_group,bank,row,column\n";
  for (const auto& [name, address] : assignment)
    out << name << ',' << address.bank_group << ',' << address.bank << ',' << address.row << ','
        << address.column << "\n";
  return out.str();
}

std::map<std::string, addr::GeometricAddress> parse_assignment_csv(std::string_view text) {
  std::map<std::string, addr::GeometricAddress> assignment;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "location,bank_group,bank,row,column")
        throw FlowError("assignment line 1: bad header");
      continue;
    }
    if (line.empty()) continue;
    std::array<std::string_view, 5> fields;
    size_t field = 0, pos = 0;
    while (field < 5) {
      size_t comma = line.find(',', pos);
      if (comma == std::string_view::npos) {
        fields[field++] = line.substr(pos);
        pos = line.size() + 1;
        break;
      }
      fields[field++] = line.substr(pos, comma - pos);
      pos = comma + 1;
    }
    if (field != 5 || pos <= line.size())
      throw FlowError("assignment line " + std::to_string(line_no) + ": expected 5 fields");
    auto number = [&](std::string_view s, uint32_t max, const char* what) -> uint32_t {
      if (s.empty())
        throw FlowError("assignment line " + std::to_string(line_no) + ": empty " +
                        std::string(what));
      uint64_t value = 0;
      for (char c : s) {
        if (c < '0' || c > '9')
          throw FlowError("assignment line " + std::to_string(line_no) + ": bad " +
                          std::string(what));
        value = value * 10 + static_cast<uint64_t>(c - '0');
        if (value > max)
          throw FlowError("assignment line " + std::to_string(line_no) + ": " +
                          std::string(what) + " out of range");
      }
      return static_cast<uint32_t>(value);
    };
    std::string name(fields[0]);
    if (name.empty())
      throw FlowError("assignment line " + std::to_string(line_no) + ": empty location name");
    if (assignment.contains(name))
      throw FlowError("assignment line " + std::to_string(line_no) + ": duplicate location '" +
                      name + "'");
    addr::GeometricAddress address{
        number(fields[1], 3, "bank_group"), number(fields[2], 3, "bank"),
        number(fields[3], (1u << 18) - 1, "row"), number(fields[4], (1u << 10) - 1, "column")};
    assignment.emplace(std::move(name), address);
  }
  if (assignment.empty()) throw FlowError("assignment file has no entries");
  return assignment;
}

void write_report_dir(const RunReport& report, const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FlowError("cannot create '" + out_dir + "': " + ec.message());
  write_file(dir / "preamble.csv", probe::export_csv(report.preamble_trace));
  write_file(dir / "body.csv", probe::export_csv(report.body_trace));
  write_file(dir / "assignment.txt", render_assignment_csv(report.assignment));
  if (!report.mapping_description.empty())
    write_file(dir / "mapping.txt", report.mapping_description);
  write_file(dir / "report.kv", render_report_kv(report));
  write_file(dir / "report.txt", render_report_text(report));
  write_file(dir / "histogram.csv", render_histogram_csv(report.histogram, report.histogram_buckets));
}

std::string_view sweep_name(Sweep sweep) {
  switch (sweep) {
    case Sweep::PersistCount: return "persist_count";
    case Sweep::SleepNs: return "sleep_ns";
    case Sweep::AllocBytes: return "alloc_bytes";
    case Sweep::PersistKind: return "persist_kind";
  }
  return "?";
}

namespace {

Sweep sweep_from(std::string_view token, size_t line) {
  if (token == "persist_count") return Sweep::PersistCount;
  if (token == "sleep_ns") return Sweep::SleepNs;
  if (token == "alloc_bytes") return Sweep::AllocBytes;
  if (token == "persist_kind") return Sweep::PersistKind;
  throw litmus::ParseError(line, "unknown sweep '" + std::string(token) + "'");
}

uint64_t parse_u64(std::string_view text, size_t line, const char* what) {
  if (text.empty()) throw litmus::ParseError(line, std::string("empty ") + what);
  uint64_t value = 0;
  for (char c : text) {
    if (c < '0' || c > '9')
      throw litmus::ParseError(line, std::string("bad ") + what + " '" + std::string(text) + "'");
    if (value > (UINT64_MAX - static_cast<uint64_t>(c - '0')) / 10)
      throw litmus::ParseError(line, std::string(what) + " out of range");
    value = value * 10 + static_cast<uint64_t>(c - '0');
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<uint64_t> parse_points(std::string_view text, size_t line) {
  if (auto dots = text.find(".."); dots != std::string_view::npos) {
    uint64_t lo = parse_u64(trim(text.substr(0, dots)), line, "range start");
    uint64_t hi = parse_u64(trim(text.substr(dots + 2)), line, "range end");
    if (lo > hi) throw litmus::ParseError(line, "descending point range");
    std::vector<uint64_t> points;
    for (uint64_t v = lo; v <= hi; ++v) points.push_back(v);
    return points;
  }
  std::vector<uint64_t> points;
  size_t start = 0;
  while (start <= text.size()) {
    size_t comma = text.find(',', start);
    std::string_view item = trim(
        text.substr(start, comma == std::string_view::npos ? text.size() - start : comma - start));
    points.push_back(parse_u64(item, line, "point"));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return points;
}

}  // namespace

CampaignSpec parse_campaign(std::string_view text) {
  CampaignSpec spec;
  bool saw_sweep = false, saw_points = false, saw_test = false;
  size_t line_no = 0;
  size_t start = 0;
  size_t points_line = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw litmus::ParseError(line_no, "expected key = value");
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (key == "sweep") {
      spec.sweep = sweep_from(value, line_no);
      saw_sweep = true;
    } else if (key == "points") {
      spec.points = parse_points(value, line_no);
      saw_points = true;
      points_line = line_no;
    } else if (key == "repetitions") {
      spec.repetitions = parse_u64(value, line_no, "repetitions");
      if (spec.repetitions == 0) throw litmus::ParseError(line_no, "repetitions must be >= 1");
    } else if (key == "test") {
      spec.base.test_path = std::string(value);
      saw_test = true;
    } else if (key == "profile") {
      spec.base.profile = std::string(value);
    } else if (key == "mapping_seed") {
      spec.base.mapping_seed = parse_u64(value, line_no, "mapping_seed");
    } else if (key == "seed") {
      spec.base.seed = parse_u64(value, line_no, "seed");
    } else if (key == "depth") {
      spec.base.depth = parse_u64(value, line_no, "depth");
    } else if (key == "preamble_base") {
      spec.base.preamble_base = parse_u64(value, line_no, "preamble_base");
      if (spec.base.preamble_base == 0)
        throw litmus::ParseError(line_no, "preamble_base must be >= 1");
    } else if (key == "memory_bits") {
      spec.base.memory_bits = static_cast<unsigned>(parse_u64(value, line_no, "memory_bits"));
    } else {
      throw litmus::ParseError(line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  if (!saw_sweep) throw litmus::ParseError(line_no, "missing 'sweep'");
  if (!saw_points) throw litmus::ParseError(line_no, "missing 'points'");
  if (!saw_test) throw litmus::ParseError(line_no, "missing 'test'");
  if (spec.points.empty()) throw litmus::ParseError(line_no, "empty sweep domain");
  if (spec.sweep == Sweep::PersistCount || spec.sweep == Sweep::PersistKind ||
      spec.sweep == Sweep::AllocBytes) {
    for (uint64_t p : spec.points)
      if (p == 0)
        throw litmus::ParseError(points_line, std::string(sweep_name(spec.sweep)) +
                                                  " points must be >= 1");
  }
  return spec;
}

uint64_t campaign_seed(uint64_t base, uint64_t point_index, uint64_t repetitions, uint64_t rep) {
  uint64_t cell = point_index * repetitions + rep;
  return base ^ ((cell + 1) * kSeedGolden);
}

litmus::LitmusTest with_persist_count(const litmus::LitmusTest& test, uint64_t count) {
  if (count == 0) throw std::invalid_argument("persist count must be >= 1");
  litmus::LitmusTest out = test;
  for (auto& thread : out.threads) {
    std::vector<litmus::Instruction> body;
    body.reserve(thread.size());
    for (const auto& instruction : thread) {
      if (const auto* persist = std::get_if<litmus::Persist>(&instruction)) {
        for (uint64_t i = 0; i < count; ++i) body.push_back(*persist);
      } else {
        body.push_back(instruction);
      }
    }
    thread = std::move(body);
  }
  return out;
}

litmus::LitmusTest with_sleep_after_barriers(const litmus::LitmusTest& test,
                                             uint64_t duration_ns) {
  if (duration_ns == 0) return test;
  litmus::LitmusTest out = test;
  for (auto& thread : out.threads) {
    std::vector<litmus::Instruction> body;
    body.reserve(thread.size());
    for (const auto& instruction : thread) {
      body.push_back(instruction);
      if (std::holds_alternative<litmus::Barrier>(instruction))
        body.push_back(litmus::Sleep{duration_ns});
    }
    thread = std::move(body);
  }
  return out;
}

litmus::LitmusTest with_alloc_size(const litmus::LitmusTest& test, uint64_t size_bytes) {
  if (size_bytes == 0) throw std::invalid_argument("allocation size must be >= 1");
  litmus::LitmusTest out = test;
  for (auto& decl : out.locations) decl.size_bytes = size_bytes;
  return out;
}

litmus::LitmusTest with_persist_kind(const litmus::LitmusTest& test, litmus::PersistKind kind) {
  litmus::LitmusTest out = test;
  for (auto& thread : out.threads)
    for (auto& instruction : thread)
      if (auto* persist = std::get_if<litmus::Persist>(&instruction)) persist->kind = kind;
  return out;
}

CampaignResult run_campaign(const CampaignSpec& spec) {
  if (spec.points.empty()) throw FlowError("campaign has an empty sweep domain");
  if (spec.repetitions == 0) throw FlowError("campaign needs repetitions >= 1");
  litmus::LitmusTest base_test = litmus::parse_litmus(read_file(spec.base.test_path));

  CampaignResult result;
  result.sweep = spec.sweep;
  for (const auto& decl : base_test.locations) result.locations.push_back(decl.name);

  for (size_t point = 0; point < spec.points.size(); ++point) {
    uint64_t value = spec.points[point];

    std::vector<std::pair<std::string, litmus::LitmusTest>> variants;
    switch (spec.sweep) {
      case Sweep::PersistCount:
        variants.emplace_back("", with_persist_count(base_test, value));
        break;
      case Sweep::SleepNs:
        variants.emplace_back("", with_sleep_after_barriers(base_test, value));
        break;
      case Sweep::AllocBytes:
        variants.emplace_back("", with_alloc_size(base_test, value));
        break;
      case Sweep::PersistKind: {
        litmus::LitmusTest counted = with_persist_count(base_test, value);
        variants.emplace_back("cvap", with_persist_kind(counted, litmus::PersistKind::Cvap));
        variants.emplace_back("cvac", with_persist_kind(counted, litmus::PersistKind::Cvac));
        break;
      }
    }

    for (uint64_t rep = 0; rep < spec.repetitions; ++rep) {
      uint64_t seed = campaign_seed(spec.base.seed, point, spec.repetitions, rep);
      for (const auto& [kind_label, variant] : variants) {
        CampaignRow row;
        row.value = value;
        row.kind = kind_label;
        row.rep = rep;
        row.seed = seed;
        FlowConfig cfg = spec.base;
        cfg.seed = seed;
        cfg.out_dir.clear();
        try {
          RunReport report = run_flow_on(cfg, variant);
          row.ok = true;
          row.reorderings = report.reordering.reorderings;
          row.deviation_pct = report.dev.unsigned_pct;
          row.signed_dev = report.dev.signed_pct;
        } catch (const std::exception& error) {
          row.error = sanitize_cell(error.what());
        }
        result.rows.push_back(std::move(row));
      }
    }
  }

  if (spec.sweep == Sweep::PersistKind) {
    for (uint64_t value : spec.points) {
      std::vector<double> cvap_reord, cvac_reord, cvap_dev, cvac_dev;
      for (const auto& row : result.rows) {
        if (!row.ok || row.value != value) continue;
        auto& reord = row.kind == "cvap" ? cvap_reord : cvac_reord;
        auto& dev = row.kind == "cvap" ? cvap_dev : cvac_dev;
        reord.push_back(static_cast<double>(row.reorderings));
        dev.push_back(row.deviation_pct.to_double());
      }
      if (cvap_reord.empty() || cvac_reord.empty()) continue;
      result.mannwhitney.push_back({value, "reorderings", cvap_reord.size(), cvac_reord.size(),
                                    mann_whitney_u(cvap_reord, cvac_reord)});
      result.mannwhitney.push_back({value, "deviation_pct", cvap_dev.size(), cvac_dev.size(),
                                    mann_whitney_u(cvap_dev, cvac_dev)});
    }
  }
  return result;
}

std::string render_campaign_csv(const CampaignResult& result) {
  std::ostringstream out;
  out << "sweep,value,kind,rep,seed,status,reorderings,deviation_pct";
  for (const auto& name : result.locations) out << ",signed_dev_" << name;
  out << ",error\n";
  for (const auto& row : result.rows) {
    out << sweep_name(result.sweep) << ',' << row.value << ',' << row.kind << ',' << row.rep
        << ',' << row.seed << ',';
    if (row.ok) {
      out << "ok," << row.reorderings << ',' << fixed2(row.deviation_pct);
      for (const auto& name : result.locations) {
        out << ',';
        if (auto it = row.signed_dev.find(name); it != row.signed_dev.end())
          out << fixed2(it->second);
      }
      out << ",\n";
    } else {
      out << "error,,";
      for (size_t i = 0; i < result.locations.size(); ++i) out << ',';
      out << ',' << row.error << "\n";
    }
  }
  return out.str();
}

std::string render_campaign_summary(const CampaignResult& result) {
  std::ostringstream out;
  size_t failed = 0;
  for (const auto& row : result.rows)
    if (!row.ok) ++failed;
  out << "campaign sweep=" << sweep_name(result.sweep) << " rows=" << result.rows.size()
      << " failed=" << failed << "\n";

  // Point means in first-appearance order of (value, kind).
  std::vector<std::pair<uint64_t, std::string>> order;
  std::map<std::pair<uint64_t, std::string>, std::pair<uint64_t, std::pair<double, double>>> agg;
  for (const auto& row : result.rows) {
    if (!row.ok) continue;
    auto key = std::make_pair(row.value, row.kind);
    if (!agg.contains(key)) order.push_back(key);
    auto& slot = agg[key];
    slot.first += 1;
    slot.second.first += static_cast<double>(row.reorderings);
    slot.second.second += row.deviation_pct.to_double();
  }
  for (const auto& key : order) {
    const auto& slot = agg.at(key);
    double n = static_cast<double>(slot.first);
    char line[160];
    std::snprintf(line, sizeof line,
                  "value=%llu kind=%s runs=%llu mean_reorderings=%.4f mean_deviation_pct=%.4f\n",
                  static_cast<unsigned long long>(key.first),
                  key.second.empty() ? "-" : key.second.c_str(),
                  static_cast<unsigned long long>(slot.first), slot.second.first / n,
                  slot.second.second / n);
    out << line;
  }
  return out.str();
}

std::string render_mannwhitney_csv(const CampaignResult& result) {
  std::ostringstream out;
  out << "value,metric,n_cvap,n_cvac,u,u_cvap,u_cvac,p,significant,exact\n";
  for (const auto& row : result.mannwhitney) {
    out << row.value << ',' << row.metric << ',' << row.n_a << ',' << row.n_b << ','
        << fmt_g(row.result.u) << ',' << fmt_g(row.result.u_ab) << ',' << fmt_g(row.result.u_ba)
        << ',' << fmt_g(row.result.p) << ',' << (row.result.significant ? 1 : 0) << ','
        << (row.result.exact ? 1 : 0) << "\n";
  }
  return out.str();
}

void write_campaign_dir(const CampaignResult& result, const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FlowError("cannot create '" + out_dir + "': " + ec.message());
  write_file(dir / "campaign.csv", render_campaign_csv(result));
  write_file(dir / "summary.txt", render_campaign_summary(result));
  if (result.sweep == Sweep::PersistKind)
    write_file(dir / "mannwhitney.csv", render_mannwhitney_csv(result));
}

}  // namespace persival
