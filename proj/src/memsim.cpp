#include "persival/memsim.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace persival::sim {

namespace {

// Persist-buffer service model (docs/machine-model.md). Most entries are
// serviced at the first opportunity; a small fraction stall and are drained
// with a fixed per-cycle probability, which is what lets later writes
// overtake them within the reorder window.
constexpr double kSlowEntryFraction = 0.045;
constexpr double kSlowServiceProb = 0.30;

constexpr uint64_t kUnalignedOffsetBytes = 8;

const char* kind_token(ArchKind kind) {
  switch (kind) {
    case ArchKind::X86Wpq: return "x86_wpq";
    case ArchKind::ArmPop: return "arm_pop";
    case ArchKind::ArmNopop: return "arm_nopop";
  }
  return "?";
}

bool is_arm(ArchKind kind) { return kind != ArchKind::X86Wpq; }

double parse_double_field(std::string_view value, const std::string& key) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw std::invalid_argument("profile: malformed number for '" + key + "'");
  return out;
}

std::string format_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", p);
  return buf;
}

}  // namespace

void ArchProfile::validate() const {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument(std::string("profile: ") + name + " must be within [0, 1]");
  };
  check(coalesce_prob, "coalesce_prob");
  check(spurious_prob, "spurious_prob");
  check(noise_rate, "noise_rate");
}

ArchProfile parse_profile(std::string_view text) {
  ArchProfile profile;
  bool kind_seen = false;
  size_t lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, (eol == std::string_view::npos ? text.size() : eol) - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++lineno;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("profile line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
      return s;
    };
    std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (key == "kind") {
      if (value == "x86_wpq") profile.kind = ArchKind::X86Wpq;
      else if (value == "arm_pop") profile.kind = ArchKind::ArmPop;
      else if (value == "arm_nopop") profile.kind = ArchKind::ArmNopop;
      else throw std::invalid_argument("profile: unknown kind '" + std::string(value) + "'");
      kind_seen = true;
    } else if (key == "reorder_window") {
      uint32_t w = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), w);
      if (ec != std::errc{} || ptr != value.data() + value.size())
        throw std::invalid_argument("profile: malformed number for 'reorder_window'");
      profile.reorder_window = w;
    } else if (key == "coalesce_prob") {
      profile.coalesce_prob = parse_double_field(value, key);
    } else if (key == "spurious_prob") {
      profile.spurious_prob = parse_double_field(value, key);
    } else if (key == "noise_rate") {
      profile.noise_rate = parse_double_field(value, key);
    } else {
      throw std::invalid_argument("profile: unknown key '" + key + "'");
    }
  }
  if (!kind_seen) throw std::invalid_argument("profile: missing 'kind'");
  profile.validate();
  return profile;
}

std::string render_profile(const ArchProfile& profile) {
  std::ostringstream out;
  out << "kind=" << kind_token(profile.kind) << "\n"
      << "reorder_window=" << profile.reorder_window << "\n"
      << "coalesce_prob=" << format_prob(profile.coalesce_prob) << "\n"
      << "spurious_prob=" << format_prob(profile.spurious_prob) << "\n"
      << "noise_rate=" << format_prob(profile.noise_rate) << "\n";
  return out.str();
}

const std::map<std::string, ArchProfile>& default_profiles() {
  static const std::map<std::string, ArchProfile> profiles = {
      {"arm-pop", {ArchKind::ArmPop, 0, 0.0, 0.0, 0.0}},
      {"arm-nopop", {ArchKind::ArmNopop, 8, 0.2, 0.45, 0.01}},
      {"x86-wpq", {ArchKind::X86Wpq, 8, 0.2, 0.013, 0.01}},
  };
  return profiles;
}

ArchProfile lookup_profile(const std::string& name) {
  const auto& profiles = default_profiles();
  auto it = profiles.find(name);
  if (it == profiles.end()) throw std::invalid_argument("unknown profile '" + name + "'");
  return it->second;
}

Machine::Machine(ArchProfile profile, addr::MappingFunction mapping, uint64_t seed)
    : profile_(profile), mapping_(std::move(mapping)), rng_(seed) {
  profile_.validate();
}

addr::PhysicalAddress Machine::allocate(const litmus::LocationDecl& decl) {
  if (decl.size_bytes == 0) throw std::invalid_argument("cannot allocate a zero-byte location");
  uint64_t base = alloc_cursor_;
  if (decl.aligned) base = (base + addr::kCachelineBytes - 1) & ~(addr::kCachelineBytes - 1);
  else base += kUnalignedOffsetBytes;
  uint64_t end = base + decl.size_bytes;
  uint64_t reserved_end = (end + addr::kCachelineBytes - 1) & ~(addr::kCachelineBytes - 1);
  if (reserved_end > mapping_.memory_size())
    throw std::runtime_error("allocation of '" + decl.name + "' exceeds the simulated memory range");

  for (uint64_t line = alloc_cursor_ / addr::kCachelineBytes; line < reserved_end / addr::kCachelineBytes; ++line)
    reserved_lines_.insert(line);

  addr::PhysicalAddress pa{base};
  alloc_map_[decl.name] = pa;
  alloc_cursor_ = reserved_end;
  return pa;
}

void Machine::allocate_all(const litmus::LitmusTest& test) {
  for (const auto& decl : test.locations) allocate(decl);
}

uint64_t Machine::line_of(const std::string& loc) const {
  auto it = alloc_map_.find(loc);
  if (it == alloc_map_.end()) throw std::logic_error("location '" + loc + "' is not allocated");
  return it->second.value / addr::kCachelineBytes;
}

void Machine::emit_bus(uint64_t line) {
  BusEvent ev{bus_seq_++, mapping_.map_to_geometric({line * addr::kCachelineBytes})};
  if (options_ && options_->sink) options_->sink(ev);
  if (phase_ && (!options_ || options_->collect_bus_events)) phase_->bus_events.push_back(ev);
}

void Machine::record_truth(const std::string& loc) {
  if (profile_.kind == ArchKind::ArmNopop) return;  // no point of persistence
  if (phase_) phase_->ground_truth.push_back({truth_seq_++, loc});
}

void Machine::enqueue(uint64_t line, const std::string& loc) {
  queue_.push_back({line, loc, rng_.chance(kSlowEntryFraction)});
  ++pending_[line];
  if (profile_.kind == ArchKind::X86Wpq) record_truth(loc);  // WPQ entry is persistence
}

void Machine::drain_at(size_t idx) {
  Entry entry = queue_[idx];
  bool pressured = queue_.size() >= 2;
  queue_.erase(queue_.begin() + static_cast<ptrdiff_t>(idx));
  if (auto it = pending_.find(entry.line); it != pending_.end() && --it->second == 0) pending_.erase(it);
  emit_bus(entry.line);
  if (profile_.kind == ArchKind::ArmPop) record_truth(entry.loc);  // reaching memory is persistence
  if (pressured && rng_.chance(profile_.spurious_prob))
    emit_bus(entry.line);  // duplicate writeback of the same cacheline
}

void Machine::drain_pass() {
  if (queue_.empty()) return;
  size_t limit = std::min<size_t>(queue_.size(), static_cast<size_t>(profile_.reorder_window) + 1);
  for (size_t idx = 0; idx < limit; ++idx) {
    // Oldest serviceable entry drains; a stalled entry ahead of it is what
    // lets a younger write reach the bus first.
    if (!queue_[idx].slow || rng_.chance(kSlowServiceProb)) {
      drain_at(idx);
      return;
    }
  }
}

void Machine::drain_all() {
  while (!queue_.empty()) drain_at(0);
}

void Machine::noise_tick() {
  if (profile_.noise_rate <= 0.0 || !rng_.chance(profile_.noise_rate)) return;
  uint64_t total_lines = mapping_.memory_size() / addr::kCachelineBytes;
  uint64_t line = 0;
  do {
    line = rng_.below(total_lines);
  } while (reserved_lines_.count(line) != 0);  // background traffic never touches test blocks
  emit_bus(line);
}

void Machine::step_cycle() {
  ++cycle_;
  drain_pass();
  noise_tick();
}

void Machine::advance_cycles(uint64_t cycles) {
  // Queue is empty whenever this is used (suspension drains it first), so
  // only background traffic needs simulating; skip ahead geometrically.
  if (profile_.noise_rate <= 0.0) {
    cycle_ += cycles;
    return;
  }
  if (profile_.noise_rate >= 1.0) {
    for (uint64_t i = 0; i < cycles; ++i) {
      ++cycle_;
      noise_tick();
    }
    return;
  }
  double log_q = std::log1p(-profile_.noise_rate);
  uint64_t remaining = cycles;
  while (remaining > 0) {
    double gap = std::floor(std::log1p(-rng_.next_unit()) / log_q);
    if (gap >= static_cast<double>(remaining)) {
      cycle_ += remaining;
      break;
    }
    uint64_t step = static_cast<uint64_t>(gap) + 1;
    cycle_ += step;
    remaining -= step;
    uint64_t total_lines = mapping_.memory_size() / addr::kCachelineBytes;
    uint64_t line = 0;
    do {
      line = rng_.below(total_lines);
    } while (reserved_lines_.count(line) != 0);
    emit_bus(line);
  }
}

PhaseRun Machine::run_preamble(const std::vector<std::pair<std::string, uint64_t>>& counts,
                               const RunOptions& options) {
  PhaseRun phase;
  phase_ = &phase;
  options_ = &options;
  for (const auto& [loc, count] : counts) {
    if (count == 0) throw std::invalid_argument("preamble count for '" + loc + "' must be positive");
    uint64_t line = line_of(loc);
    for (uint64_t i = 0; i < count; ++i) {
      ++phase.issued[loc];
      // Write plus forced synchronous clean: straight to the bus, no buffering.
      emit_bus(line);
      if (profile_.kind != ArchKind::ArmNopop) record_truth(loc);
      step_cycle();
      step_cycle();
    }
  }
  phase_ = nullptr;
  options_ = nullptr;
  return phase;
}

PhaseRun Machine::run_body(const litmus::LitmusTest& test, const RunOptions& options) {
  if (test.threads.size() != 1)
    throw std::invalid_argument("only single-threaded tests can be executed");
  for (const auto& decl : test.locations)
    if (alloc_map_.find(decl.name) == alloc_map_.end())
      throw std::logic_error("location '" + decl.name + "' is not allocated");

  PhaseRun phase;
  phase_ = &phase;
  options_ = &options;

  const bool arm_profile = is_arm(profile_.kind);
  for (uint64_t iter = 0; iter < test.iterations; ++iter) {
    for (const auto& instr : test.threads[0]) {
      if (const auto* w = std::get_if<litmus::Write>(&instr)) {
        ++phase.issued[w->loc];
        uint64_t line = line_of(w->loc);
        // The value (fixed or the iteration counter) never reaches the bus:
        // the probe sees addresses only.
        if (pending_.count(line) != 0 && rng_.chance(profile_.coalesce_prob)) {
          // Merged into the still-buffered entry: one bus write for both.
          // The merged data sits in the WPQ from this moment, so on x86 it
          // is already persistent.
          if (profile_.kind == ArchKind::X86Wpq) record_truth(w->loc);
        } else {
          dirty_.insert(line);
        }
        step_cycle();
      } else if (const auto* p = std::get_if<litmus::Persist>(&instr)) {
        if ((p->kind == litmus::PersistKind::Clflush) == arm_profile)
          throw std::invalid_argument(std::string("persist kind not valid under profile kind ") +
                                      kind_token(profile_.kind));
        uint64_t line = line_of(p->loc);
        // Under ArmNopop, Cvap and Cvac deliberately take this same path:
        // without a point of persistence the two clean variants are one
        // operation.
        if (dirty_.erase(line) != 0) enqueue(line, p->loc);
        step_cycle();
      } else if (const auto* b = std::get_if<litmus::Barrier>(&instr)) {
        if ((b->kind == litmus::BarrierKind::Sfence) == arm_profile)
          throw std::invalid_argument(std::string("barrier kind not valid under profile kind ") +
                                      kind_token(profile_.kind));
        switch (profile_.kind) {
          case ArchKind::ArmPop:
            drain_all();  // dsb sy completes only once cleans have reached memory
            break;
          case ArchKind::ArmNopop:
            break;  // dsb sy only waits for buffer acceptance, already done
          case ArchKind::X86Wpq:
            break;  // sfence orders against WPQ entry, already done at clflush
        }
        step_cycle();
      } else if (const auto* s = std::get_if<litmus::Sleep>(&instr)) {
        if (s->duration_ns > 0) {
          drain_all();  // any suspension lets in-flight writes reach memory
          advance_cycles(s->duration_ns);
        } else {
          step_cycle();
        }
      }
    }
  }
  drain_all();  // final writeback of whatever is still in flight
  phase_ = nullptr;
  options_ = nullptr;
  return phase;
}

SimRun run_program(const ArchProfile& profile, const addr::MappingFunction& mapping,
                   const litmus::LitmusTest& test,
                   const std::vector<std::pair<std::string, uint64_t>>& preamble_counts,
                   uint64_t seed) {
  Machine machine(profile, mapping, seed);
  machine.allocate_all(test);
  PhaseRun pre = machine.run_preamble(preamble_counts);
  PhaseRun body = machine.run_body(test);

  SimRun run;
  run.body_begin_event = pre.bus_events.size();
  run.body_begin_truth = pre.ground_truth.size();
  run.bus_events = std::move(pre.bus_events);
  run.bus_events.insert(run.bus_events.end(), body.bus_events.begin(), body.bus_events.end());
  run.ground_truth = std::move(pre.ground_truth);
  run.ground_truth.insert(run.ground_truth.end(), body.ground_truth.begin(), body.ground_truth.end());
  run.alloc_map = machine.allocations();
  run.issued_counts = pre.issued;
  for (const auto& [loc, n] : body.issued) run.issued_counts[loc] += n;
  run.body_issued_counts = std::move(body.issued);
  return run;
}

}  // namespace persival::sim
