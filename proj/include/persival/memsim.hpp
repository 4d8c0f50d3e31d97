#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "persival/addressing.hpp"
#include "persival/litmus.hpp"
#include "persival/rng.hpp"

namespace persival::sim {

enum class ArchKind {
  X86Wpq,    // clflush/sfence; persistence at write-pending-queue entry
  ArmPop,    // dc cvap reaches the point of persistence, dsb sy drains to the bus
  ArmNopop,  // no point of persistence: dc cvap degrades to dc cvac
};

struct ArchProfile {
  ArchKind kind = ArchKind::ArmPop;
  uint32_t reorder_window = 0;  // how many buffer entries a drain may bypass
  double coalesce_prob = 0.0;   // write to a still-buffered cacheline merges
  double spurious_prob = 0.0;   // drain under queue pressure emits the line twice
  double noise_rate = 0.0;      // per-cycle chance of unrelated bus traffic

  void validate() const;  // throws std::invalid_argument
  bool operator==(const ArchProfile&) const = default;
};

/// Parses the key=value profile format (see docs/file-formats.md).
ArchProfile parse_profile(std::string_view text);
std::string render_profile(const ArchProfile& profile);

/// Built-in machine models: "x86-wpq", "arm-pop", "arm-nopop".
const std::map<std::string, ArchProfile>& default_profiles();
ArchProfile lookup_profile(const std::string& name);  // throws on unknown name

struct BusEvent {
  uint64_t seq = 0;  // strictly increasing bus order
  addr::GeometricAddress address;
  bool operator==(const BusEvent&) const = default;
};

/// One program write entering the persistence domain.
struct PersistEvent {
  uint64_t seq = 0;  // strictly increasing persist order
  std::string loc;
  bool operator==(const PersistEvent&) const = default;
};

using BusSink = std::function<void(const BusEvent&)>;

struct RunOptions {
  BusSink sink;                    // observes every bus write as it happens
  bool collect_bus_events = true;  // keep the events in the returned PhaseRun
};

struct PhaseRun {
  std::vector<BusEvent> bus_events;
  std::vector<PersistEvent> ground_truth;
  std::map<std::string, uint64_t> issued;  // program writes per location, this phase
};

/// Full program execution: preamble phase followed by body phase.
struct SimRun {
  std::vector<BusEvent> bus_events;
  std::vector<PersistEvent> ground_truth;
  std::map<std::string, addr::PhysicalAddress> alloc_map;
  std::map<std::string, uint64_t> issued_counts;       // both phases
  std::map<std::string, uint64_t> body_issued_counts;  // body phase only
  size_t body_begin_event = 0;  // index into bus_events where the body starts
  size_t body_begin_truth = 0;  // index into ground_truth where the body starts
};

/// Deterministic machine under test: cache dirty bits, a persist buffer that
/// drains to the memory bus out of order within a window, and background
/// traffic. One simulated cycle per executed instruction; the full service
/// model is specified in docs/machine-model.md. Identical construction
/// arguments and call sequence reproduce identical runs bit for bit.
class Machine {
 public:
  Machine(ArchProfile profile, addr::MappingFunction mapping, uint64_t seed);

  /// Reserves a fresh block: whole cachelines, base cacheline-aligned when
  /// decl.aligned (8-byte offset into the line otherwise). Re-allocating a
  /// name abandons the old block; abandoned blocks are never reused and
  /// background noise avoids every block ever allocated.
  addr::PhysicalAddress allocate(const litmus::LocationDecl& decl);
  void allocate_all(const litmus::LitmusTest& test);
  const std::map<std::string, addr::PhysicalAddress>& allocations() const { return alloc_map_; }

  /// Strictly flushed location-by-location writes: each write is forced to
  /// the bus synchronously, so absent noise the per-location bus counts equal
  /// `counts` exactly. Locations are written in the order given.
  PhaseRun run_preamble(const std::vector<std::pair<std::string, uint64_t>>& counts,
                        const RunOptions& options = {});

  /// Executes the (single-threaded) test body for test.iterations iterations,
  /// then lets the buffer drain. All referenced locations must be allocated.
  PhaseRun run_body(const litmus::LitmusTest& test, const RunOptions& options = {});

  const ArchProfile& profile() const { return profile_; }
  const addr::MappingFunction& mapping() const { return mapping_; }

 private:
  struct Entry {
    uint64_t line;    // cacheline index
    std::string loc;  // owning location, empty for none
    bool slow;        // service-speed tag, drawn at buffer entry
  };

  uint64_t line_of(const std::string& loc) const;
  void emit_bus(uint64_t line);
  void record_truth(const std::string& loc);
  void enqueue(uint64_t line, const std::string& loc);
  void drain_at(size_t idx);
  void drain_pass();
  void drain_all();
  void step_cycle();
  void noise_tick();
  void advance_cycles(uint64_t cycles);

  ArchProfile profile_;
  addr::MappingFunction mapping_;
  Rng rng_;

  uint64_t alloc_cursor_ = 0;
  std::map<std::string, addr::PhysicalAddress> alloc_map_;
  std::set<uint64_t> reserved_lines_;  // every line ever allocated

  std::set<uint64_t> dirty_;
  std::deque<Entry> queue_;
  std::map<uint64_t, uint32_t> pending_;  // queued entries per line

  uint64_t cycle_ = 0;
  uint64_t bus_seq_ = 0;
  uint64_t truth_seq_ = 0;

  // Per-phase wiring.
  PhaseRun* phase_ = nullptr;
  const RunOptions* options_ = nullptr;
};

/// Preamble (with the given per-location write counts, in order) followed by
/// the test body, on a fresh machine seeded with `seed`.
SimRun run_program(const ArchProfile& profile, const addr::MappingFunction& mapping,
                   const litmus::LitmusTest& test,
                   const std::vector<std::pair<std::string, uint64_t>>& preamble_counts,
                   uint64_t seed);

}  // namespace persival::sim
