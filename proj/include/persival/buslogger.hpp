#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "persival/addressing.hpp"
#include "persival/memsim.hpp"

namespace persival::probe {

inline constexpr size_t kDefaultDepth = 8000;

enum class Trigger { FirstWrite };

struct CaptureConfig {
  Trigger trigger = Trigger::FirstWrite;
  size_t depth = kDefaultDepth;  // maximum stored records
  /// Storage qualification: only matching writes are stored. Applied to
  /// every event from the trigger onward, the triggering one included.
  /// Absent means store everything (equivalent to an all-X mask).
  std::optional<addr::WildcardMask> qualification;
};

struct TraceRecord {
  uint64_t index = 0;  // original bus sequence number
  addr::GeometricAddress address;
  bool operator==(const TraceRecord&) const = default;
};

/// Probe log: WR commands only, no data signals, addresses in geometric form.
struct Trace {
  std::vector<TraceRecord> records;
  CaptureConfig config;
};

/// Streaming probe: attach on_write as the machine's bus sink. Arms on the
/// first observed write and stores qualified events until `depth` is reached.
class LiveCapture {
 public:
  explicit LiveCapture(CaptureConfig config);

  void on_write(const sim::BusEvent& event);
  bool full() const { return trace_.records.size() >= trace_.config.depth; }
  const Trace& trace() const { return trace_; }
  Trace take() { return std::move(trace_); }

 private:
  Trace trace_;
};

/// Offline form of LiveCapture over an already-materialized event list.
Trace capture(std::span<const sim::BusEvent> events, const CaptureConfig& config);

class CsvError : public std::runtime_error {
 public:
  CsvError(size_t line, const std::string& message);
  size_t line() const { return line_; }

 private:
  size_t line_;
};

/// Deterministic, byte-stable CSV: header
/// `index,command,bank_group,bank,row,column`, then one decimal row per
/// record. Only records are serialized; capture configuration is not part of
/// the interchange format, so trace equality across a round trip means
/// record equality.
std::string export_csv(const Trace& trace);

/// Inverse of export_csv. Throws CsvError with a 1-based line number on a
/// malformed row, an out-of-range field, or indices that fail to increase.
Trace parse_csv(std::string_view text);

}  // namespace persival::probe
