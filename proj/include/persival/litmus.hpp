#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace persival::litmus {

enum class PersistKind { Clflush, Cvap, Cvac };
enum class BarrierKind { DsbSy, Sfence };

/// Store to a location's base address. `counter` selects the iteration index
/// as the value instead of `value`.
struct Write {
  std::string loc;
  uint64_t value = 0;
  bool counter = false;
  bool operator==(const Write&) const = default;
};

struct Persist {
  PersistKind kind = PersistKind::Cvap;
  std::string loc;
  bool operator==(const Persist&) const = default;
};

struct Barrier {
  BarrierKind kind = BarrierKind::DsbSy;
  bool operator==(const Barrier&) const = default;
};

/// Suspends the issuing thread for `duration_ns` simulated nanoseconds.
struct Sleep {
  uint64_t duration_ns = 0;
  bool operator==(const Sleep&) const = default;
};

using Instruction = std::variant<Write, Persist, Barrier, Sleep>;

struct LocationDecl {
  std::string name;
  uint64_t size_bytes = 0;
  uint32_t ratio = 0;  // preamble write-count multiplier, unique per test
  bool aligned = true;
  bool operator==(const LocationDecl&) const = default;
};

/// obs(lhs_loc) == lhs_value implies obs(rhs_loc) == rhs_value.
struct Implication {
  std::string lhs_loc;
  uint64_t lhs_value = 0;
  std::string rhs_loc;
  uint64_t rhs_value = 0;
  bool operator==(const Implication&) const = default;
};

struct PostCondition {
  std::vector<Implication> implications;
  bool operator==(const PostCondition&) const = default;
};

struct LitmusTest {
  std::vector<LocationDecl> locations;
  std::vector<std::vector<Instruction>> threads;
  uint64_t iterations = 0;
  PostCondition post;

  const LocationDecl* find_location(std::string_view name) const;
  bool operator==(const LitmusTest&) const = default;
};

/// Per-iteration order in which persisted writes must reach memory.
struct PersistPattern {
  std::vector<std::string> tokens;
  uint64_t iterations = 0;
  bool operator==(const PersistPattern&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(size_t line, const std::string& message);
  size_t line() const { return line_; }

 private:
  size_t line_;
};

class PatternError : public std::runtime_error {
 public:
  explicit PatternError(const std::string& message) : std::runtime_error(message) {}
};

/// Parses the line-oriented litmus format (see docs/litmus-format.md).
/// Throws ParseError with a 1-based line number on malformed input,
/// undeclared locations, duplicate ratios, or a missing/zero iteration count.
LitmusTest parse_litmus(std::string_view text);

/// Canonical textual form. parse_litmus(render_litmus(t)) == t.
std::string render_litmus(const LitmusTest& test);

/// Derives the expected per-iteration persist order. Defined only for
/// single-threaded tests in which every write is followed by a persist
/// covering its location and then a barrier before the next write;
/// throws PatternError otherwise.
PersistPattern expected_pattern(const LitmusTest& test);

}  // namespace persival::litmus
