#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace persival::addr {

inline constexpr uint64_t kCachelineBytes = 64;
inline constexpr int kBankGroupBits = 2;
inline constexpr int kBankBits = 2;
inline constexpr int kRowBits = 18;
inline constexpr int kColumnBits = 10;
inline constexpr int kGeoBits = kBankGroupBits + kBankBits + kRowBits + kColumnBits;  // 32

struct PhysicalAddress {
  uint64_t value = 0;
  auto operator<=>(const PhysicalAddress&) const = default;
};

/// DRAM-side coordinates of one cacheline-sized write.
/// Packed layout, most significant first: bank_group | bank | row | column.
struct GeometricAddress {
  uint32_t bank_group = 0;  // 2 bits
  uint32_t bank = 0;        // 2 bits
  uint32_t row = 0;         // 18 bits
  uint32_t column = 0;      // 10 bits

  static GeometricAddress unpack(uint32_t packed);
  uint32_t packed() const;
  auto operator<=>(const GeometricAddress&) const = default;
};

/// GF(2)-linear map from physical addresses to geometric addresses, the
/// secret wiring between the memory controller and the DIMM. Each output bit
/// is the XOR of a fixed set of physical-address bits (all >= the cacheline
/// offset width) plus an optional constant, so a whole cacheline maps to one
/// geometric address and the map is injective over the simulated range.
class MappingFunction {
 public:
  /// Output bit i = physical bit i + 6 where that bit exists; used in tests
  /// and documentation examples.
  static MappingFunction identity(int memory_bits);

  GeometricAddress map_to_geometric(PhysicalAddress pa) const;

  int memory_bits() const { return memory_bits_; }
  uint64_t memory_size() const { return uint64_t{1} << memory_bits_; }

  /// One output bit per line, highest first, e.g. "g17 = p23 ^ p9 ^ 1".
  std::string serialize() const;

  bool operator==(const MappingFunction&) const = default;

 private:
  friend MappingFunction random_mapping(uint64_t seed, int memory_bits);

  MappingFunction(int memory_bits) : memory_bits_(memory_bits) {}

  std::array<uint64_t, kGeoBits> taps_{};  // taps_[i]: XOR mask over physical bits
  uint32_t constants_ = 0;
  int memory_bits_ = 0;
};

/// Draws a seed-deterministic injective mapping for a 2^memory_bits byte
/// range. A permutation places each cacheline-index bit on its own output
/// bit; higher index bits are then XOR-folded in, which keeps the map
/// invertible on the range. memory_bits must be in [7, 38] so the cacheline
/// index fits the 32 geometric bits.
MappingFunction random_mapping(uint64_t seed, int memory_bits);

inline MappingFunction identity_mapping(int memory_bits) { return MappingFunction::identity(memory_bits); }

/// 32-symbol pattern over {0, 1, X} against packed geometric addresses.
/// A probe storage qualifier: an address is stored iff every non-X bit
/// matches.
class WildcardMask {
 public:
  /// All-X mask (matches everything).
  WildcardMask() = default;
  WildcardMask(uint32_t care, uint32_t value);

  static WildcardMask from_string(std::string_view s);  // 32 chars, MSB first
  std::string to_string() const;

  bool matches(GeometricAddress ga) const { return (ga.packed() & care_) == value_; }

  uint32_t care() const { return care_; }
  uint32_t value() const { return value_; }
  int specified_bits() const;

  bool operator==(const WildcardMask&) const = default;

 private:
  uint32_t care_ = 0;
  uint32_t value_ = 0;
};

/// Most specific mask matching every input: a bit is concrete iff all
/// addresses agree on it. Throws std::invalid_argument on an empty set.
WildcardMask compute_wildcard_mask(const std::vector<GeometricAddress>& addrs);

inline bool mask_matches(const WildcardMask& mask, GeometricAddress ga) { return mask.matches(ga); }

}  // namespace persival::addr
