#include "persival/addressing.hpp"

#include <bit>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "persival/rng.hpp"

namespace persival::addr {

namespace {

constexpr int kOffsetBits = 6;  // log2(kCachelineBytes)
constexpr int kMinMemoryBits = kOffsetBits + 1;
constexpr int kMaxMemoryBits = kOffsetBits + kGeoBits;  // cacheline index must fit 32 bits

}  // namespace

GeometricAddress GeometricAddress::unpack(uint32_t packed) {
  GeometricAddress ga;
  ga.column = packed & ((1u << kColumnBits) - 1);
  ga.row = (packed >> kColumnBits) & ((1u << kRowBits) - 1);
  ga.bank = (packed >> (kColumnBits + kRowBits)) & ((1u << kBankBits) - 1);
  ga.bank_group = (packed >> (kColumnBits + kRowBits + kBankBits)) & ((1u << kBankGroupBits) - 1);
  return ga;
}

uint32_t GeometricAddress::packed() const {
  return (bank_group << (kColumnBits + kRowBits + kBankBits)) | (bank << (kColumnBits + kRowBits)) |
         (row << kColumnBits) | column;
}

MappingFunction MappingFunction::identity(int memory_bits) {
  if (memory_bits < kMinMemoryBits || memory_bits > kMaxMemoryBits)
    throw std::invalid_argument("memory_bits must be in [7, 38]");
  MappingFunction m(memory_bits);
  for (int i = 0; i + kOffsetBits < memory_bits && i < kGeoBits; ++i)
    m.taps_[i] = uint64_t{1} << (i + kOffsetBits);
  return m;
}

GeometricAddress MappingFunction::map_to_geometric(PhysicalAddress pa) const {
  if (pa.value >= memory_size())
    throw std::out_of_range("physical address outside the simulated memory range");
  uint32_t packed = constants_;
  for (int i = 0; i < kGeoBits; ++i)
    packed ^= static_cast<uint32_t>(std::popcount(pa.value & taps_[i]) & 1) << i;
  return GeometricAddress::unpack(packed);
}

std::string MappingFunction::serialize() const {
  std::ostringstream out;
  out << "memory_bits=" << memory_bits_ << "\n";
  for (int i = kGeoBits - 1; i >= 0; --i) {
    out << "g" << i << " =";
    bool any = false;
    for (int b = 63; b >= 0; --b) {
      if (taps_[i] & (uint64_t{1} << b)) {
        out << (any ? " ^ p" : " p") << b;
        any = true;
      }
    }
    if (constants_ & (1u << i)) {
      out << (any ? " ^ 1" : " 1");
      any = true;
    }
    if (!any) out << " 0";
    out << "\n";
  }
  return out.str();
}

MappingFunction random_mapping(uint64_t seed, int memory_bits) {
  if (memory_bits < kMinMemoryBits || memory_bits > kMaxMemoryBits)
    throw std::invalid_argument("memory_bits must be in [7, 38]");
  const int n = memory_bits - kOffsetBits;  // cacheline-index bits

  Rng rng(seed);
  MappingFunction m(memory_bits);

  std::array<int, kGeoBits> perm;
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = kGeoBits - 1; i >= 1; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }

  // Each cacheline bit j drives its own output bit; folding in strictly
  // higher bits keeps the system triangular, hence invertible on the range.
  for (int j = 0; j < n; ++j) m.taps_[perm[j]] |= uint64_t{1} << (kOffsetBits + j);
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      if (rng.chance(0.25)) m.taps_[perm[j]] |= uint64_t{1} << (kOffsetBits + k);

  // Leftover output bits carry sparse redundant combinations.
  for (int idx = n; idx < kGeoBits; ++idx)
    for (int k = 0; k < n; ++k)
      if (rng.chance(0.125)) m.taps_[perm[idx]] |= uint64_t{1} << (kOffsetBits + k);

  for (int i = 0; i < kGeoBits; ++i)
    if (rng.chance(0.25)) m.constants_ |= 1u << i;

  return m;
}

WildcardMask::WildcardMask(uint32_t care, uint32_t value) : care_(care), value_(value & care) {}

WildcardMask WildcardMask::from_string(std::string_view s) {
  if (s.size() != kGeoBits)
    throw std::invalid_argument("wildcard mask string must be exactly 32 symbols");
  uint32_t care = 0, value = 0;
  for (int i = 0; i < kGeoBits; ++i) {
    uint32_t bit = 1u << (kGeoBits - 1 - i);
    switch (s[i]) {
      case '0': care |= bit; break;
      case '1': care |= bit; value |= bit; break;
      case 'X': case 'x': break;
      default: throw std::invalid_argument("wildcard mask symbols must be 0, 1, or X");
    }
  }
  return WildcardMask(care, value);
}

std::string WildcardMask::to_string() const {
  std::string out(kGeoBits, 'X');
  for (int i = 0; i < kGeoBits; ++i) {
    uint32_t bit = 1u << (kGeoBits - 1 - i);
    if (care_ & bit) out[i] = (value_ & bit) ? '1' : '0';
  }
  return out;
}

int WildcardMask::specified_bits() const { return std::popcount(care_); }

WildcardMask compute_wildcard_mask(const std::vector<GeometricAddress>& addrs) {
  if (addrs.empty()) throw std::invalid_argument("cannot derive a wildcard mask from an empty set");
  uint32_t first = addrs.front().packed();
  uint32_t disagree = 0;
  for (const auto& ga : addrs) disagree |= ga.packed() ^ first;
  uint32_t care = ~disagree;
  return WildcardMask(care, first & care);
}

}  // namespace persival::addr
