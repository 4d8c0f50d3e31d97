#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace persival {

/// Exact signed rational. Metrics that end up in reports are carried in this
/// form so that equal inputs render to identical bytes; conversion to
/// decimal happens only at the formatting boundary.
struct Rational {
  int64_t num = 0;
  int64_t den = 1;  // always > 0, gcd(|num|, den) == 1

  static Rational of(int64_t num, int64_t den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
    return Rational{num, den};
  }

  static Rational whole(int64_t value) { return Rational{value, 1}; }

  Rational operator+(const Rational& other) const {
    __int128 n = static_cast<__int128>(num) * other.den + static_cast<__int128>(other.num) * den;
    __int128 d = static_cast<__int128>(den) * other.den;
    __int128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) {
      n /= g;
      d /= g;
    }
    return Rational{static_cast<int64_t>(n), static_cast<int64_t>(d)};
  }

  Rational operator-(const Rational& other) const {
    return *this + Rational{-other.num, other.den};
  }

  Rational abs() const { return Rational{num < 0 ? -num : num, den}; }

  bool operator==(const Rational&) const = default;
  auto operator<=>(const Rational& other) const {
    return static_cast<__int128>(num) * other.den <=> static_cast<__int128>(other.num) * den;
  }

  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

 private:
  static __int128 gcd128(__int128 a, __int128 b) {
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }
};

/// Fixed two-decimal rendering, round half away from zero: 5 -> "5.00",
/// -5/2 -> "-2.50".
inline std::string fixed2(const Rational& r) {
  __int128 scaled = static_cast<__int128>(r.num < 0 ? -r.num : r.num) * 100;
  __int128 hundredths = (2 * scaled + r.den) / (2 * static_cast<__int128>(r.den));
  auto whole = static_cast<int64_t>(hundredths / 100);
  auto frac = static_cast<int64_t>(hundredths % 100);
  std::string out = r.num < 0 && hundredths != 0 ? "-" : "";
  out += std::to_string(whole);
  out += '.';
  if (frac < 10) out += '0';
  out += std::to_string(frac);
  return out;
}

}  // namespace persival
