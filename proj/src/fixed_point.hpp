#pragma once

#include <cstdint>

#include "error.hpp"

namespace pointode::fp {

// Two's complement Q format: a raw integer carrying frac_bits fractional
// bits inside a total_bits word.  The default is the 24-bit accelerator
// format with 16 fractional bits (8 integer bits including sign), i.e.
// values in [-128, 128 - 2^-16] with an ulp of 2^-16.
struct Format {
  int total_bits = 24;
  int frac_bits = 16;

  constexpr bool valid() const {
    return total_bits >= 2 && total_bits <= 64 && frac_bits >= 1 && frac_bits < total_bits;
  }
  constexpr std::int64_t raw_max() const {
    return total_bits == 64 ? INT64_MAX : (std::int64_t(1) << (total_bits - 1)) - 1;
  }
  constexpr std::int64_t raw_min() const {
    return total_bits == 64 ? INT64_MIN : -(std::int64_t(1) << (total_bits - 1));
  }
};

inline constexpr Format kQ8_16{};

// Raw fixed-point value; meaningful only together with a Format.
struct Fixed {
  std::int64_t raw = 0;
};

// Round v / 2^shift to the nearest integer, ties to even.  Relies on
// arithmetic right shift flooring negatives, so the remainder is always
// non-negative and one comparison decides the direction.
inline std::int64_t round_shift_rne(std::int64_t v, int shift) {
  if (shift <= 0) return v;
  std::int64_t q = v >> shift;
  std::int64_t rem = v - (q << shift);
  std::int64_t half = std::int64_t(1) << (shift - 1);
  if (rem > half || (rem == half && (q & 1))) ++q;
  return q;
}

inline __int128 round_shift_rne_wide(__int128 v, int shift) {
  if (shift <= 0) return v;
  __int128 q = v >> shift;
  __int128 rem = v - (q << shift);
  __int128 half = __int128(1) << (shift - 1);
  if (rem > half || (rem == half && (q & 1))) ++q;
  return q;
}

inline std::int64_t saturate(__int128 v, const Format& f) {
  if (v > f.raw_max()) return f.raw_max();
  if (v < f.raw_min()) return f.raw_min();
  return static_cast<std::int64_t>(v);
}

// Round-to-nearest-even quantization with saturation at the range ends.
// Throws on non-finite input.
Fixed encode(double x, const Format& f = kQ8_16);
double decode(Fixed a, const Format& f = kQ8_16);

// Saturating arithmetic.  mul keeps the full-width product in a wide
// intermediate and rounds once (nearest-even) when dropping frac_bits.
Fixed add(Fixed a, Fixed b, const Format& f = kQ8_16);
Fixed sub(Fixed a, Fixed b, const Format& f = kQ8_16);
Fixed mul(Fixed a, Fixed b, const Format& f = kQ8_16);

// Exactly rounded quotient (nearest-even on the true rational value).
// b == 0 saturates toward the sign of a; 0/0 is pinned to 0.
Fixed div(Fixed a, Fixed b, const Format& f = kQ8_16);

// sqrt rejects negative inputs. recip_sqrt(0) saturates to raw_max so the
// normalization path never traps; both stay within 2 ulp of the value
// computed in extended precision.
Fixed sqrt(Fixed a, const Format& f = kQ8_16);
Fixed recip_sqrt(Fixed a, const Format& f = kQ8_16);

}  // namespace pointode::fp
