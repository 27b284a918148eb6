#include "fixed_point.hpp"

#include <cmath>

namespace pointode::fp {

namespace {

void check_format(const Format& f) {
  if (!f.valid()) fail(errc::invalid_argument, "fixed: bad format (need 2 <= total <= 64, 1 <= frac < total)");
}

}  // namespace

Fixed encode(double x, const Format& f) {
  check_format(f);
  if (!std::isfinite(x)) fail(errc::invalid_argument, "fixed: cannot encode a non-finite value");
  // Power-of-two scaling of a double is exact in long double, so rintl sees
  // the true scaled value and applies nearest-even directly.
  long double s = std::ldexp(static_cast<long double>(x), f.frac_bits);
  if (s >= static_cast<long double>(f.raw_max()) + 0.5L) return Fixed{f.raw_max()};
  if (s <= static_cast<long double>(f.raw_min()) - 0.5L) return Fixed{f.raw_min()};
  auto r = static_cast<std::int64_t>(std::rintl(s));
  return Fixed{saturate(r, f)};
}

double decode(Fixed a, const Format& f) {
  check_format(f);
  return std::ldexp(static_cast<double>(a.raw), -f.frac_bits);
}

Fixed add(Fixed a, Fixed b, const Format& f) {
  check_format(f);
  return Fixed{saturate(static_cast<__int128>(a.raw) + b.raw, f)};
}

Fixed sub(Fixed a, Fixed b, const Format& f) {
  check_format(f);
  return Fixed{saturate(static_cast<__int128>(a.raw) - b.raw, f)};
}

Fixed mul(Fixed a, Fixed b, const Format& f) {
  check_format(f);
  __int128 p = static_cast<__int128>(a.raw) * b.raw;
  return Fixed{saturate(round_shift_rne_wide(p, f.frac_bits), f)};
}

Fixed div(Fixed a, Fixed b, const Format& f) {
  check_format(f);
  if (b.raw == 0) {
    if (a.raw == 0) return Fixed{0};
    return Fixed{a.raw > 0 ? f.raw_max() : f.raw_min()};
  }
  __int128 num = static_cast<__int128>(a.raw) << f.frac_bits;
  bool neg = (num < 0) != (b.raw < 0);
  __int128 an = num < 0 ? -num : num;
  __int128 ab = b.raw < 0 ? -static_cast<__int128>(b.raw) : static_cast<__int128>(b.raw);
  __int128 q = an / ab;
  __int128 r = an % ab;
  // nearest-even on the magnitude equals nearest-even on the signed value
  if (2 * r > ab || (2 * r == ab && (q & 1))) ++q;
  return Fixed{saturate(neg ? -q : q, f)};
}

Fixed sqrt(Fixed a, const Format& f) {
  check_format(f);
  if (a.raw < 0) fail(errc::invalid_argument, "fixed: sqrt of a negative value");
  if (a.raw == 0) return Fixed{0};
  long double v = std::sqrt(std::ldexp(static_cast<long double>(a.raw), -f.frac_bits));
  auto r = static_cast<std::int64_t>(std::rintl(std::ldexp(v, f.frac_bits)));
  return Fixed{saturate(r, f)};
}

Fixed recip_sqrt(Fixed a, const Format& f) {
  check_format(f);
  if (a.raw < 0) fail(errc::invalid_argument, "fixed: recip_sqrt of a negative value");
  if (a.raw == 0) return Fixed{f.raw_max()};
  long double v = 1.0L / std::sqrt(std::ldexp(static_cast<long double>(a.raw), -f.frac_bits));
  long double s = std::ldexp(v, f.frac_bits);
  if (s >= static_cast<long double>(f.raw_max())) return Fixed{f.raw_max()};
  return Fixed{saturate(static_cast<std::int64_t>(std::rintl(s)), f)};
}

}  // namespace pointode::fp
