#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>

#include "error.hpp"
#include "fixed_point.hpp"

using pointode::Error;
using namespace pointode::fp;

namespace {

// Reference rounding, kept deliberately independent of the library: scale in
// long double (exact for power-of-two factors), split into floor + fraction,
// and resolve ties toward the even integer.
std::int64_t oracle_round_even(long double s) {
  long double fl = std::floor(s);
  long double frac = s - fl;
  auto base = static_cast<std::int64_t>(fl);
  if (frac > 0.5L) return base + 1;
  if (frac < 0.5L) return base;
  return (base % 2 == 0) ? base : base + 1;
}

std::int64_t clamp_raw(std::int64_t r, const Format& f) {
  if (r > f.raw_max()) return f.raw_max();
  if (r < f.raw_min()) return f.raw_min();
  return r;
}

std::int64_t oracle_encode(double x, const Format& f) {
  long double s = std::ldexp(static_cast<long double>(x), f.frac_bits);
  if (s >= static_cast<long double>(f.raw_max())) return f.raw_max();
  if (s <= static_cast<long double>(f.raw_min())) return f.raw_min();
  return clamp_raw(oracle_round_even(s), f);
}

std::int64_t oracle_add(std::int64_t a, std::int64_t b, const Format& f) {
  return clamp_raw(a + b, f);  // raws are < 2^47 in these tests, no int64 overflow
}

// Product of two 24-bit raws fits a long double mantissa exactly, so the
// reference multiply can reuse the same exact floor/fraction split.
std::int64_t oracle_mul(std::int64_t a, std::int64_t b, const Format& f) {
  long double p = static_cast<long double>(a) * static_cast<long double>(b);
  return clamp_raw(oracle_round_even(std::ldexp(p, -f.frac_bits)), f);
}

// Exact rational round-to-nearest-even of (a << frac) / b: guess with long
// double, then fix up the guess by comparing |num - q*b| integer-exactly.
std::int64_t oracle_div(std::int64_t a, std::int64_t b, const Format& f) {
  REQUIRE(b != 0);
  __int128 num = static_cast<__int128>(a) << f.frac_bits;
  auto guess = static_cast<std::int64_t>(
      std::llrint(static_cast<double>(a) / static_cast<double>(b) * std::ldexp(1.0, f.frac_bits)));
  std::int64_t best = guess;
  __int128 best_err = -1;
  bool tie = false;
  for (std::int64_t q = guess - 2; q <= guess + 2; ++q) {
    __int128 err = num - static_cast<__int128>(q) * b;
    if (err < 0) err = -err;
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best = q;
      tie = false;
    } else if (err == best_err && q != best) {
      tie = true;
      if ((q % 2) == 0) best = q;
    }
  }
  if (tie && (best % 2) != 0) best -= (best > 0 ? 1 : -1);
  return clamp_raw(best, f);
}

constexpr Format kQ{24, 16};

}  // namespace

TEST_SUITE("fixed_point") {

TEST_CASE("format constants") {
  CHECK(kQ8_16.total_bits == 24);
  CHECK(kQ8_16.frac_bits == 16);
  CHECK(kQ8_16.raw_max() == 8388607);
  CHECK(kQ8_16.raw_min() == -8388608);
}

TEST_CASE("encode basics") {
  CHECK(encode(0.0).raw == 0);
  CHECK(encode(0.5).raw == 32768);
  CHECK(encode(1.0).raw == 65536);
  CHECK(encode(-1.0).raw == -65536);
  CHECK(encode(std::ldexp(1.0, -16)).raw == 1);
  CHECK(encode(200.0).raw == 8388607);   // saturates at +(2^7 - 2^-16)
  CHECK(encode(-200.0).raw == -8388608); // saturates at -2^7
  CHECK(encode(127.0).raw == 127 * 65536);
  CHECK_THROWS_AS(encode(std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(encode(-std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(encode(std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("encode ties round to even") {
  // x*2^16 = k + 0.5 exactly: nearest even raw wins.
  CHECK(encode(1.5 / 65536.0).raw == 2);
  CHECK(encode(2.5 / 65536.0).raw == 2);
  CHECK(encode(3.5 / 65536.0).raw == 4);
  CHECK(encode(0.5 / 65536.0).raw == 0);
  CHECK(encode(-1.5 / 65536.0).raw == -2);
  CHECK(encode(-2.5 / 65536.0).raw == -2);
  CHECK(encode(-0.5 / 65536.0).raw == 0);
}

TEST_CASE("encode matches reference rounding on random reals") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> wide(-300.0, 300.0);
  std::uniform_real_distribution<double> inside(-127.9, 127.9);
  for (int i = 0; i < 200000; ++i) {
    double x = (i % 2) ? wide(rng) : inside(rng);
    CHECK(encode(x).raw == oracle_encode(x, kQ));
  }
}

TEST_CASE("encode error is at most half an ulp inside the range") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> inside(-127.99, 127.99);
  const double half_ulp = std::ldexp(1.0, -17);
  for (int i = 0; i < 100000; ++i) {
    double x = inside(rng);
    double back = decode(encode(x));
    CHECK(std::abs(back - x) <= half_ulp);
  }
}

TEST_CASE("decode/encode round-trip is exact on raws") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::int64_t> raws(kQ.raw_min(), kQ.raw_max());
  for (int i = 0; i < 100000; ++i) {
    Fixed a{raws(rng)};
    CHECK(encode(decode(a)).raw == a.raw);
  }
  CHECK(encode(decode(Fixed{kQ.raw_min()})).raw == kQ.raw_min());
  CHECK(encode(decode(Fixed{kQ.raw_max()})).raw == kQ.raw_max());
}

TEST_CASE("add saturates instead of wrapping") {
  Fixed max{kQ.raw_max()}, min{kQ.raw_min()}, one{65536};
  CHECK(add(max, one).raw == kQ.raw_max());
  CHECK(add(max, max).raw == kQ.raw_max());
  CHECK(add(min, min).raw == kQ.raw_min());
  CHECK(add(min, one).raw == kQ.raw_min() + 65536);
  CHECK(add(encode(1.25), encode(2.5)).raw == encode(3.75).raw);
  CHECK(sub(min, one).raw == kQ.raw_min());
  CHECK(sub(max, max).raw == 0);
}

TEST_CASE("add/mul agree with the integer oracle on a million pairs") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::int64_t> raws(kQ.raw_min(), kQ.raw_max());
  for (int i = 0; i < 1000000; ++i) {
    Fixed a{raws(rng)}, b{raws(rng)};
    std::int64_t s = add(a, b).raw;
    std::int64_t p = mul(a, b).raw;
    CHECK(s == oracle_add(a.raw, b.raw, kQ));
    CHECK(p == oracle_mul(a.raw, b.raw, kQ));
    // no op may escape the 24-bit range
    CHECK(s <= kQ.raw_max());
    CHECK(s >= kQ.raw_min());
    CHECK(p <= kQ.raw_max());
    CHECK(p >= kQ.raw_min());
  }
}

TEST_CASE("mul value checks") {
  CHECK(mul(encode(1.5), encode(-2.25)).raw == encode(-3.375).raw);
  CHECK(mul(encode(100.0), encode(100.0)).raw == kQ.raw_max());
  CHECK(mul(encode(-100.0), encode(100.0)).raw == kQ.raw_min());
  CHECK(mul(encode(1.0), Fixed{12345}).raw == 12345);
  CHECK(mul(Fixed{0}, Fixed{kQ.raw_max()}).raw == 0);
  // exact tie at half an ulp: 2^-16 * 0.5 rounds to even (zero)
  CHECK(mul(Fixed{1}, encode(0.5)).raw == 0);
  // 3*2^-16 * 0.5 = 1.5 ulp, ties to 2
  CHECK(mul(Fixed{3}, encode(0.5)).raw == 2);
  // a truncating multiply would return 0 here; nearest is 1
  CHECK(mul(Fixed{1}, encode(0.75)).raw == 1);
}

TEST_CASE("div matches exact rational rounding") {
  CHECK(div(encode(1.0), encode(2.0)).raw == encode(0.5).raw);
  CHECK(div(encode(-1.0), encode(2.0)).raw == encode(-0.5).raw);
  CHECK(div(encode(100.0), encode(0.5)).raw == kQ.raw_max());  // 200 saturates
  CHECK(div(Fixed{0}, encode(3.0)).raw == 0);
  // division by zero saturates toward the numerator's sign
  CHECK(div(encode(1.0), Fixed{0}).raw == kQ.raw_max());
  CHECK(div(encode(-1.0), Fixed{0}).raw == kQ.raw_min());
  CHECK(div(Fixed{0}, Fixed{0}).raw == 0);

  std::mt19937_64 rng(19);
  std::uniform_int_distribution<std::int64_t> raws(kQ.raw_min(), kQ.raw_max());
  for (int i = 0; i < 200000; ++i) {
    Fixed a{raws(rng)};
    Fixed b{raws(rng)};
    if (b.raw == 0) continue;
    CHECK(div(a, b).raw == oracle_div(a.raw, b.raw, kQ));
  }
}

TEST_CASE("sqrt basics") {
  CHECK(sqrt(encode(4.0)).raw == encode(2.0).raw);
  CHECK(sqrt(encode(1.0)).raw == encode(1.0).raw);
  CHECK(sqrt(Fixed{0}).raw == 0);
  CHECK_THROWS_AS(sqrt(encode(-1.0)), Error);
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::int64_t> raws(1, kQ.raw_max());
  for (int i = 0; i < 50000; ++i) {
    Fixed a{raws(rng)};
    long double want = std::sqrt(static_cast<long double>(a.raw) / 65536.0L);
    long double got = static_cast<long double>(decode(sqrt(a)));
    CHECK(std::abs(static_cast<double>(got - want)) <= std::ldexp(1.0, -16));
  }
}

TEST_CASE("recip_sqrt stays within two ulp of extended precision") {
  CHECK(recip_sqrt(encode(1.0)).raw == encode(1.0).raw);
  CHECK(recip_sqrt(encode(4.0)).raw == encode(0.5).raw);
  CHECK(recip_sqrt(encode(0.25)).raw == encode(2.0).raw);
  CHECK(recip_sqrt(Fixed{0}).raw == kQ.raw_max());  // pinned: saturate, no trap
  CHECK_THROWS_AS(recip_sqrt(encode(-2.0)), Error);

  std::mt19937_64 rng(29);
  std::uniform_int_distribution<std::int64_t> raws(1, kQ.raw_max());
  const long double two_ulp = std::ldexp(1.0L, -15);
  for (int i = 0; i < 100000; ++i) {
    Fixed a{raws(rng)};
    long double want = 1.0L / std::sqrt(static_cast<long double>(a.raw) / 65536.0L);
    if (want > 128.0L) continue;  // saturation region, covered above
    long double got = static_cast<long double>(decode(recip_sqrt(a)));
    CHECK(std::abs(static_cast<double>(got - want)) <= static_cast<double>(two_ulp));
  }
}

TEST_CASE("other formats follow the same rules") {
  Format q8{16, 8};    // 16-bit word, 8 fractional bits
  CHECK(encode(0.5, q8).raw == 128);
  CHECK(encode(1000.0, q8).raw == q8.raw_max());
  CHECK(encode(decode(Fixed{-17}, q8), q8).raw == -17);

  Format q25{25, 16};  // sign bit outside the 8 integer bits: range doubles
  CHECK(encode(200.0, q25).raw == 200 * 65536);
  CHECK(encode(300.0, q25).raw == q25.raw_max());

  Format fine{32, 24};
  CHECK(encode(0.5, fine).raw == (1 << 23));
  CHECK(mul(encode(1.5, fine), encode(2.5, fine), fine).raw == encode(3.75, fine).raw);

  Format wide{48, 32};
  CHECK(mul(encode(1.5, wide), encode(-2.25, wide), wide).raw == encode(-3.375, wide).raw);
  CHECK(add(Fixed{wide.raw_max()}, Fixed{1}, wide).raw == wide.raw_max());

  CHECK_THROWS_AS(encode(1.0, Format{16, 16}), Error);  // frac must leave room for sign+integer
  CHECK_THROWS_AS(encode(1.0, Format{70, 16}), Error);

  std::mt19937_64 rng(31);
  for (const Format& f : {q8, q25, fine}) {
    std::uniform_int_distribution<std::int64_t> raws(f.raw_min(), f.raw_max());
    for (int i = 0; i < 50000; ++i) {
      Fixed a{raws(rng)}, b{raws(rng)};
      CHECK(mul(a, b, f).raw == oracle_mul(a.raw, b.raw, f));
      CHECK(add(a, b, f).raw == oracle_add(a.raw, b.raw, f));
      CHECK(encode(decode(a, f), f).raw == a.raw);
    }
  }
}

TEST_CASE("round_shift_rne floor/tie behaviour") {
  CHECK(round_shift_rne(8, 2) == 2);
  CHECK(round_shift_rne(9, 2) == 2);    // 2.25 -> 2
  CHECK(round_shift_rne(10, 2) == 2);   // 2.5 ties to even
  CHECK(round_shift_rne(11, 2) == 3);   // 2.75 -> 3
  CHECK(round_shift_rne(14, 2) == 4);   // 3.5 ties to even (4)
  CHECK(round_shift_rne(-9, 2) == -2);  // -2.25 -> -2
  CHECK(round_shift_rne(-10, 2) == -2); // -2.5 ties to even
  CHECK(round_shift_rne(-14, 2) == -4); // -3.5 ties to even
  CHECK(round_shift_rne(-11, 2) == -3);
  CHECK(round_shift_rne(5, 0) == 5);
}

}  // TEST_SUITE
