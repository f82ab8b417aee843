#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>

#include "tpsim/fp/ops.hpp"
#include "tpsim/fp/refcheck.hpp"

using namespace tpsim::fp;

namespace {

Scalar f32(uint32_t bits) { return Scalar{Format::F32, bits}; }
Scalar f16(uint32_t bits) { return Scalar{Format::F16, bits}; }
Scalar bf16(uint32_t bits) { return Scalar{Format::BF16, bits}; }

// Uniform random bit pattern for a format (raw bits, all classes reachable).
uint32_t rand_bits(std::mt19937_64& rng, Format fmt) {
  return static_cast<uint32_t>(rng()) &
         (fmt == Format::F32 ? 0xFFFFFFFFu : 0xFFFFu);
}

}  // namespace

TEST_CASE("format metadata") {
  const FormatInfo& s = format_info(Format::F32);
  CHECK(s.exp_bits == 8);
  CHECK(s.sig_bits == 23);
  CHECK(s.width == 32);
  CHECK(s.bias == 127);
  CHECK(s.emax == 127);
  CHECK(s.emin == -126);
  CHECK(s.qnan == 0x7FC00000u);

  const FormatInfo& h = format_info(Format::F16);
  CHECK(h.exp_bits == 5);
  CHECK(h.sig_bits == 10);
  CHECK(h.width == 16);
  CHECK(h.bias == 15);
  CHECK(h.emax == 15);
  CHECK(h.emin == -14);
  CHECK(h.qnan == 0x7E00u);

  const FormatInfo& b = format_info(Format::BF16);
  CHECK(b.exp_bits == 8);
  CHECK(b.sig_bits == 7);
  CHECK(b.width == 16);
  CHECK(b.bias == 127);
  CHECK(b.qnan == 0x7FC0u);

  Format parsed = Format::F32;
  CHECK(parse_format("f16", parsed));
  CHECK(parsed == Format::F16);
  CHECK(parse_format("bf16", parsed));
  CHECK(parsed == Format::BF16);
  CHECK(parse_format("f32", parsed));
  CHECK(parsed == Format::F32);
  CHECK(format_name(Format::BF16) == std::string("bf16"));
  CHECK_FALSE(parse_format("f8", parsed));
}

TEST_CASE("pinned basic results") {
  // 1.0 + 1.0 = 2.0 in f16.
  CHECK(add(Format::F16, f16(0x3C00), f16(0x3C00)).bits == 0x4000u);

  // Widening fma: 3.0 * 3.0 + 0.0 accumulates to 9.0 in f32.
  Scalar r = fma_widen(Format::F16, f16(0x4200), f16(0x4200),
                       f32(0x00000000));
  CHECK(r.fmt == Format::F32);
  CHECK(r.bits == 0x41100000u);

  // Round-to-nearest-even truncation of pi to bf16.
  CHECK(convert(Format::BF16, f32(0x40490FDB)).bits == 0x4049u);

  // Pack two f32 values into f16 lanes.
  Packed16 p = cast_and_pack(Format::F16, from_double(Format::F32, 1.5),
                             from_double(Format::F32, -2.0));
  CHECK(p.lane0 == 0x3E00u);
  CHECK(p.lane1 == 0xC000u);
  CHECK(p.word() == 0xC0003E00u);  // lane0 occupies the low half-word

  // Overflow on narrowing saturates to infinity, not max-normal.
  Packed16 q = cast_and_pack(Format::F16, from_double(Format::F32, 1.0e6),
                             from_double(Format::F32, 0.0));
  CHECK(q.lane0 == 0x7C00u);
  CHECK(q.lane1 == 0x0000u);

  // Dot product: [1,2] . [3,4] + 0.5 = 11.5.
  Packed16 a{Format::F16, 0x3C00, 0x4000};
  Packed16 b{Format::F16, 0x4200, 0x4400};
  Scalar d = vfdotp(a, b, from_double(Format::F32, 0.5));
  CHECK(to_double(d) == 11.5);
  CHECK(d.bits == 0x41380000u);
}

TEST_CASE("fused multiply-add rounds exactly once") {
  // a*b = 2^-24 + 2^-60 exactly (2^36+1 factors as 4097 * 16773121), and
  // c + a*b then sits 2^-60 above a representable-midpoint.  A double-based
  // emulation loses that tail bit, takes the tie, and rounds to even --
  // one ulp away from the correctly rounded answer.
  Scalar a = f32(0x33800800);  // (1 + 2^-12) * 2^-24
  Scalar b = f32(0x3F7FF001);  // 1 - 2^-12 + 2^-24
  Scalar c = f32(0x3F800002);  // 1 + 2^-22

  Scalar fused = fma(Format::F32, a, b, c);
  CHECK(fused.bits == 0x3F800003u);
  CHECK(ref::fma(Format::F32, a, b, c).bits == 0x3F800003u);

  const double emulated =
      to_double(a) * to_double(b) + to_double(c);  // rounds twice
  const float narrowed = static_cast<float>(emulated);
  uint32_t emulated_bits;
  static_assert(sizeof(narrowed) == sizeof(emulated_bits));
  std::memcpy(&emulated_bits, &narrowed, sizeof(emulated_bits));
  CHECK(emulated_bits == 0x3F800002u);  // the double-rounding artifact
}

TEST_CASE("special value handling") {
  for (Format f : {Format::F32, Format::F16, Format::BF16}) {
    const FormatInfo& fi = format_info(f);
    const Scalar pinf{f, fi.inf};
    const Scalar ninf{f, fi.sign_mask | fi.inf};
    const Scalar pzero{f, 0};
    const Scalar nzero{f, fi.sign_mask};
    const Scalar one = from_double(f, 1.0);
    const Scalar qnan = make_qnan(f);
    // NaN payloads are never propagated; results are always canonical.
    const Scalar snan_ish{f, fi.inf | 1u};

    CHECK(add(f, pinf, ninf).bits == fi.qnan);
    CHECK(sub(f, pinf, pinf).bits == fi.qnan);
    CHECK(mul(f, pzero, pinf).bits == fi.qnan);
    CHECK(mul(f, ninf, nzero).bits == fi.qnan);
    CHECK(div(f, pzero, pzero).bits == fi.qnan);
    CHECK(div(f, pinf, ninf).bits == fi.qnan);
    CHECK(div(f, one, pzero).bits == pinf.bits);
    CHECK(div(f, one, nzero).bits == ninf.bits);
    CHECK(sqrt(f, from_double(f, -1.0)).bits == fi.qnan);
    CHECK(sqrt(f, nzero).bits == nzero.bits);  // sqrt(-0) = -0
    CHECK(sqrt(f, pinf).bits == pinf.bits);
    CHECK(add(f, snan_ish, one).bits == fi.qnan);
    CHECK(fma(f, qnan, pzero, one).bits == fi.qnan);
    CHECK(fma(f, pinf, pzero, one).bits == fi.qnan);
    CHECK(fma(f, pinf, one, ninf).bits == fi.qnan);
    CHECK(fma(f, pinf, one, pinf).bits == pinf.bits);
    CHECK(mul(f, pinf, from_double(f, -2.0)).bits == ninf.bits);
    // Comparisons with NaN are all false; zeros compare equal.
    CHECK_FALSE(compare(CmpOp::Eq, qnan, qnan));
    CHECK_FALSE(compare(CmpOp::Lt, qnan, one));
    CHECK_FALSE(compare(CmpOp::Le, one, qnan));
    CHECK(compare(CmpOp::Eq, pzero, nzero));
    CHECK(compare(CmpOp::Le, nzero, pzero));
    CHECK(compare(CmpOp::Lt, ninf, pinf));
  }
}

TEST_CASE("signed zero and exact cancellation") {
  for (Format f : {Format::F32, Format::F16, Format::BF16}) {
    const FormatInfo& fi = format_info(f);
    const Scalar pzero{f, 0};
    const Scalar nzero{f, fi.sign_mask};
    const Scalar x = from_double(f, 1.25);
    const Scalar nx = from_double(f, -1.25);
    // Round-to-nearest: zero sums take + except (-0) + (-0).
    CHECK(add(f, pzero, nzero).bits == 0u);
    CHECK(add(f, nzero, pzero).bits == 0u);
    CHECK(add(f, nzero, nzero).bits == nzero.bits);
    CHECK(sub(f, pzero, pzero).bits == 0u);
    CHECK(sub(f, nzero, nzero).bits == 0u);
    CHECK(add(f, x, nx).bits == 0u);  // exact cancellation is +0
    CHECK(sub(f, x, x).bits == 0u);
    CHECK(mul(f, nzero, x).bits == nzero.bits);
    CHECK(mul(f, nzero, nx).bits == 0u);
    CHECK(fma(f, x, nzero, pzero).bits == 0u);
    CHECK(fma(f, x, nzero, nzero).bits == nzero.bits);
  }
}

TEST_CASE("subnormal boundaries") {
  // Smallest f16 subnormal is 2^-24; halving the smallest normal stays exact.
  const Scalar min_sub = f16(0x0001);
  CHECK(is_subnormal(min_sub));
  CHECK(to_double(min_sub) == std::ldexp(1.0, -24));
  CHECK(add(Format::F16, min_sub, min_sub).bits == 0x0002u);

  const Scalar min_norm = f16(0x0400);  // 2^-14
  const Scalar half = from_double(Format::F16, 0.5);
  CHECK(mul(Format::F16, min_norm, half).bits == 0x0200u);  // 2^-15 subnormal

  // Underflow rounds: 2^-24 * 0.5 = 2^-25 is exactly half the smallest
  // subnormal and ties to even (zero); (2^-24 + 2^-23) * 0.5 ties up.
  CHECK(mul(Format::F16, min_sub, half).bits == 0x0000u);
  CHECK(mul(Format::F16, f16(0x0003), half).bits == 0x0002u);

  // Sign survives underflow to zero.
  CHECK(mul(Format::F16, f16(0x8001), half).bits == 0x8000u);

  // Subnormal result from cancellation of normals.
  const Scalar a = f16(0x0400);
  const Scalar b = f16(0x0401);
  CHECK(sub(Format::F16, b, a).bits == 0x0001u);

  // f32 smallest subnormal through a narrowing convert becomes zero.
  CHECK(convert(Format::F16, f32(0x00000001)).bits == 0x0000u);
  // bf16 shares f32's exponent range but its subnormals only reach 2^-133,
  // so f32's smallest subnormal underflows while 3*2^-133 maps exactly.
  CHECK(convert(Format::BF16, f32(0x00000001)).bits == 0x0000u);
  CHECK(convert(Format::BF16, f32(0x00030000)).bits == 0x0003u);
}

TEST_CASE("overflow saturates to infinity") {
  // f16 max normal is 65504; 65504 + 16 lands exactly on the rounding
  // boundary midpoint (65520) and ties away to the next binade => inf.
  CHECK(add(Format::F16, f16(0x7BFF), from_double(Format::F16, 16.0)).bits ==
        0x7C00u);
  CHECK(add(Format::F16, f16(0x7BFF), from_double(Format::F16, 8.0)).bits ==
        0x7BFFu);  // below the midpoint stays max-normal
  CHECK(mul(Format::F16, f16(0x7BFF), from_double(Format::F16, 2.0)).bits ==
        0x7C00u);
  CHECK(mul(Format::F32, f32(0x7F7FFFFF), f32(0x40000000)).bits ==
        0x7F800000u);
  CHECK(mul(Format::BF16, bf16(0xFF7F), bf16(0x4000)).bits == 0xFF80u);
  // Narrowing conversion overflow.
  CHECK(convert(Format::F16, from_double(Format::F32, 1.0e6)).bits == 0x7C00u);
  CHECK(convert(Format::F16, from_double(Format::F32, -1.0e6)).bits ==
        0xFC00u);
}

TEST_CASE("conversions: exhaustive 16-bit round trips") {
  for (Format f : {Format::F16, Format::BF16}) {
    const FormatInfo& fi = format_info(f);
    for (uint32_t v = 0; v <= 0xFFFF; ++v) {
      const Scalar s{f, v};
      const Scalar up = convert(Format::F32, s);
      CHECK(up.bits == ref::convert(Format::F32, s).bits);
      const Scalar back = convert(f, up);
      if (is_nan(s)) {
        CHECK(back.bits == fi.qnan);  // canonicalized
      } else {
        // Widening is exact, so the round trip is the identity.
        REQUIRE(back.bits == v);
      }
    }
  }
}

TEST_CASE("randomized agreement with the reference checker") {
  std::mt19937_64 rng(0x5eedf00dULL);
  for (Format f : {Format::F32, Format::F16, Format::BF16}) {
    for (int i = 0; i < 20000; ++i) {
      const Scalar a{f, rand_bits(rng, f)};
      const Scalar b{f, rand_bits(rng, f)};
      const Scalar c{f, rand_bits(rng, f)};
      REQUIRE(add(f, a, b).bits == ref::arith(ArithOp::Add, f, a, b).bits);
      REQUIRE(sub(f, a, b).bits == ref::arith(ArithOp::Sub, f, a, b).bits);
      REQUIRE(mul(f, a, b).bits == ref::arith(ArithOp::Mul, f, a, b).bits);
      REQUIRE(fma(f, a, b, c).bits == ref::fma(f, a, b, c).bits);
      REQUIRE(div(f, a, b).bits ==
              ref::divsqrt(DivSqrtOp::Div, f, a, b).bits);
      REQUIRE(sqrt(f, a).bits == ref::divsqrt(DivSqrtOp::Sqrt, f, a).bits);
    }
  }
  // Narrowing conversions stress the subnormal/overflow boundary bands.
  for (int i = 0; i < 40000; ++i) {
    const uint32_t v = static_cast<uint32_t>(rng());
    const Scalar s{Format::F32, v};
    REQUIRE(convert(Format::F16, s).bits == ref::convert(Format::F16, s).bits);
    REQUIRE(convert(Format::BF16, s).bits ==
            ref::convert(Format::BF16, s).bits);
    const uint32_t e = 100 + static_cast<uint32_t>(rng() % 60);
    const uint32_t w = (v & 0x807FFFFFu) | (e << 23);
    const Scalar s2{Format::F32, w};
    REQUIRE(convert(Format::F16, s2).bits ==
            ref::convert(Format::F16, s2).bits);
  }
  for (Format f : {Format::F16, Format::BF16}) {
    for (int i = 0; i < 20000; ++i) {
      const Scalar a{f, rand_bits(rng, f)};
      const Scalar b{f, rand_bits(rng, f)};
      const Scalar c{Format::F32, static_cast<uint32_t>(rng())};
      REQUIRE(fma_widen(f, a, b, c).bits == ref::fma_widen(f, a, b, c).bits);
      const Packed16 pa{f, static_cast<uint16_t>(rng()),
                        static_cast<uint16_t>(rng())};
      const Packed16 pb{f, static_cast<uint16_t>(rng()),
                        static_cast<uint16_t>(rng())};
      REQUIRE(vfdotp(pa, pb, c).bits == ref::vfdotp(pa, pb, c).bits);
    }
  }
}

TEST_CASE("packed lanes behave like two scalar ops") {
  std::mt19937_64 rng(77);
  for (Format f : {Format::F16, Format::BF16}) {
    for (int i = 0; i < 5000; ++i) {
      const Packed16 a{f, static_cast<uint16_t>(rng()),
                       static_cast<uint16_t>(rng())};
      const Packed16 b{f, static_cast<uint16_t>(rng()),
                       static_cast<uint16_t>(rng())};
      const Packed16 c{f, static_cast<uint16_t>(rng()),
                       static_cast<uint16_t>(rng())};
      for (ArithOp op : {ArithOp::Add, ArithOp::Sub, ArithOp::Mul}) {
        const Packed16 r = simd_arith(op, a, b);
        CHECK(r.lane0 == arith(op, f, a.lane(0), b.lane(0)).bits);
        CHECK(r.lane1 == arith(op, f, a.lane(1), b.lane(1)).bits);
      }
      const Packed16 r = simd_fma(a, b, c);
      CHECK(r.lane0 == fma(f, a.lane(0), b.lane(0), c.lane(0)).bits);
      CHECK(r.lane1 == fma(f, a.lane(1), b.lane(1), c.lane(1)).bits);
    }
  }
  // Shuffle selects from the concatenated lane pool [a0, a1, b0, b1].
  const Packed16 a{Format::F16, 0x1111, 0x2222};
  const Packed16 b{Format::F16, 0x3333, 0x4444};
  CHECK(shuffle(a, b, 1, 0).lane0 == 0x2222u);
  CHECK(shuffle(a, b, 1, 0).lane1 == 0x1111u);
  CHECK(shuffle(a, b, 2, 3).lane0 == 0x3333u);
  CHECK(shuffle(a, b, 2, 3).lane1 == 0x4444u);
  CHECK(shuffle(a, b, 0, 2).word() ==
        ((0x3333u << 16) | 0x1111u));
}

TEST_CASE("dot product accumulates in argument order") {
  // Lane 0 first: (-2^26 + 8192*8192) + 1*1 = 0 + 1 = 1.  The opposite
  // order would absorb the 1 into -2^26 and return +0, so this pins the
  // evaluation order.
  const Packed16 a{Format::F16, 0x7000, 0x3C00};  // [8192, 1]
  const Packed16 b{Format::F16, 0x7000, 0x3C00};
  const Scalar c = from_double(Format::F32, -67108864.0);  // -2^26
  const Scalar r = vfdotp(a, b, c);
  CHECK(r.bits == 0x3F800000u);
}

TEST_CASE("double view is exact for all finite values") {
  for (uint32_t v = 0; v <= 0xFFFF; ++v) {
    for (Format f : {Format::F16, Format::BF16}) {
      const Scalar s{f, v};
      if (is_nan(s)) continue;
      CHECK(from_double(f, to_double(s)).bits == v);
    }
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100000; ++i) {
    const Scalar s{Format::F32, static_cast<uint32_t>(rng())};
    if (is_nan(s)) continue;
    REQUIRE(from_double(Format::F32, to_double(s)).bits == s.bits);
  }
}

TEST_CASE("format mixing is rejected") {
  CHECK_THROWS(add(Format::F32, f16(0x3C00), f32(0x3F800000)));
  CHECK_THROWS(fma_widen(Format::F32, f32(0), f32(0), f32(0)));
  CHECK_THROWS(vfdotp(Packed16{Format::F16, 0, 0}, Packed16{Format::BF16, 0, 0},
                      f32(0)));
  CHECK_THROWS(cast_and_pack(Format::F32, f32(0), f32(0)));
}
