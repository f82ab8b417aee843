#include "tpsim/fp/ops.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <stdexcept>

// Integer softfloat core.
//
// Finite nonzero values are unpacked to sign/significand/scale with the
// significand normalized (MSB at the hidden-bit position) and the scale
// giving the weight of the significand's least significant bit:
//
//     value = sig * 2^scale,   sig in [2^sb, 2^(sb+1))
//
// Products are then exact integer multiplies, sums are exact aligned adds
// inside a 128-bit window (far-away bits collapse into a sticky flag), and
// a single round-to-nearest-even at the end maps the exact result into the
// destination format.  This keeps every operation correctly rounded,
// including fused ones, without ever touching host FP arithmetic.

namespace tpsim::fp {

namespace {

using u32 = uint32_t;
using u64 = uint64_t;
using u128 = unsigned __int128;

const FormatInfo kFormats[3] = {
    // F32
    {8, 23, 32, 127, 127, -126, 0x7F800000u, 0x007FFFFFu, 0x80000000u,
     0x7FFFFFFFu, 0x7FC00000u, 0x7F800000u},
    // F16
    {5, 10, 16, 15, 15, -14, 0x7C00u, 0x03FFu, 0x8000u, 0x7FFFu, 0x7E00u,
     0x7C00u},
    // BF16
    {8, 7, 16, 127, 127, -126, 0x7F80u, 0x007Fu, 0x8000u, 0x7FFFu, 0x7FC0u,
     0x7F80u},
};

enum class Cls : uint8_t { Zero, Finite, Inf, NaN };

struct Unpacked {
  bool sign = false;
  Cls cls = Cls::Zero;
  u64 sig = 0;    // normalized, MSB at bit sig_bits (hidden-bit position)
  int scale = 0;  // value = sig * 2^scale
};

int bitlen128(u128 v) {
  u64 hi = static_cast<u64>(v >> 64);
  if (hi) return 128 - std::countl_zero(hi);
  u64 lo = static_cast<u64>(v);
  if (lo) return 64 - std::countl_zero(lo);
  return 0;
}

Unpacked unpack(Scalar v, const FormatInfo& fi) {
  Unpacked u;
  u.sign = (v.bits & fi.sign_mask) != 0;
  u32 exp = (v.bits & fi.exp_mask) >> fi.sig_bits;
  u32 frac = v.bits & fi.sig_mask;
  u32 exp_max = (1u << fi.exp_bits) - 1;
  if (exp == exp_max) {
    u.cls = frac ? Cls::NaN : Cls::Inf;
    return u;
  }
  if (exp == 0) {
    if (frac == 0) {
      u.cls = Cls::Zero;
      return u;
    }
    // Subnormal: normalize so the MSB sits at the hidden-bit position.
    int shift = fi.sig_bits - (31 - std::countl_zero(frac));
    u.cls = Cls::Finite;
    u.sig = static_cast<u64>(frac) << shift;
    u.scale = fi.emin - shift - fi.sig_bits;
    return u;
  }
  u.cls = Cls::Finite;
  u.sig = frac | (1u << fi.sig_bits);
  u.scale = static_cast<int>(exp) - fi.bias - fi.sig_bits;
  return u;
}

// Round value = sign * (mag * 2^scale + [sticky ? (0, 2^scale) : 0]) to fmt
// with round-to-nearest-even.  mag == 0 with no sticky is the exact-zero
// cancellation case and returns +0 regardless of sign.
Scalar round_pack(bool sign, u128 mag, int scale, bool sticky,
                  const FormatInfo& fi, Format fmt) {
  if (mag == 0) {
    if (!sticky) return Scalar{fmt, 0};
    // A pure sticky residue is far below the smallest subnormal here
    // (it only arises from a capped alignment shift): round to zero.
    return make_zero(fmt, sign);
  }
  int msb = bitlen128(mag) - 1;
  int e = msb + scale;  // value in [2^e, 2^(e+1))
  int ulp_exp = (e < fi.emin ? fi.emin : e) - fi.sig_bits;
  int shift = ulp_exp - scale;

  u64 q;
  bool guard = false;
  if (shift <= 0) {
    q = static_cast<u64>(mag << static_cast<unsigned>(-shift));
  } else if (shift >= 127) {
    // mag never has bits this high (a 48-bit product in a 64-bit guard
    // window tops out near 2^113), so everything drops into sticky.
    q = 0;
    sticky = true;
  } else {
    guard = ((mag >> (shift - 1)) & 1) != 0;
    if (shift >= 2) {
      sticky = sticky || (mag & ((static_cast<u128>(1) << (shift - 1)) - 1)) != 0;
    }
    q = static_cast<u64>(mag >> shift);
  }
  if (guard && (sticky || (q & 1))) q += 1;

  u64 hidden = static_cast<u64>(1) << fi.sig_bits;
  if (q >= hidden << 1) {
    q >>= 1;
    ulp_exp += 1;
  }
  if (q == 0) return make_zero(fmt, sign);

  u32 sign_bits = sign ? fi.sign_mask : 0;
  if (q < hidden) {
    // Subnormal result (ulp_exp pinned at emin - sig_bits).
    return Scalar{fmt, sign_bits | static_cast<u32>(q)};
  }
  int e_res = ulp_exp + fi.sig_bits;
  if (e_res > fi.emax) return make_inf(fmt, sign);
  u32 biased = static_cast<u32>(e_res + fi.bias);
  return Scalar{fmt, sign_bits | (biased << fi.sig_bits) |
                         (static_cast<u32>(q) & fi.sig_mask)};
}

struct Combined {
  bool sign;
  u128 mag;
  int scale;
  bool sticky;
};

// Exact signed sum of a*2^sa and b*2^sb inside a 128-bit window.  Operand
// magnitudes must fit in 48 bits (a full product) or less.  Bits shifted
// out past the window collapse into the sticky flag, with the subtraction
// borrow handled so the (mag, mag+1) interval convention stays valid.
Combined combine(bool sign_a, u128 mag_a, int scale_a, bool sign_b, u128 mag_b,
                 int scale_b) {
  constexpr int kWindow = 64;
  int common = (scale_a > scale_b ? scale_a : scale_b) - kWindow;
  bool sticky = false;

  auto align = [&](u128 mag, int scale) -> u128 {
    int sh = scale - common;  // >= 0 for the higher operand, may be < 0
    if (sh >= 0) return mag << sh;
    sh = -sh;
    if (sh >= 128) {
      if (mag != 0) sticky = true;
      return 0;
    }
    if ((mag & ((static_cast<u128>(1) << sh) - 1)) != 0) sticky = true;
    return mag >> sh;
  };

  u128 a = align(mag_a, scale_a);
  u128 b = align(mag_b, scale_b);

  Combined r;
  r.scale = common;
  r.sticky = sticky;
  if (sign_a == sign_b) {
    r.sign = sign_a;
    r.mag = a + b;
    return r;
  }
  // Effective subtraction.  If bits of the smaller operand were jammed into
  // sticky, the represented magnitude understates it: subtract one extra so
  // the true value lies in (mag, mag+1) above the result.
  if (a == b && !sticky) {
    r.sign = false;
    r.mag = 0;
    return r;
  }
  if (a >= b) {
    r.sign = sign_a;
    r.mag = a - b - (sticky ? 1 : 0);
  } else {
    r.sign = sign_b;
    r.mag = b - a - (sticky ? 1 : 0);
  }
  return r;
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_fmt(Scalar v, Format fmt, const char* msg) {
  require(v.fmt == fmt, msg);
}

bool is16(Format f) { return f == Format::F16 || f == Format::BF16; }

void require_rne(RoundMode rm) {
  require(rm == RoundMode::NearestEven, "only round-to-nearest-even is supported");
}

// Generic fused multiply-add over possibly different source/destination
// formats: round(a*b + c) with the product formed exactly.  This is the one
// datapath behind fma, fma_widen and vfdotp.
Scalar fma_core(Scalar a, Scalar b, Scalar c, Format dst) {
  const FormatInfo& fa = format_info(a.fmt);
  const FormatInfo& fb = format_info(b.fmt);
  const FormatInfo& fc = format_info(c.fmt);
  const FormatInfo& fd = format_info(dst);

  Unpacked ua = unpack(a, fa);
  Unpacked ub = unpack(b, fb);
  Unpacked uc = unpack(c, fc);

  if (ua.cls == Cls::NaN || ub.cls == Cls::NaN || uc.cls == Cls::NaN)
    return make_qnan(dst);
  bool p_zero = ua.cls == Cls::Zero || ub.cls == Cls::Zero;
  bool p_inf = ua.cls == Cls::Inf || ub.cls == Cls::Inf;
  if (p_zero && p_inf) return make_qnan(dst);  // 0 * inf
  bool p_sign = ua.sign != ub.sign;
  if (p_inf) {
    if (uc.cls == Cls::Inf && uc.sign != p_sign) return make_qnan(dst);
    return make_inf(dst, p_sign);
  }
  if (uc.cls == Cls::Inf) return make_inf(dst, uc.sign);
  if (p_zero) {
    if (uc.cls == Cls::Zero) {
      // Sum of two signed zeros: equal signs keep it, else +0 under RNE.
      return make_zero(dst, p_sign && uc.sign);
    }
    // c + (+/-0) = c, re-rounded into the destination format.
    return round_pack(uc.sign, uc.sig, uc.scale, false, fd, dst);
  }
  u128 prod = static_cast<u128>(ua.sig) * ub.sig;
  int prod_scale = ua.scale + ub.scale;
  if (uc.cls == Cls::Zero) {
    return round_pack(p_sign, prod, prod_scale, false, fd, dst);
  }
  Combined s = combine(p_sign, prod, prod_scale, uc.sign, uc.sig, uc.scale);
  return round_pack(s.sign, s.mag, s.scale, s.sticky, fd, dst);
}

u64 isqrt_floor(u64 m) {
  u64 r = static_cast<u64>(std::sqrt(static_cast<double>(m)));
  while (r != 0 && r * r > m) --r;
  while ((r + 1) * (r + 1) <= m) ++r;
  return r;
}

}  // namespace

const FormatInfo& format_info(Format fmt) {
  return kFormats[static_cast<int>(fmt)];
}

const char* format_name(Format fmt) {
  switch (fmt) {
    case Format::F32: return "f32";
    case Format::F16: return "f16";
    case Format::BF16: return "bf16";
  }
  return "?";
}

bool parse_format(const std::string& s, Format& out) {
  if (s == "f32" || s == "F32") { out = Format::F32; return true; }
  if (s == "f16" || s == "F16") { out = Format::F16; return true; }
  if (s == "bf16" || s == "BF16") { out = Format::BF16; return true; }
  return false;
}

bool is_nan(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  return (v.bits & fi.exp_mask) == fi.exp_mask && (v.bits & fi.sig_mask) != 0;
}

bool is_inf(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  return (v.bits & fi.abs_mask) == fi.inf;
}

bool is_zero(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  return (v.bits & fi.abs_mask) == 0;
}

bool is_subnormal(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  return (v.bits & fi.exp_mask) == 0 && (v.bits & fi.sig_mask) != 0;
}

bool is_finite(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  return (v.bits & fi.exp_mask) != fi.exp_mask;
}

bool sign_bit(Scalar v) {
  return (v.bits & format_info(v.fmt).sign_mask) != 0;
}

Scalar make_zero(Format fmt, bool negative) {
  return Scalar{fmt, negative ? format_info(fmt).sign_mask : 0};
}

Scalar make_inf(Format fmt, bool negative) {
  const FormatInfo& fi = format_info(fmt);
  return Scalar{fmt, fi.inf | (negative ? fi.sign_mask : 0)};
}

Scalar make_qnan(Format fmt) { return Scalar{fmt, format_info(fmt).qnan}; }

double to_double(Scalar v) {
  const FormatInfo& fi = format_info(v.fmt);
  Unpacked u = unpack(v, fi);
  switch (u.cls) {
    case Cls::Zero: return u.sign ? -0.0 : 0.0;
    case Cls::Inf: return u.sign ? -HUGE_VAL : HUGE_VAL;
    case Cls::NaN: return std::numeric_limits<double>::quiet_NaN();
    case Cls::Finite: break;
  }
  double m = std::ldexp(static_cast<double>(u.sig), u.scale);
  return u.sign ? -m : m;
}

Scalar from_double(Format fmt, double x) {
  const FormatInfo& fi = format_info(fmt);
  u64 bits;
  static_assert(sizeof(double) == sizeof(u64));
  std::memcpy(&bits, &x, sizeof(bits));
  bool sign = (bits >> 63) != 0;
  u64 exp = (bits >> 52) & 0x7FF;
  u64 frac = bits & ((static_cast<u64>(1) << 52) - 1);
  if (exp == 0x7FF) {
    return frac ? make_qnan(fmt) : make_inf(fmt, sign);
  }
  if (exp == 0 && frac == 0) return make_zero(fmt, sign);
  u64 sig;
  int scale;
  if (exp == 0) {
    int shift = 52 - (63 - std::countl_zero(frac));
    sig = frac << shift;
    scale = -1022 - shift - 52;
  } else {
    sig = frac | (static_cast<u64>(1) << 52);
    scale = static_cast<int>(exp) - 1023 - 52;
  }
  return round_pack(sign, sig, scale, false, fi, fmt);
}

std::string to_hex(Scalar v) {
  char buf[16];
  int width = format_info(v.fmt).width / 4;
  std::snprintf(buf, sizeof(buf), "0x%0*X", width, v.bits);
  return std::string(buf);
}

Scalar arith(ArithOp op, Format fmt, Scalar a, Scalar b, RoundMode rm) {
  require_rne(rm);
  require_fmt(a, fmt, "arith: operand a format mismatch");
  require_fmt(b, fmt, "arith: operand b format mismatch");
  const FormatInfo& fi = format_info(fmt);

  if (op == ArithOp::Sub) {
    b.bits ^= fi.sign_mask;
    op = ArithOp::Add;
  }

  Unpacked ua = unpack(a, fi);
  Unpacked ub = unpack(b, fi);

  if (op == ArithOp::Mul) {
    if (ua.cls == Cls::NaN || ub.cls == Cls::NaN) return make_qnan(fmt);
    bool sign = ua.sign != ub.sign;
    if (ua.cls == Cls::Inf || ub.cls == Cls::Inf) {
      if (ua.cls == Cls::Zero || ub.cls == Cls::Zero) return make_qnan(fmt);
      return make_inf(fmt, sign);
    }
    if (ua.cls == Cls::Zero || ub.cls == Cls::Zero) return make_zero(fmt, sign);
    u128 prod = static_cast<u128>(ua.sig) * ub.sig;
    return round_pack(sign, prod, ua.scale + ub.scale, false, fi, fmt);
  }

  // Addition.
  if (ua.cls == Cls::NaN || ub.cls == Cls::NaN) return make_qnan(fmt);
  if (ua.cls == Cls::Inf || ub.cls == Cls::Inf) {
    if (ua.cls == Cls::Inf && ub.cls == Cls::Inf && ua.sign != ub.sign)
      return make_qnan(fmt);
    return make_inf(fmt, ua.cls == Cls::Inf ? ua.sign : ub.sign);
  }
  if (ua.cls == Cls::Zero && ub.cls == Cls::Zero) {
    return make_zero(fmt, ua.sign && ub.sign);
  }
  if (ua.cls == Cls::Zero) return b;
  if (ub.cls == Cls::Zero) return a;
  Combined s = combine(ua.sign, ua.sig, ua.scale, ub.sign, ub.sig, ub.scale);
  return round_pack(s.sign, s.mag, s.scale, s.sticky, fi, fmt);
}

Scalar add(Format fmt, Scalar a, Scalar b) { return arith(ArithOp::Add, fmt, a, b); }
Scalar sub(Format fmt, Scalar a, Scalar b) { return arith(ArithOp::Sub, fmt, a, b); }
Scalar mul(Format fmt, Scalar a, Scalar b) { return arith(ArithOp::Mul, fmt, a, b); }

Scalar fma(Format fmt, Scalar a, Scalar b, Scalar c, RoundMode rm) {
  require_rne(rm);
  require_fmt(a, fmt, "fma: operand a format mismatch");
  require_fmt(b, fmt, "fma: operand b format mismatch");
  require_fmt(c, fmt, "fma: operand c format mismatch");
  return fma_core(a, b, c, fmt);
}

Scalar fma_widen(Format fmt16, Scalar a, Scalar b, Scalar c, RoundMode rm) {
  require_rne(rm);
  require(is16(fmt16), "fma_widen: source format must be 16-bit");
  require_fmt(a, fmt16, "fma_widen: operand a format mismatch");
  require_fmt(b, fmt16, "fma_widen: operand b format mismatch");
  require_fmt(c, Format::F32, "fma_widen: accumulator must be F32");
  return fma_core(a, b, c, Format::F32);
}

Scalar divsqrt(DivSqrtOp op, Format fmt, Scalar a, std::optional<Scalar> b,
               RoundMode rm) {
  require_rne(rm);
  require_fmt(a, fmt, "divsqrt: operand a format mismatch");
  const FormatInfo& fi = format_info(fmt);

  if (op == DivSqrtOp::Div) {
    require(b.has_value(), "divsqrt: div requires a second operand");
    require_fmt(*b, fmt, "divsqrt: operand b format mismatch");
    Unpacked ua = unpack(a, fi);
    Unpacked ub = unpack(*b, fi);
    if (ua.cls == Cls::NaN || ub.cls == Cls::NaN) return make_qnan(fmt);
    bool sign = ua.sign != ub.sign;
    if (ua.cls == Cls::Inf) {
      if (ub.cls == Cls::Inf) return make_qnan(fmt);
      return make_inf(fmt, sign);
    }
    if (ub.cls == Cls::Inf) return make_zero(fmt, sign);
    if (ua.cls == Cls::Zero) {
      if (ub.cls == Cls::Zero) return make_qnan(fmt);
      return make_zero(fmt, sign);
    }
    if (ub.cls == Cls::Zero) return make_inf(fmt, sign);
    int k = fi.sig_bits + 4;
    u64 num = ua.sig << k;
    u64 q = num / ub.sig;
    bool sticky = (num % ub.sig) != 0;
    int scale = ua.scale - ub.scale - k;
    return round_pack(sign, q, scale, sticky, fi, fmt);
  }

  require(!b.has_value(), "divsqrt: sqrt takes a single operand");
  Unpacked ua = unpack(a, fi);
  if (ua.cls == Cls::NaN) return make_qnan(fmt);
  if (ua.cls == Cls::Zero) return a;  // sqrt(+/-0) = +/-0
  if (ua.sign) return make_qnan(fmt);
  if (ua.cls == Cls::Inf) return a;
  int j = fi.sig_bits + 6;
  if ((ua.scale - j) & 1) j += 1;
  u64 m = ua.sig << j;
  u64 r = isqrt_floor(m);
  bool sticky = r * r != m;
  return round_pack(false, r, (ua.scale - j) / 2, sticky, fi, fmt);
}

Scalar div(Format fmt, Scalar a, Scalar b) {
  return divsqrt(DivSqrtOp::Div, fmt, a, b);
}

Scalar sqrt(Format fmt, Scalar a) { return divsqrt(DivSqrtOp::Sqrt, fmt, a); }

Scalar convert(Format dst, Scalar src, RoundMode rm) {
  require_rne(rm);
  const FormatInfo& fs = format_info(src.fmt);
  const FormatInfo& fd = format_info(dst);
  Unpacked u = unpack(src, fs);
  switch (u.cls) {
    case Cls::NaN: return make_qnan(dst);
    case Cls::Inf: return make_inf(dst, u.sign);
    case Cls::Zero: return make_zero(dst, u.sign);
    case Cls::Finite: break;
  }
  return round_pack(u.sign, u.sig, u.scale, false, fd, dst);
}

bool compare(CmpOp op, Scalar a, Scalar b) {
  require(a.fmt == b.fmt, "compare: operand format mismatch");
  if (is_nan(a) || is_nan(b)) return false;
  double x = to_double(a);
  double y = to_double(b);
  switch (op) {
    case CmpOp::Eq: return x == y;
    case CmpOp::Lt: return x < y;
    case CmpOp::Le: return x <= y;
  }
  return false;
}

Packed16 cast_and_pack(Format fmt16, Scalar a, Scalar b) {
  require(is16(fmt16), "cast_and_pack: lane format must be 16-bit");
  require_fmt(a, Format::F32, "cast_and_pack: operand a must be F32");
  require_fmt(b, Format::F32, "cast_and_pack: operand b must be F32");
  Scalar lo = convert(fmt16, a);
  Scalar hi = convert(fmt16, b);
  return Packed16{fmt16, static_cast<uint16_t>(lo.bits),
                  static_cast<uint16_t>(hi.bits)};
}

Packed16 simd_arith(ArithOp op, Packed16 a, Packed16 b) {
  require(a.fmt == b.fmt, "simd_arith: lane format mismatch");
  Scalar l0 = arith(op, a.fmt, a.lane(0), b.lane(0));
  Scalar l1 = arith(op, a.fmt, a.lane(1), b.lane(1));
  return Packed16{a.fmt, static_cast<uint16_t>(l0.bits),
                  static_cast<uint16_t>(l1.bits)};
}

Packed16 simd_fma(Packed16 a, Packed16 b, Packed16 c) {
  require(a.fmt == b.fmt && b.fmt == c.fmt, "simd_fma: lane format mismatch");
  Scalar l0 = fma(a.fmt, a.lane(0), b.lane(0), c.lane(0));
  Scalar l1 = fma(a.fmt, a.lane(1), b.lane(1), c.lane(1));
  return Packed16{a.fmt, static_cast<uint16_t>(l0.bits),
                  static_cast<uint16_t>(l1.bits)};
}

Packed16 shuffle(Packed16 a, Packed16 b, int sel0, int sel1) {
  require(a.fmt == b.fmt, "shuffle: lane format mismatch");
  require(sel0 >= 0 && sel0 < 4 && sel1 >= 0 && sel1 < 4,
          "shuffle: selector out of range");
  uint16_t pool[4] = {a.lane0, a.lane1, b.lane0, b.lane1};
  return Packed16{a.fmt, pool[sel0], pool[sel1]};
}

Scalar vfdotp(Packed16 a, Packed16 b, Scalar c_f32) {
  require(a.fmt == b.fmt, "vfdotp: lane format mismatch");
  require_fmt(c_f32, Format::F32, "vfdotp: accumulator must be F32");
  Scalar r0 = fma_core(a.lane(0), b.lane(0), c_f32, Format::F32);
  return fma_core(a.lane(1), b.lane(1), r0, Format::F32);
}

}  // namespace tpsim::fp
