#include "tpsim/fp/refcheck.hpp"

#include <mpfr.h>

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace tpsim::fp::ref {
namespace {

// Exponent range for MPFR's IEEE-interchange emulation.  MPFR represents a
// value as m * 2^e with m in [0.5, 1), so the smallest positive subnormal
// 2^(emin_fmt - sig_bits) corresponds to an MPFR exponent of
// emin_fmt - sig_bits + 1, and the largest normal magnitude is just below
// 2^(emax_fmt + 1).
struct MpfrRange {
  mpfr_prec_t prec;
  mpfr_exp_t emin;
  mpfr_exp_t emax;
};

MpfrRange range_of(Format fmt) {
  const FormatInfo& fi = format_info(fmt);
  MpfrRange r;
  r.prec = fi.sig_bits + 1;              // including the hidden bit
  r.emin = fi.emin - fi.sig_bits + 1;
  r.emax = fi.emax + 1;
  return r;
}

// Decodes a scalar to a double without going through the softfloat code.
// All three formats embed exactly in double (<= 24 significant bits,
// exponents within double's range), so this is exact.
double decode(Scalar s) {
  const FormatInfo& fi = format_info(s.fmt);
  const uint32_t frac = s.bits & fi.sig_mask;
  const uint32_t expf = (s.bits >> fi.sig_bits) & ((1u << fi.exp_bits) - 1);
  const bool neg = (s.bits & fi.sign_mask) != 0;
  double mag;
  if (expf == (1u << fi.exp_bits) - 1) {
    mag = frac ? std::numeric_limits<double>::quiet_NaN()
               : std::numeric_limits<double>::infinity();
  } else if (expf == 0) {
    mag = std::ldexp(static_cast<double>(frac), fi.emin - fi.sig_bits);
  } else {
    const double m = 1.0 + std::ldexp(static_cast<double>(frac), -fi.sig_bits);
    mag = std::ldexp(m, static_cast<int>(expf) - fi.bias);
  }
  return neg ? -mag : mag;
}

// Encodes an MPFR value that is already rounded to `fmt` (precision and
// exponent range enforced, subnormals re-rounded).  Purely a re-encoding:
// any rounding needed here would indicate a bug, so integrality is asserted.
Scalar encode(Format fmt, mpfr_srcptr r) {
  const FormatInfo& fi = format_info(fmt);
  if (mpfr_nan_p(r)) return make_qnan(fmt);
  const uint32_t sign = mpfr_signbit(r) ? fi.sign_mask : 0u;
  if (mpfr_inf_p(r)) return Scalar{fmt, sign | fi.inf};
  if (mpfr_zero_p(r)) return Scalar{fmt, sign};

  const double d = std::fabs(mpfr_get_d(r, MPFR_RNDN));  // exact by range
  int e2;
  std::frexp(d, &e2);
  const int msb = e2 - 1;  // d in [2^msb, 2^(msb+1))
  uint32_t bits;
  if (msb < fi.emin) {
    // Subnormal: frac counts multiples of the subnormal ulp.
    const double q = std::ldexp(d, fi.sig_bits - fi.emin);
    assert(q == std::floor(q) && q < std::ldexp(1.0, fi.sig_bits));
    bits = static_cast<uint32_t>(q);
  } else {
    const double m = std::ldexp(d, -msb) - 1.0;  // in [0, 1)
    const double q = std::ldexp(m, fi.sig_bits);
    assert(q == std::floor(q));
    bits = (static_cast<uint32_t>(msb + fi.bias) << fi.sig_bits) |
           static_cast<uint32_t>(q);
  }
  return Scalar{fmt, sign | bits};
}

class Var {
 public:
  explicit Var(mpfr_prec_t prec) { mpfr_init2(v_, prec); }
  ~Var() { mpfr_clear(v_); }
  Var(const Var&) = delete;
  Var& operator=(const Var&) = delete;
  mpfr_ptr get() { return v_; }

 private:
  mpfr_t v_;
};

// Runs `op` with the destination format's exponent range in effect and
// finishes the rounding (range check + subnormal re-rounding).  The input
// variables must be set up by the caller *before* this runs; doubles hold
// all source operands exactly, so inputs use 53-bit precision.
template <typename Op>
Scalar rounded(Format fmt, Op&& op) {
  const MpfrRange rg = range_of(fmt);
  const mpfr_exp_t save_emin = mpfr_get_emin();
  const mpfr_exp_t save_emax = mpfr_get_emax();
  mpfr_set_emin(rg.emin);
  mpfr_set_emax(rg.emax);
  Var res(rg.prec);
  int t = op(res.get());
  t = mpfr_check_range(res.get(), t, MPFR_RNDN);
  mpfr_subnormalize(res.get(), t, MPFR_RNDN);
  Scalar out = encode(fmt, res.get());
  mpfr_set_emin(save_emin);
  mpfr_set_emax(save_emax);
  return out;
}

}  // namespace

Scalar arith(ArithOp op, Format fmt, Scalar a, Scalar b) {
  if (a.fmt != fmt || b.fmt != fmt)
    throw std::invalid_argument("ref::arith: operand format mismatch");
  Var x(53), y(53);
  mpfr_set_d(x.get(), decode(a), MPFR_RNDN);
  mpfr_set_d(y.get(), decode(b), MPFR_RNDN);
  return rounded(fmt, [&](mpfr_ptr r) {
    switch (op) {
      case ArithOp::Add: return mpfr_add(r, x.get(), y.get(), MPFR_RNDN);
      case ArithOp::Sub: return mpfr_sub(r, x.get(), y.get(), MPFR_RNDN);
      case ArithOp::Mul: return mpfr_mul(r, x.get(), y.get(), MPFR_RNDN);
    }
    throw std::invalid_argument("ref::arith: bad op");
  });
}

Scalar fma(Format fmt, Scalar a, Scalar b, Scalar c) {
  if (a.fmt != fmt || b.fmt != fmt || c.fmt != fmt)
    throw std::invalid_argument("ref::fma: operand format mismatch");
  Var x(53), y(53), z(53);
  mpfr_set_d(x.get(), decode(a), MPFR_RNDN);
  mpfr_set_d(y.get(), decode(b), MPFR_RNDN);
  mpfr_set_d(z.get(), decode(c), MPFR_RNDN);
  return rounded(fmt, [&](mpfr_ptr r) {
    return mpfr_fma(r, x.get(), y.get(), z.get(), MPFR_RNDN);
  });
}

Scalar fma_widen(Format fmt16, Scalar a, Scalar b, Scalar c) {
  if (fmt16 == Format::F32 || a.fmt != fmt16 || b.fmt != fmt16 ||
      c.fmt != Format::F32)
    throw std::invalid_argument("ref::fma_widen: operand format mismatch");
  Var x(53), y(53), z(53);
  mpfr_set_d(x.get(), decode(a), MPFR_RNDN);
  mpfr_set_d(y.get(), decode(b), MPFR_RNDN);
  mpfr_set_d(z.get(), decode(c), MPFR_RNDN);
  return rounded(Format::F32, [&](mpfr_ptr r) {
    return mpfr_fma(r, x.get(), y.get(), z.get(), MPFR_RNDN);
  });
}

Scalar divsqrt(DivSqrtOp op, Format fmt, Scalar a, std::optional<Scalar> b) {
  if (a.fmt != fmt)
    throw std::invalid_argument("ref::divsqrt: operand format mismatch");
  Var x(53), y(53);
  mpfr_set_d(x.get(), decode(a), MPFR_RNDN);
  if (op == DivSqrtOp::Div) {
    if (!b || b->fmt != fmt)
      throw std::invalid_argument("ref::divsqrt: div needs matching divisor");
    mpfr_set_d(y.get(), decode(*b), MPFR_RNDN);
    return rounded(fmt, [&](mpfr_ptr r) {
      return mpfr_div(r, x.get(), y.get(), MPFR_RNDN);
    });
  }
  return rounded(
      fmt, [&](mpfr_ptr r) { return mpfr_sqrt(r, x.get(), MPFR_RNDN); });
}

Scalar convert(Format dst, Scalar src) {
  Var x(53);
  mpfr_set_d(x.get(), decode(src), MPFR_RNDN);
  return rounded(
      dst, [&](mpfr_ptr r) { return mpfr_set(r, x.get(), MPFR_RNDN); });
}

Scalar vfdotp(Packed16 a, Packed16 b, Scalar c_f32) {
  if (a.fmt != b.fmt || a.fmt == Format::F32 || c_f32.fmt != Format::F32)
    throw std::invalid_argument("ref::vfdotp: operand format mismatch");
  const Scalar t = ref::fma_widen(a.fmt, Scalar{a.fmt, a.lane0},
                                  Scalar{b.fmt, b.lane0}, c_f32);
  if (is_nan(t)) {
    // Keep NaN canonical through the second step.
    return ref::fma_widen(a.fmt, Scalar{a.fmt, a.lane1},
                          Scalar{b.fmt, b.lane1}, make_qnan(Format::F32));
  }
  return ref::fma_widen(a.fmt, Scalar{a.fmt, a.lane1}, Scalar{b.fmt, b.lane1},
                        t);
}

}  // namespace tpsim::fp::ref
