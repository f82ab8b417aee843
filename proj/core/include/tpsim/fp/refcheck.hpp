#pragma once

#include <optional>

#include "tpsim/fp/ops.hpp"

// Reference arithmetic used to cross-check the datapath model.
//
// Every operation is evaluated in arbitrary-precision arithmetic (MPFR)
// configured with the destination format's precision and exponent range,
// rounding to nearest-even exactly once (with subnormal re-rounding), and
// the result is encoded to bits by a direct encoder that shares no code
// with the softfloat implementation.  Input decoding is likewise local to
// this component, so the two sides can only agree by computing the same
// mathematical result.

namespace tpsim::fp::ref {

Scalar arith(ArithOp op, Format fmt, Scalar a, Scalar b);
Scalar fma(Format fmt, Scalar a, Scalar b, Scalar c);
Scalar fma_widen(Format fmt16, Scalar a, Scalar b, Scalar c);
Scalar divsqrt(DivSqrtOp op, Format fmt, Scalar a,
               std::optional<Scalar> b = std::nullopt);
Scalar convert(Format dst, Scalar src);
Scalar vfdotp(Packed16 a, Packed16 b, Scalar c_f32);

}  // namespace tpsim::fp::ref
