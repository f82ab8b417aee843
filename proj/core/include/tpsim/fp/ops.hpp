#pragma once

#include <optional>

#include "tpsim/fp/types.hpp"

// Bit-exact software model of the transprecision FPU datapath.
//
// Semantics implemented by every operation:
//   * round-to-nearest-even only,
//   * full subnormal support on inputs and outputs,
//   * overflow to signed infinity, underflow to signed zero,
//   * any NaN in, or invalid operation, produces the canonical quiet NaN
//     of the result format (payloads are not propagated),
//   * no exception flags.
//
// Mixing formats between operands is a usage error and throws
// std::invalid_argument (except where an operation is explicitly
// mixed-format, e.g. fma_widen and vfdotp which accumulate into F32).

namespace tpsim::fp {

enum class ArithOp : uint8_t { Add, Sub, Mul };
enum class DivSqrtOp : uint8_t { Div, Sqrt };
enum class CmpOp : uint8_t { Eq, Lt, Le };

// a op b, both in fmt.
Scalar arith(ArithOp op, Format fmt, Scalar a, Scalar b,
             RoundMode rm = RoundMode::NearestEven);

Scalar add(Format fmt, Scalar a, Scalar b);
Scalar sub(Format fmt, Scalar a, Scalar b);
Scalar mul(Format fmt, Scalar a, Scalar b);

// Fused a*b + c with a single rounding at the end.
Scalar fma(Format fmt, Scalar a, Scalar b, Scalar c,
           RoundMode rm = RoundMode::NearestEven);

// Widening FMA: a and b are 16-bit (fmt16 = F16 or BF16), c and the result
// are F32.  The product is formed exactly inside the datapath (a product of
// two 11-bit or 8-bit significands always fits in F32's 24-bit significand)
// and a single rounding is applied after the addition.
Scalar fma_widen(Format fmt16, Scalar a, Scalar b, Scalar c,
                 RoundMode rm = RoundMode::NearestEven);

// div: a/b.  sqrt: operand a only (b must not be passed).
Scalar divsqrt(DivSqrtOp op, Format fmt, Scalar a,
               std::optional<Scalar> b = std::nullopt,
               RoundMode rm = RoundMode::NearestEven);

Scalar div(Format fmt, Scalar a, Scalar b);
Scalar sqrt(Format fmt, Scalar a);

// Format conversion with round-to-nearest-even; widening conversions are
// exact, narrowing ones round once.  NaN maps to the canonical quiet NaN of
// the destination.
Scalar convert(Format dst, Scalar src, RoundMode rm = RoundMode::NearestEven);

// Comparison: returns false for any unordered comparison (NaN operand);
// +0 and -0 compare equal.
bool compare(CmpOp op, Scalar a, Scalar b);

// --- Packed-SIMD (two 16-bit lanes in a 32-bit register image) ---

// Narrow two F32 values and place them in adjacent lanes: a -> lane0,
// b -> lane1.  fmt16 selects the lane format.
Packed16 cast_and_pack(Format fmt16, Scalar a, Scalar b);

// Lane-wise arithmetic.
Packed16 simd_arith(ArithOp op, Packed16 a, Packed16 b);
Packed16 simd_fma(Packed16 a, Packed16 b, Packed16 c);

// Lane shuffle: out.lane_i = pool[sel_i] where the pool is
// [a.lane0, a.lane1, b.lane0, b.lane1] and sel_i in [0,4).
Packed16 shuffle(Packed16 a, Packed16 b, int sel0, int sel1);

// Packed dot product accumulating into F32:
//   result = round(round(c + a0*b0) + a1*b1)
// with both products formed exactly in the F32 datapath.
Scalar vfdotp(Packed16 a, Packed16 b, Scalar c_f32);

}  // namespace tpsim::fp
