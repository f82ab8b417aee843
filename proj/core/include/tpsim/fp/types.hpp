#pragma once

#include <cstdint>
#include <string>

namespace tpsim::fp {

// Storage formats supported by the shared-FPU datapath.  All values are kept
// as raw bit patterns in the low bits of a uint32_t; 16-bit formats use the
// low 16 bits.
enum class Format : uint8_t {
  F32,   // 8 exponent bits, 23 stored significand bits
  F16,   // 5 exponent bits, 10 stored significand bits
  BF16,  // 8 exponent bits,  7 stored significand bits
};

// Only round-to-nearest-even is implemented; the enum exists so call sites
// state the mode explicitly and anything else is rejected loudly.
enum class RoundMode : uint8_t { NearestEven };

struct FormatInfo {
  int exp_bits;
  int sig_bits;   // stored (trailing) significand bits, hidden bit excluded
  int width;      // total storage width in bits
  int bias;
  int emax;       // unbiased exponent of the largest normal
  int emin;       // unbiased exponent of the smallest normal
  uint32_t exp_mask;
  uint32_t sig_mask;
  uint32_t sign_mask;
  uint32_t abs_mask;
  uint32_t qnan;  // canonical quiet NaN bit pattern
  uint32_t inf;   // +infinity bit pattern
};

const FormatInfo& format_info(Format fmt);
const char* format_name(Format fmt);
bool parse_format(const std::string& s, Format& out);

// A scalar value in one of the three formats.
struct Scalar {
  Format fmt = Format::F32;
  uint32_t bits = 0;

  friend bool operator==(const Scalar&, const Scalar&) = default;
};

// Two 16-bit lanes packed into one 32-bit register image.
// Lane 0 occupies bits [15:0], lane 1 bits [31:16].
struct Packed16 {
  Format fmt = Format::F16;  // lane format; must be F16 or BF16
  uint16_t lane0 = 0;
  uint16_t lane1 = 0;

  uint32_t word() const {
    return static_cast<uint32_t>(lane0) | (static_cast<uint32_t>(lane1) << 16);
  }
  static Packed16 from_word(Format fmt, uint32_t w) {
    return Packed16{fmt, static_cast<uint16_t>(w & 0xFFFFu),
                    static_cast<uint16_t>(w >> 16)};
  }
  Scalar lane(int i) const {
    return Scalar{fmt, i == 0 ? lane0 : lane1};
  }
  friend bool operator==(const Packed16&, const Packed16&) = default;
};

// Classification helpers on raw patterns.
bool is_nan(Scalar v);
bool is_inf(Scalar v);
bool is_zero(Scalar v);
bool is_subnormal(Scalar v);
bool is_finite(Scalar v);
bool sign_bit(Scalar v);

Scalar make_zero(Format fmt, bool negative = false);
Scalar make_inf(Format fmt, bool negative = false);
Scalar make_qnan(Format fmt);

// Exact decode to double (every value of every supported format is exactly
// representable in an IEEE binary64).  NaN decodes to a quiet NaN.
double to_double(Scalar v);

// Round a double to the given format with round-to-nearest-even, full
// subnormal support and overflow to infinity.  Used to prepare inputs and by
// tests; the simulated datapath itself never goes through double.
Scalar from_double(Format fmt, double x);

std::string to_hex(Scalar v);

}  // namespace tpsim::fp
