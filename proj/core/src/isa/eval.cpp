#include <stdexcept>

#include "tpsim/isa/isa.hpp"

// Value-level replay of one instruction stream.  The timing model never
// looks at values; this evaluator exists so tests can prove that program
// transformations (scheduling, padding) leave every stored result
// bit-identical, and so kernel emitters can be checked against independent
// references.

namespace tpsim::isa {
namespace {

uint32_t lane_mask(fp::Format f) {
  return f == fp::Format::F32 ? 0xFFFFFFFFu : 0xFFFFu;
}

}  // namespace

std::map<int, uint32_t> evaluate(const Program& p, Memory& mem) {
  validate(p);
  std::map<int, uint32_t> regs;
  auto rd = [&](int r) -> uint32_t {
    auto it = regs.find(r);
    if (it == regs.end())
      throw std::logic_error("read of undefined register");  // validate() bug
    return it->second;
  };
  auto scalar = [&](int r, fp::Format f) {
    return fp::Scalar{f, rd(r) & lane_mask(f)};
  };
  auto packed = [&](int r, fp::Format f) {
    return fp::Packed16::from_word(f, rd(r));
  };

  for (const Instr& in : p.instrs) {
    switch (in.kind) {
      case Kind::IntOp:
        if (in.dst >= 0) regs[in.dst] = 0;
        break;
      case Kind::Load: {
        auto it = mem.find(mem_key(in.region, in.addr));
        regs[in.dst] = it == mem.end() ? 0u : it->second;
        break;
      }
      case Kind::Store:
        mem[mem_key(in.region, in.addr)] = rd(in.src0);
        break;
      case Kind::FpDivSqrt: {
        const fp::Scalar r =
            in.ds == DsFunc::Div
                ? fp::div(in.fmt, scalar(in.src0, in.fmt),
                          scalar(in.src1, in.fmt))
                : fp::sqrt(in.fmt, scalar(in.src0, in.fmt));
        regs[in.dst] = r.bits;
        break;
      }
      case Kind::FpOp:
        switch (in.fp) {
          case FpFunc::Add:
          case FpFunc::Sub:
          case FpFunc::Mul: {
            const fp::ArithOp op = in.fp == FpFunc::Add ? fp::ArithOp::Add
                                   : in.fp == FpFunc::Sub ? fp::ArithOp::Sub
                                                          : fp::ArithOp::Mul;
            regs[in.dst] = fp::arith(op, in.fmt, scalar(in.src0, in.fmt),
                                     scalar(in.src1, in.fmt))
                               .bits;
            break;
          }
          case FpFunc::Fma:
            if (in.widen) {
              regs[in.dst] =
                  fp::fma_widen(in.fmt, scalar(in.src0, in.fmt),
                                scalar(in.src1, in.fmt),
                                scalar(in.src2, fp::Format::F32))
                      .bits;
            } else {
              regs[in.dst] =
                  fp::fma(in.fmt, scalar(in.src0, in.fmt),
                          scalar(in.src1, in.fmt), scalar(in.src2, in.fmt))
                      .bits;
            }
            break;
          case FpFunc::Cmp:
            regs[in.dst] = fp::compare(in.cmp, scalar(in.src0, in.fmt),
                                       scalar(in.src1, in.fmt))
                               ? 1u
                               : 0u;
            break;
          case FpFunc::Convert:
            regs[in.dst] =
                fp::convert(in.fmt, scalar(in.src0, in.fmt2)).bits;
            break;
          case FpFunc::CastPack:
            regs[in.dst] = fp::cast_and_pack(in.fmt,
                                             scalar(in.src0, fp::Format::F32),
                                             scalar(in.src1, fp::Format::F32))
                               .word();
            break;
          case FpFunc::Shuffle:
            regs[in.dst] = fp::shuffle(packed(in.src0, in.fmt),
                                       packed(in.src1, in.fmt), in.sel0,
                                       in.sel1)
                               .word();
            break;
          case FpFunc::VAdd:
          case FpFunc::VSub:
          case FpFunc::VMul: {
            const fp::ArithOp op = in.fp == FpFunc::VAdd ? fp::ArithOp::Add
                                   : in.fp == FpFunc::VSub ? fp::ArithOp::Sub
                                                           : fp::ArithOp::Mul;
            regs[in.dst] = fp::simd_arith(op, packed(in.src0, in.fmt),
                                          packed(in.src1, in.fmt))
                               .word();
            break;
          }
          case FpFunc::VFma:
            regs[in.dst] = fp::simd_fma(packed(in.src0, in.fmt),
                                        packed(in.src1, in.fmt),
                                        packed(in.src2, in.fmt))
                               .word();
            break;
          case FpFunc::VFdotp:
            regs[in.dst] = fp::vfdotp(packed(in.src0, in.fmt),
                                      packed(in.src1, in.fmt),
                                      scalar(in.src2, fp::Format::F32))
                               .bits;
            break;
        }
        break;
      case Kind::Barrier:
      case Kind::End:
        break;
    }
  }
  return regs;
}

}  // namespace tpsim::isa
