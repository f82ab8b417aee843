#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tpsim/fp/ops.hpp"

// Per-core instruction streams for the cluster model.
//
// A Program is a fully unrolled trace: every Load/Store instance carries its
// concrete byte address, so the timing model can resolve banks without a
// register-value machine and the evaluator can replay values exactly.
// Registers are an unbounded virtual set holding 32-bit patterns; 16-bit
// scalars live in the low half-word and packed pairs fill the word.

namespace tpsim::isa {

enum class Kind : uint8_t {
  IntOp,      // integer/address/control work, one cycle, no FPU involvement
  Load,       // memory word read
  Store,      // memory word write
  FpOp,       // pipelined op on the core's shared FPU
  FpDivSqrt,  // iterative op on the cluster's shared divide/sqrt unit
  Barrier,    // blocks until every core reaches the same barrier id
  End,        // terminates the stream (exactly once, last)
};

enum class FpFunc : uint8_t {
  Add, Sub, Mul, Fma, Cmp, Convert, CastPack, Shuffle,
  VAdd, VSub, VMul, VFma, VFdotp,
};

enum class DsFunc : uint8_t { Div, Sqrt };

enum class Region : uint8_t { Tcdm, L2 };

struct Instr {
  Kind kind = Kind::IntOp;
  FpFunc fp = FpFunc::Add;          // when kind == FpOp
  DsFunc ds = DsFunc::Div;          // when kind == FpDivSqrt
  fp::CmpOp cmp = fp::CmpOp::Lt;    // when fp == Cmp
  fp::Format fmt = fp::Format::F32;   // operation format (convert: target)
  fp::Format fmt2 = fp::Format::F32;  // convert only: source format
  bool widen = false;  // Fma only: 16-bit multiplicands, f32 accumulator
  int dst = -1;                     // result register, -1 when none
  int src0 = -1, src1 = -1, src2 = -1;
  uint32_t addr = 0;                // Load/Store byte address (word aligned)
  Region region = Region::Tcdm;     // Load/Store target memory
  uint8_t sel0 = 0, sel1 = 0;       // Shuffle lane selectors (0..3)
  int barrier_id = -1;              // Barrier
};

struct Program {
  int core_id = 0;
  std::vector<Instr> instrs;
  uint64_t flops = 0;  // useful arithmetic work this stream performs
};

// Mechanical flop value of one instruction: 1 per scalar add/sub/mul/div/
// sqrt, 2 per fma, doubled across packed lanes (vfdotp = 4); comparisons,
// conversions, packs and shuffles move or classify bits and count zero.
// Builders that pad a vector lane with neutral work deduct the padding
// themselves, which is why Program::flops is stored rather than derived.
uint64_t instr_flops(const Instr& in);

// Throws std::invalid_argument naming the offending instruction index if the
// stream is malformed: source read before any definition, missing/misplaced
// End, operand shapes inconsistent with the function, unaligned addresses,
// or a negative barrier id.
void validate(const Program& p);

struct StreamStats {
  uint64_t n_fp = 0;     // FpOp + FpDivSqrt
  uint64_t n_mem = 0;    // Load + Store
  uint64_t n_int = 0;    // IntOp
  uint64_t n_counted = 0;  // everything except Barrier and End
  double fp_intensity = 0.0;   // n_fp / n_counted
  double mem_intensity = 0.0;  // n_mem / n_counted
};

StreamStats stream_stats(const Program& p);

// Aggregate statistics over a set of per-core streams (sums the counters,
// recomputes the intensity ratios over the combined totals).
StreamStats cluster_stats(const std::vector<Program>& ps);

// Line-oriented text form, stable across versions; load(dump(p)) == p.
std::string dump(const Program& p);
Program load(std::istream& in);
Program load_string(const std::string& text);

// Flat word memory shared by the evaluator; keys combine region and address
// so TCDM and L2 never alias.
using Memory = std::map<uint64_t, uint32_t>;
uint64_t mem_key(Region r, uint32_t addr);

// Replays one stream in program order and returns the final register file
// (missing loads read as zero).  Barriers are no-ops here: evaluation is
// single-stream and used to check that reordering preserves values.
std::map<int, uint32_t> evaluate(const Program& p, Memory& mem);

// Replays a set of per-core streams against one shared memory, interleaved
// by barrier phase: every core runs up to its next barrier, the ids are
// checked to match, and the next phase starts.  Within a phase the cores'
// stores must not alias another core's loads or stores; the kernel builders
// guarantee that by construction.  Throws std::runtime_error on mismatched
// or unreachable barriers, mirroring the timing model's checks.
void evaluate_cluster(const std::vector<Program>& ps, Memory& mem);

}  // namespace tpsim::isa
