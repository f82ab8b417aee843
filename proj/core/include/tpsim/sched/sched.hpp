#pragma once

#include <cstdint>
#include <vector>

#include "tpsim/isa/isa.hpp"

// Latency-aware list scheduling for straight-line blocks.  Reordering an
// instruction stream to hide FP pipeline latency is a compiler concern, but
// the profitable order depends on the configured pipeline depth, so the
// scheduler takes the stage count as a parameter.

namespace tpsim::sched {

// Dependence structure of one straight-line block (no barriers inside).
// Edges always point from an earlier to a later original index and cover
// register flow (read-after-write, plus write-after-read/write ordering for
// non-SSA blocks) and same-address memory ordering.  `latency` follows the
// timing rules: integer and memory ops take one cycle, pipelined FP ops
// stages+1, divide/sqrt their format's iteration count.
struct DepGraph {
  std::vector<std::vector<int>> succs;
  std::vector<std::vector<int>> preds;
  std::vector<int> latency;
  // Critical-path cost: latency of the node plus the longest path to any
  // exit.  This is the list-scheduling priority.
  std::vector<int64_t> priority;
};

DepGraph build_dep_graph(const std::vector<isa::Instr>& block, int stages);

// Greedy list scheduling: simulate single-issue cycles; each cycle, among
// the dependence-ready instructions whose operands have arrived, issue the
// one with the highest critical-path cost (ties to the lower original
// index).  Dependencies are always preserved.
std::vector<isa::Instr> list_schedule_block(
    const std::vector<isa::Instr>& block, int stages);

// Schedules every barrier-delimited block of the program, then keeps the
// reordering only if it does not lose cycles on a contention-free
// single-core run at the same stage count (greedy heuristics can regress;
// the guard makes "never slower" a guarantee instead of a hope).
isa::Program schedule_program(const isa::Program& p, int stages);

}  // namespace tpsim::sched
