#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tpsim/isa/isa.hpp"

// Cycle-accurate cluster model: in-order single-issue cores, word-interleaved
// TCDM banks with per-bank round-robin arbitration, statically mapped shared
// FPUs with parametric pipeline depth, one cluster-wide iterative
// divide/sqrt unit, a flat-latency L2 port, and event-unit barriers that
// gate waiting cores off the clock.

namespace tpsim::timing {

struct ClusterConfig {
  int n_cores = 8;
  int n_fpus = 8;            // cores per FPU = n_cores / n_fpus
  int pipeline_stages = 1;   // 0, 1 or 2
  int n_tcdm_banks = 16;     // power of two; default 2x cores
  int l2_latency_cycles = 15;
  int tcdm_bytes = 64 * 1024;  // 64 KiB at 8 cores, 128 KiB at 16

  // Canonical point constructor: picks the default banking, L2 latency and
  // TCDM capacity for a core count.
  static ClusterConfig make(int cores, int fpus, int stages);

  // "16c8f2p" style identity used across sweeps and calibration tables.
  std::string id() const;
  static std::optional<ClusterConfig> parse(const std::string& id);

  // Throws std::invalid_argument on a malformed configuration.
  void validate() const;
};

// The 18-point design space: {8,16} cores x FPU sharing {1/4,1/2,1/1} x
// pipeline stages {0,1,2}, in that nesting order.
std::vector<ClusterConfig> canonical_configs();

struct Counters {
  int core = 0;
  uint64_t total = 0;            // == elapsed cycles, for every core
  uint64_t active = 0;           // committed an instruction
  uint64_t tcdm_contention = 0;  // lost a TCDM bank grant
  uint64_t l2_stall = 0;         // blocked on the L2 port (latency - 1)
  uint64_t fpu_stall = 0;        // waited on an FP result within its latency
  uint64_t fpu_contention = 0;   // lost an FPU grant / div-sqrt unit busy
  uint64_t fpu_wb_stall = 0;     // extra wait from a delayed FP write-back
  uint64_t icache_miss = 0;      // ideal instruction cache: always 0
  uint64_t idle = 0;             // barrier wait / finished early (not in CSV)

  uint64_t stalls() const {
    return tcdm_contention + l2_stall + fpu_stall + fpu_contention +
           fpu_wb_stall + icache_miss;
  }
};

struct SimResult {
  uint64_t elapsed_cycles = 0;
  std::vector<Counters> per_core;
  uint64_t total_flops = 0;
};

// Static FPU assignment: cores interleave over units (core_id mod n_fpus),
// so with 8 cores and 4 units, unit 0 serves cores 0 and 4.
int fpu_map(int core_id, int n_cores, int n_fpus);

// Cycles the iterative divide/sqrt unit is held per operation: 11 (f32),
// 7 (f16), 6 (bf16).
int divsqrt_latency(fp::Format f);

// Word-interleaved bank selection; addr must be word aligned.
int tcdm_bank(uint32_t addr, int n_banks);

// Fair round-robin grant: first requester strictly after last_grant in
// cyclic id order.  `requesters` need not be sorted; ids are < n_ids.
int arbitrate(const std::vector<int>& requesters, int last_grant, int n_ids);

// Runs every program to completion (one per core, index == core id) and
// returns per-core counters satisfying: active + stalls + idle == total ==
// elapsed_cycles.  Throws std::runtime_error naming the barrier id when the
// streams' barrier sequences cannot all meet.
SimResult simulate(const ClusterConfig& cfg,
                   const std::vector<isa::Program>& programs);

// One row per core, fields in Counters order (idle is derived, not listed).
std::string counters_csv(const SimResult& r);

}  // namespace tpsim::timing
