#include "tpsim/timing/timing.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace tpsim::timing {

ClusterConfig ClusterConfig::make(int cores, int fpus, int stages) {
  ClusterConfig c;
  c.n_cores = cores;
  c.n_fpus = fpus;
  c.pipeline_stages = stages;
  c.n_tcdm_banks = 2 * cores;
  c.l2_latency_cycles = 15;
  c.tcdm_bytes = cores * 8 * 1024;  // 64 KiB at 8 cores, 128 KiB at 16
  c.validate();
  return c;
}

std::string ClusterConfig::id() const {
  return std::to_string(n_cores) + "c" + std::to_string(n_fpus) + "f" +
         std::to_string(pipeline_stages) + "p";
}

std::optional<ClusterConfig> ClusterConfig::parse(const std::string& id) {
  int cores = 0, fpus = 0, stages = 0, consumed = 0;
  if (std::sscanf(id.c_str(), "%dc%df%dp%n", &cores, &fpus, &stages,
                  &consumed) != 3 ||
      consumed != static_cast<int>(id.size()))
    return std::nullopt;
  if (cores < 1 || fpus < 1 || fpus > cores || cores % fpus != 0 ||
      stages < 0 || stages > 2)
    return std::nullopt;
  return make(cores, fpus, stages);
}

void ClusterConfig::validate() const {
  auto fail = [](const std::string& why) {
    throw std::invalid_argument("cluster config: " + why);
  };
  if (n_cores < 1) fail("need at least one core");
  if (n_fpus < 1 || n_fpus > n_cores || n_cores % n_fpus != 0)
    fail("FPU count must evenly divide the core count");
  if (pipeline_stages < 0 || pipeline_stages > 2)
    fail("pipeline stages must be 0, 1 or 2");
  if (n_tcdm_banks < 1 || (n_tcdm_banks & (n_tcdm_banks - 1)) != 0)
    fail("TCDM bank count must be a power of two");
  if (l2_latency_cycles < 1) fail("L2 latency must be positive");
  if (tcdm_bytes <= 0) fail("TCDM capacity must be positive");
}

std::vector<ClusterConfig> canonical_configs() {
  std::vector<ClusterConfig> out;
  for (int cores : {8, 16})
    for (int divisor : {4, 2, 1})  // sharing factor 1/4, 1/2, 1/1
      for (int stages : {0, 1, 2})
        out.push_back(ClusterConfig::make(cores, cores / divisor, stages));
  return out;
}

int fpu_map(int core_id, int n_cores, int n_fpus) {
  if (core_id < 0 || core_id >= n_cores)
    throw std::invalid_argument("fpu_map: core id out of range");
  return core_id % n_fpus;
}

int tcdm_bank(uint32_t addr, int n_banks) {
  if (addr % 4 != 0)
    throw std::invalid_argument("tcdm_bank: unaligned address");
  return static_cast<int>((addr / 4) % static_cast<uint32_t>(n_banks));
}

int arbitrate(const std::vector<int>& requesters, int last_grant, int n_ids) {
  if (requesters.empty())
    throw std::invalid_argument("arbitrate: no requesters");
  std::vector<char> want(static_cast<size_t>(n_ids), 0);
  for (int r : requesters) want[static_cast<size_t>(r)] = 1;
  for (int step = 1; step <= n_ids; ++step) {
    const int cand = (last_grant + step) % n_ids;
    if (want[static_cast<size_t>(cand)]) return cand;
  }
  throw std::logic_error("arbitrate: unreachable");
}

int divsqrt_latency(fp::Format f) {
  switch (f) {
    case fp::Format::F32: return 11;
    case fp::Format::F16: return 7;
    case fp::Format::BF16: return 6;
  }
  return 11;
}

namespace {

// An issued FP result travelling to the register file.  `wb` can slip when
// an integer/memory instruction claims the same write-back cycle.
struct PendingFp {
  int dst;
  uint64_t wb;
  uint64_t usable;
  uint64_t nominal_usable;
};

struct CoreState {
  size_t pc = 0;
  bool finished = false;
  bool waiting_barrier = false;
  bool in_l2 = false;
  uint64_t l2_free_at = 0;   // first cycle after the L2 access completes
  uint64_t l2_wb_cycle = 0;  // cycle the L2 data writes back (valid in_l2)
  bool has_l2_wb = false;
  std::vector<uint64_t> reg_ready;
  std::vector<PendingFp> pending;
  Counters ctr;
};

int max_register(const isa::Program& p) {
  int m = -1;
  for (const isa::Instr& in : p.instrs)
    m = std::max({m, in.dst, in.src0, in.src1, in.src2});
  return m;
}

}  // namespace

SimResult simulate(const ClusterConfig& cfg,
                   const std::vector<isa::Program>& programs) {
  cfg.validate();
  const int n = cfg.n_cores;
  if (static_cast<int>(programs.size()) != n)
    throw std::invalid_argument("simulate: need exactly one program per core");
  for (int c = 0; c < n; ++c) {
    isa::validate(programs[c]);
    if (programs[c].core_id != c)
      throw std::invalid_argument("simulate: program order must match ids");
  }

  std::vector<CoreState> st(static_cast<size_t>(n));
  int unfinished = 0;
  for (int c = 0; c < n; ++c) {
    st[c].ctr.core = c;
    st[c].reg_ready.assign(static_cast<size_t>(max_register(programs[c])) + 1,
                           0);
    st[c].finished = programs[c].instrs[0].kind == isa::Kind::End;
    if (!st[c].finished) ++unfinished;
  }

  // Independent round-robin pointers, parked on core 0's predecessor so the
  // very first tie goes to core 0.
  std::vector<int> bank_last(static_cast<size_t>(cfg.n_tcdm_banks), n - 1);
  std::vector<int> fpu_last(static_cast<size_t>(cfg.n_fpus), n - 1);
  int ds_last = n - 1;
  uint64_t ds_free_at = 0;

  int pending_barrier = -1;
  int arrived_count = 0;
  std::vector<char> arrived(static_cast<size_t>(n), 0);
  int finished_count = n - unfinished;

  std::vector<std::vector<int>> bank_req(
      static_cast<size_t>(cfg.n_tcdm_banks));
  std::vector<std::vector<int>> fpu_req(static_cast<size_t>(cfg.n_fpus));
  std::vector<int> ds_req;
  std::vector<int> direct;  // cores committing without arbitration

  uint64_t now = 0;
  while (unfinished > 0) {
    for (auto& v : bank_req) v.clear();
    for (auto& v : fpu_req) v.clear();
    ds_req.clear();
    direct.clear();

    // Phase 1: classify every core, gathering resource requests.  Exactly
    // one counter bucket is charged per core per cycle, which is what makes
    // the conservation invariant structural rather than aspirational.
    for (int c = 0; c < n; ++c) {
      CoreState& s = st[static_cast<size_t>(c)];
      // Retire results whose write-back cycle has safely passed.
      std::erase_if(s.pending,
                    [&](const PendingFp& p) { return p.wb < now; });
      if (s.finished) {
        ++s.ctr.idle;
        continue;
      }
      if (s.waiting_barrier) {
        ++s.ctr.idle;
        continue;
      }
      if (s.in_l2) {
        ++s.ctr.l2_stall;
        if (now + 1 >= s.l2_free_at) s.in_l2 = false;
        continue;
      }
      const isa::Instr& in = programs[c].instrs[s.pc];
      // Operand readiness gates everything else.
      uint64_t wait_until = 0;
      int blocking_reg = -1;
      for (int r : {in.src0, in.src1, in.src2}) {
        if (r >= 0 && s.reg_ready[static_cast<size_t>(r)] > now &&
            s.reg_ready[static_cast<size_t>(r)] > wait_until) {
          wait_until = s.reg_ready[static_cast<size_t>(r)];
          blocking_reg = r;
        }
      }
      if (blocking_reg >= 0) {
        // Within the producer's nominal latency the wait is a plain FPU
        // stall; beyond it the cycles were added by write-back conflicts.
        uint64_t nominal = wait_until;
        for (const PendingFp& p : s.pending)
          if (p.dst == blocking_reg) nominal = p.nominal_usable;
        if (now < nominal)
          ++s.ctr.fpu_stall;
        else
          ++s.ctr.fpu_wb_stall;
        continue;
      }
      switch (in.kind) {
        case isa::Kind::IntOp:
        case isa::Kind::Barrier:
          direct.push_back(c);
          break;
        case isa::Kind::Load:
        case isa::Kind::Store:
          if (in.region == isa::Region::Tcdm)
            bank_req[static_cast<size_t>(
                         tcdm_bank(in.addr, cfg.n_tcdm_banks))]
                .push_back(c);
          else
            direct.push_back(c);  // the L2 port is not arbitrated
          break;
        case isa::Kind::FpOp:
          fpu_req[static_cast<size_t>(fpu_map(c, n, cfg.n_fpus))].push_back(
              c);
          break;
        case isa::Kind::FpDivSqrt:
          if (now < ds_free_at)
            ++s.ctr.fpu_contention;
          else
            ds_req.push_back(c);
          break;
        case isa::Kind::End:
          throw std::logic_error("core parked on end");  // advance() bug
      }
    }

    // Phase 2: arbitration.  Losers are charged and retry next cycle.
    std::vector<int> winners = direct;
    for (int b = 0; b < cfg.n_tcdm_banks; ++b) {
      auto& req = bank_req[static_cast<size_t>(b)];
      if (req.empty()) continue;
      const int g = arbitrate(req, bank_last[static_cast<size_t>(b)], n);
      bank_last[static_cast<size_t>(b)] = g;
      winners.push_back(g);
      for (int c : req)
        if (c != g) ++st[static_cast<size_t>(c)].ctr.tcdm_contention;
    }
    for (int f = 0; f < cfg.n_fpus; ++f) {
      auto& req = fpu_req[static_cast<size_t>(f)];
      if (req.empty()) continue;
      const int g = arbitrate(req, fpu_last[static_cast<size_t>(f)], n);
      fpu_last[static_cast<size_t>(f)] = g;
      winners.push_back(g);
      for (int c : req)
        if (c != g) ++st[static_cast<size_t>(c)].ctr.fpu_contention;
    }
    if (!ds_req.empty()) {
      const int g = arbitrate(ds_req, ds_last, n);
      ds_last = g;
      winners.push_back(g);
      for (int c : ds_req)
        if (c != g) ++st[static_cast<size_t>(c)].ctr.fpu_contention;
    }

    // Phase 3: commit winners (order within the cycle is immaterial).
    std::vector<char> int_mem_wb(static_cast<size_t>(n), 0);
    for (int c : winners) {
      CoreState& s = st[static_cast<size_t>(c)];
      const isa::Instr& in = programs[c].instrs[s.pc];
      ++s.ctr.active;
      switch (in.kind) {
        case isa::Kind::IntOp:
          if (in.dst >= 0) s.reg_ready[static_cast<size_t>(in.dst)] = now + 1;
          int_mem_wb[static_cast<size_t>(c)] = 1;
          break;
        case isa::Kind::Load:
        case isa::Kind::Store:
          if (in.region == isa::Region::Tcdm) {
            if (in.dst >= 0)
              s.reg_ready[static_cast<size_t>(in.dst)] = now + 1;
            int_mem_wb[static_cast<size_t>(c)] = 1;
          } else {
            s.in_l2 = cfg.l2_latency_cycles > 1;
            s.l2_free_at = now + static_cast<uint64_t>(cfg.l2_latency_cycles);
            s.l2_wb_cycle = s.l2_free_at - 1;
            s.has_l2_wb = true;
            if (in.dst >= 0)
              s.reg_ready[static_cast<size_t>(in.dst)] = s.l2_free_at;
          }
          break;
        case isa::Kind::FpOp: {
          const uint64_t wb =
              now + static_cast<uint64_t>(cfg.pipeline_stages);
          s.pending.push_back(PendingFp{in.dst, wb, wb + 1, wb + 1});
          s.reg_ready[static_cast<size_t>(in.dst)] = wb + 1;
          break;
        }
        case isa::Kind::FpDivSqrt: {
          const uint64_t lat =
              static_cast<uint64_t>(divsqrt_latency(in.fmt));
          ds_free_at = now + lat;
          s.pending.push_back(
              PendingFp{in.dst, now + lat - 1, now + lat, now + lat});
          s.reg_ready[static_cast<size_t>(in.dst)] = now + lat;
          break;
        }
        case isa::Kind::Barrier: {
          if (pending_barrier >= 0 && in.barrier_id != pending_barrier)
            throw std::runtime_error(
                "barrier mismatch: core " + std::to_string(c) +
                " reached barrier " + std::to_string(in.barrier_id) +
                " while barrier " + std::to_string(pending_barrier) +
                " is pending");
          if (finished_count > 0)
            throw std::runtime_error(
                "barrier " + std::to_string(in.barrier_id) +
                " can never complete: a core already finished");
          pending_barrier = in.barrier_id;
          arrived[static_cast<size_t>(c)] = 1;
          ++arrived_count;
          s.waiting_barrier = true;
          break;
        }
        case isa::Kind::End:
          throw std::logic_error("end committed");  // unreachable
      }
      ++s.pc;
      // A core waiting at a barrier keeps its End pending until release.
      if (!s.waiting_barrier &&
          programs[c].instrs[s.pc].kind == isa::Kind::End) {
        s.finished = true;
        ++finished_count;
        --unfinished;
        if (pending_barrier >= 0 && !arrived[static_cast<size_t>(c)])
          throw std::runtime_error(
              "barrier " + std::to_string(pending_barrier) +
              " can never complete: core " + std::to_string(c) +
              " finished without reaching it");
      }
    }

    // Write-back port conflicts exist only with a two-stage FP pipeline:
    // an integer or memory write-back in the same cycle bumps the FP
    // result by one cycle (and may do so again next cycle).
    if (cfg.pipeline_stages == 2) {
      for (int c = 0; c < n; ++c) {
        CoreState& s = st[static_cast<size_t>(c)];
        const bool wb_now = int_mem_wb[static_cast<size_t>(c)] ||
                            (s.has_l2_wb && s.l2_wb_cycle == now);
        if (!wb_now) continue;
        for (PendingFp& p : s.pending) {
          if (p.wb == now) {
            ++p.wb;
            ++p.usable;
            s.reg_ready[static_cast<size_t>(p.dst)] = p.usable;
          }
        }
      }
    }

    // Barrier release: the cycle the last core arrives, everyone restarts
    // on the following cycle.
    if (pending_barrier >= 0 && arrived_count == n) {
      pending_barrier = -1;
      arrived_count = 0;
      std::fill(arrived.begin(), arrived.end(), 0);
      for (int c = 0; c < n; ++c) {
        CoreState& s = st[static_cast<size_t>(c)];
        if (!s.waiting_barrier) continue;
        s.waiting_barrier = false;
        if (programs[c].instrs[s.pc].kind == isa::Kind::End) {
          s.finished = true;
          ++finished_count;
          --unfinished;
        }
      }
    }

    ++now;
  }

  SimResult res;
  res.elapsed_cycles = now;
  res.total_flops = 0;
  for (int c = 0; c < n; ++c) {
    Counters& ctr = st[static_cast<size_t>(c)].ctr;
    ctr.total = now;
    assert(ctr.active + ctr.stalls() + ctr.idle == ctr.total);
    res.per_core.push_back(ctr);
    res.total_flops += programs[c].flops;
  }
  return res;
}

std::string counters_csv(const SimResult& r) {
  std::ostringstream os;
  os << "core,total,active,tcdm_contention,l2_stall,fpu_stall,"
        "fpu_contention,fpu_wb_stall,icache_miss\n";
  for (const Counters& c : r.per_core)
    os << c.core << "," << c.total << "," << c.active << ","
       << c.tcdm_contention << "," << c.l2_stall << "," << c.fpu_stall << ","
       << c.fpu_contention << "," << c.fpu_wb_stall << "," << c.icache_miss
       << "\n";
  return os.str();
}

}  // namespace tpsim::timing
