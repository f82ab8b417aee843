#include "tpsim/sched/sched.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>

#include "tpsim/timing/timing.hpp"

namespace tpsim::sched {
namespace {

int node_latency(const isa::Instr& in, int stages) {
  switch (in.kind) {
    case isa::Kind::FpOp:
      return stages + 1;
    case isa::Kind::FpDivSqrt:
      return timing::divsqrt_latency(in.fmt);
    default:
      return 1;
  }
}

}  // namespace

DepGraph build_dep_graph(const std::vector<isa::Instr>& block, int stages) {
  const int n = static_cast<int>(block.size());
  DepGraph g;
  g.succs.resize(static_cast<size_t>(n));
  g.preds.resize(static_cast<size_t>(n));
  g.latency.resize(static_cast<size_t>(n));
  g.priority.assign(static_cast<size_t>(n), 0);

  // Register flow state: the live definition and the reads since it.
  std::unordered_map<int, int> last_def;
  std::unordered_map<int, std::vector<int>> reads_since_def;
  // Memory ordering state per word: the live store and the loads since it.
  std::unordered_map<uint64_t, int> last_store;
  std::unordered_map<uint64_t, std::vector<int>> loads_since_store;

  auto add_edge = [&](int from, int to) {
    if (from == to) return;
    auto& s = g.succs[static_cast<size_t>(from)];
    if (!s.empty() && s.back() == to) return;  // cheap consecutive dedup
    s.push_back(to);
    g.preds[static_cast<size_t>(to)].push_back(from);
  };

  for (int j = 0; j < n; ++j) {
    const isa::Instr& in = block[j];
    g.latency[static_cast<size_t>(j)] = node_latency(in, stages);

    for (int r : {in.src0, in.src1, in.src2}) {
      if (r < 0) continue;
      auto it = last_def.find(r);
      if (it != last_def.end()) add_edge(it->second, j);
      reads_since_def[r].push_back(j);
    }
    if (in.dst >= 0) {
      auto du = last_def.find(in.dst);
      if (du != last_def.end()) add_edge(du->second, j);  // write-after-write
      for (int r : reads_since_def[in.dst]) add_edge(r, j);  // after-read
      reads_since_def[in.dst].clear();
      last_def[in.dst] = j;
    }
    if (in.kind == isa::Kind::Load || in.kind == isa::Kind::Store) {
      const uint64_t k = isa::mem_key(in.region, in.addr);
      auto st = last_store.find(k);
      if (in.kind == isa::Kind::Load) {
        if (st != last_store.end()) add_edge(st->second, j);
        loads_since_store[k].push_back(j);
      } else {
        if (st != last_store.end()) add_edge(st->second, j);
        for (int l : loads_since_store[k]) add_edge(l, j);
        loads_since_store[k].clear();
        last_store[k] = j;
      }
    }
  }

  // Longest path to exit, walking backwards (edges only point forward).
  for (int j = n - 1; j >= 0; --j) {
    int64_t best = 0;
    for (int s : g.succs[static_cast<size_t>(j)])
      best = std::max(best, g.priority[static_cast<size_t>(s)]);
    g.priority[static_cast<size_t>(j)] =
        best + g.latency[static_cast<size_t>(j)];
  }
  return g;
}

std::vector<isa::Instr> list_schedule_block(
    const std::vector<isa::Instr>& block, int stages) {
  const int n = static_cast<int>(block.size());
  if (n <= 1) return block;
  const DepGraph g = build_dep_graph(block, stages);

  // Operand arrival time, finalized once all predecessors are placed: a
  // read-after-write edge delays by the producer's latency, ordering edges
  // only impose sequence (and single issue already provides that).
  std::vector<int64_t> avail(static_cast<size_t>(n), 0);
  std::vector<int> missing(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j)
    missing[static_cast<size_t>(j)] =
        static_cast<int>(g.preds[static_cast<size_t>(j)].size());

  // (priority desc, index asc) among issuable nodes.
  using NowKey = std::pair<int64_t, int>;
  std::priority_queue<NowKey, std::vector<NowKey>, std::less<NowKey>> now;
  auto push_now = [&](int j) {
    now.emplace(g.priority[static_cast<size_t>(j)], -j);
  };
  // (avail asc, index asc) among nodes waiting for operands.
  using FutKey = std::pair<int64_t, int>;
  std::priority_queue<FutKey, std::vector<FutKey>, std::greater<FutKey>> fut;

  int64_t t = 0;
  for (int j = 0; j < n; ++j)
    if (missing[static_cast<size_t>(j)] == 0) fut.emplace(0, j);

  std::vector<isa::Instr> out;
  out.reserve(static_cast<size_t>(n));

  int placed = 0;
  while (placed < n) {
    while (!fut.empty() && fut.top().first <= t) {
      push_now(fut.top().second);
      fut.pop();
    }
    if (now.empty()) {
      t = fut.top().first;
      continue;
    }
    const int j = -now.top().second;
    now.pop();
    out.push_back(block[static_cast<size_t>(j)]);
    ++placed;
    const int64_t done = t + g.latency[static_cast<size_t>(j)];
    ++t;
    for (int s : g.succs[static_cast<size_t>(j)]) {
      // Did j feed a register s reads?  Then its result gates s's issue.
      const isa::Instr& si = block[static_cast<size_t>(s)];
      const bool raw = block[static_cast<size_t>(j)].dst >= 0 &&
                       (si.src0 == block[static_cast<size_t>(j)].dst ||
                        si.src1 == block[static_cast<size_t>(j)].dst ||
                        si.src2 == block[static_cast<size_t>(j)].dst);
      int64_t& a = avail[static_cast<size_t>(s)];
      a = std::max(a, raw ? done : t);
      if (--missing[static_cast<size_t>(s)] == 0)
        fut.emplace(a, s);
    }
  }
  return out;
}

isa::Program schedule_program(const isa::Program& p, int stages) {
  isa::validate(p);
  isa::Program out = p;
  out.instrs.clear();

  // Reorder each barrier-delimited straight-line block independently.
  std::vector<isa::Instr> block;
  for (const isa::Instr& in : p.instrs) {
    if (in.kind == isa::Kind::Barrier || in.kind == isa::Kind::End) {
      auto scheduled = list_schedule_block(block, stages);
      out.instrs.insert(out.instrs.end(), scheduled.begin(), scheduled.end());
      out.instrs.push_back(in);
      block.clear();
    } else {
      block.push_back(in);
    }
  }

  // Non-harm guard: race both orders on a contention-free single core and
  // keep the reordering only when it is at least as fast.
  const timing::ClusterConfig probe =
      timing::ClusterConfig::make(1, 1, stages);
  isa::Program a = p;
  a.core_id = 0;
  isa::Program b = out;
  b.core_id = 0;
  const uint64_t before = timing::simulate(probe, {a}).elapsed_cycles;
  const uint64_t after = timing::simulate(probe, {b}).elapsed_cycles;
  return after <= before ? out : p;
}

}  // namespace tpsim::sched
