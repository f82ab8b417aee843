#include "tpsim/isa/isa.hpp"

#include <istream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tpsim::isa {
namespace {

bool is_vector_func(FpFunc f) {
  switch (f) {
    case FpFunc::CastPack:
    case FpFunc::Shuffle:
    case FpFunc::VAdd:
    case FpFunc::VSub:
    case FpFunc::VMul:
    case FpFunc::VFma:
    case FpFunc::VFdotp:
      return true;
    default:
      return false;
  }
}

int n_sources(const Instr& in) {
  switch (in.kind) {
    case Kind::IntOp:
      return 0;  // sources optional, checked separately
    case Kind::Load:
      return 0;
    case Kind::Store:
      return 1;
    case Kind::FpDivSqrt:
      return in.ds == DsFunc::Div ? 2 : 1;
    case Kind::FpOp:
      switch (in.fp) {
        case FpFunc::Convert:
          return 1;
        case FpFunc::Fma:
        case FpFunc::VFma:
        case FpFunc::VFdotp:
          return 3;
        default:
          return 2;
      }
    default:
      return 0;
  }
}

bool writes_dst(const Instr& in) {
  switch (in.kind) {
    case Kind::Load:
    case Kind::FpOp:
    case Kind::FpDivSqrt:
      return true;
    case Kind::IntOp:
      return in.dst >= 0;  // optional
    default:
      return false;
  }
}

[[noreturn]] void bad(size_t idx, const std::string& why) {
  throw std::invalid_argument("instruction " + std::to_string(idx) + ": " +
                              why);
}

const char* fp_name(FpFunc f) {
  switch (f) {
    case FpFunc::Add: return "add";
    case FpFunc::Sub: return "sub";
    case FpFunc::Mul: return "mul";
    case FpFunc::Fma: return "fma";
    case FpFunc::Cmp: return "cmp";
    case FpFunc::Convert: return "convert";
    case FpFunc::CastPack: return "castpack";
    case FpFunc::Shuffle: return "shuffle";
    case FpFunc::VAdd: return "vadd";
    case FpFunc::VSub: return "vsub";
    case FpFunc::VMul: return "vmul";
    case FpFunc::VFma: return "vfma";
    case FpFunc::VFdotp: return "vfdotp";
  }
  return "?";
}

bool parse_fp_func(const std::string& s, FpFunc& out) {
  for (FpFunc f : {FpFunc::Add, FpFunc::Sub, FpFunc::Mul, FpFunc::Fma,
                   FpFunc::Cmp, FpFunc::Convert, FpFunc::CastPack,
                   FpFunc::Shuffle, FpFunc::VAdd, FpFunc::VSub, FpFunc::VMul,
                   FpFunc::VFma, FpFunc::VFdotp}) {
    if (s == fp_name(f)) {
      out = f;
      return true;
    }
  }
  return false;
}

const char* cmp_name(fp::CmpOp c) {
  switch (c) {
    case fp::CmpOp::Eq: return "eq";
    case fp::CmpOp::Lt: return "lt";
    case fp::CmpOp::Le: return "le";
  }
  return "?";
}

}  // namespace

uint64_t instr_flops(const Instr& in) {
  if (in.kind == Kind::FpDivSqrt) return 1;
  if (in.kind != Kind::FpOp) return 0;
  switch (in.fp) {
    case FpFunc::Add:
    case FpFunc::Sub:
    case FpFunc::Mul:
      return 1;
    case FpFunc::Fma:
      return 2;
    case FpFunc::VAdd:
    case FpFunc::VSub:
    case FpFunc::VMul:
      return 2;
    case FpFunc::VFma:
    case FpFunc::VFdotp:
      return 4;
    default:
      return 0;  // cmp, convert, castpack, shuffle
  }
}

void validate(const Program& p) {
  if (p.instrs.empty()) throw std::invalid_argument("empty program");
  std::unordered_set<int> defined;
  for (size_t i = 0; i < p.instrs.size(); ++i) {
    const Instr& in = p.instrs[i];
    const bool last = (i + 1 == p.instrs.size());
    if ((in.kind == Kind::End) != last)
      bad(i, last ? "stream does not finish with end"
                  : "end before the final instruction");
    if (in.kind == Kind::End) break;

    if (in.kind == Kind::Barrier) {
      if (in.barrier_id < 0) bad(i, "negative barrier id");
      continue;
    }
    if (in.kind == Kind::Load || in.kind == Kind::Store) {
      if (in.addr % 4 != 0) bad(i, "unaligned word address");
    }

    // Operand shape.
    if (in.kind == Kind::FpOp) {
      const bool vec = is_vector_func(in.fp);
      if (vec && in.fmt == fp::Format::F32)
        bad(i, "packed function with a 32-bit lane format");
      if (in.widen && in.fp != FpFunc::Fma)
        bad(i, "widen applies only to fma");
      if (in.widen && in.fmt == fp::Format::F32)
        bad(i, "widening fma requires a 16-bit format");
      if (in.fp == FpFunc::Convert && in.fmt == in.fmt2)
        bad(i, "convert between identical formats");
      if (in.fp == FpFunc::Shuffle && (in.sel0 > 3 || in.sel1 > 3))
        bad(i, "shuffle selector out of range");
    }

    // Register discipline: every read must follow a definition.
    const int need = n_sources(in);
    const int srcs[3] = {in.src0, in.src1, in.src2};
    for (int s = 0; s < 3; ++s) {
      if (s < need && srcs[s] < 0) bad(i, "missing source operand");
      if (srcs[s] >= 0 && !defined.count(srcs[s]))
        bad(i, "register r" + std::to_string(srcs[s]) +
                   " read before definition");
    }
    if (writes_dst(in)) {
      if (in.dst < 0 && in.kind != Kind::IntOp) bad(i, "missing destination");
      if (in.dst >= 0) defined.insert(in.dst);
    } else if (in.dst >= 0) {
      bad(i, "destination on a non-writing instruction");
    }
  }
}

StreamStats stream_stats(const Program& p) {
  StreamStats st;
  for (const Instr& in : p.instrs) {
    switch (in.kind) {
      case Kind::FpOp:
      case Kind::FpDivSqrt:
        ++st.n_fp;
        ++st.n_counted;
        break;
      case Kind::Load:
      case Kind::Store:
        ++st.n_mem;
        ++st.n_counted;
        break;
      case Kind::IntOp:
        ++st.n_int;
        ++st.n_counted;
        break;
      case Kind::Barrier:
      case Kind::End:
        break;  // synchronization framing, not issue work
    }
  }
  if (st.n_counted) {
    st.fp_intensity = double(st.n_fp) / double(st.n_counted);
    st.mem_intensity = double(st.n_mem) / double(st.n_counted);
  }
  return st;
}

std::string dump(const Program& p) {
  std::ostringstream os;
  os << "core " << p.core_id << "\n";
  os << "flops " << p.flops << "\n";
  for (const Instr& in : p.instrs) {
    switch (in.kind) {
      case Kind::IntOp:
        os << "int";
        if (in.dst >= 0) os << " d" << in.dst;
        if (in.src0 >= 0) os << " s" << in.src0;
        if (in.src1 >= 0) os << " s" << in.src1;
        break;
      case Kind::Load:
        os << "load " << (in.region == Region::Tcdm ? "tcdm" : "l2") << " "
           << in.addr << " d" << in.dst;
        break;
      case Kind::Store:
        os << "store " << (in.region == Region::Tcdm ? "tcdm" : "l2") << " "
           << in.addr << " s" << in.src0;
        break;
      case Kind::FpOp:
        os << "fp " << fp_name(in.fp);
        if (in.fp == FpFunc::Cmp) os << "." << cmp_name(in.cmp);
        if (in.fp == FpFunc::Fma && in.widen) os << ".w";
        os << " " << fp::format_name(in.fmt);
        if (in.fp == FpFunc::Convert) os << " " << fp::format_name(in.fmt2);
        os << " d" << in.dst;
        if (in.src0 >= 0) os << " s" << in.src0;
        if (in.src1 >= 0) os << " s" << in.src1;
        if (in.src2 >= 0) os << " s" << in.src2;
        if (in.fp == FpFunc::Shuffle)
          os << " " << int(in.sel0) << " " << int(in.sel1);
        break;
      case Kind::FpDivSqrt:
        os << "divsqrt " << (in.ds == DsFunc::Div ? "div" : "sqrt") << " "
           << fp::format_name(in.fmt) << " d" << in.dst << " s" << in.src0;
        if (in.ds == DsFunc::Div) os << " s" << in.src1;
        break;
      case Kind::Barrier:
        os << "barrier " << in.barrier_id;
        break;
      case Kind::End:
        os << "end";
        break;
    }
    os << "\n";
  }
  return os.str();
}

namespace {

int parse_reg(const std::string& tok, char prefix, size_t line_no) {
  if (tok.size() < 2 || tok[0] != prefix)
    throw std::invalid_argument("line " + std::to_string(line_no) +
                                ": expected register, got '" + tok + "'");
  return std::stoi(tok.substr(1));
}

fp::Format parse_fmt(const std::string& tok, size_t line_no) {
  fp::Format f;
  if (!fp::parse_format(tok, f))
    throw std::invalid_argument("line " + std::to_string(line_no) +
                                ": unknown format '" + tok + "'");
  return f;
}

}  // namespace

Program load(std::istream& in) {
  Program p;
  std::string line;
  size_t line_no = 0;
  bool saw_core = false;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    auto expect = [&](size_t n) {
      if (tok.size() != n)
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": wrong operand count");
    };

    if (tok[0] == "core") {
      expect(2);
      p.core_id = std::stoi(tok[1]);
      saw_core = true;
      continue;
    }
    if (tok[0] == "flops") {
      expect(2);
      p.flops = std::stoull(tok[1]);
      continue;
    }

    Instr ins;
    if (tok[0] == "int") {
      ins.kind = Kind::IntOp;
      size_t i = 1;
      if (i < tok.size() && tok[i][0] == 'd')
        ins.dst = parse_reg(tok[i++], 'd', line_no);
      if (i < tok.size()) ins.src0 = parse_reg(tok[i++], 's', line_no);
      if (i < tok.size()) ins.src1 = parse_reg(tok[i++], 's', line_no);
      if (i != tok.size())
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": trailing tokens");
    } else if (tok[0] == "load" || tok[0] == "store") {
      expect(4);
      ins.kind = tok[0] == "load" ? Kind::Load : Kind::Store;
      if (tok[1] == "tcdm")
        ins.region = Region::Tcdm;
      else if (tok[1] == "l2")
        ins.region = Region::L2;
      else
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown region '" + tok[1] + "'");
      ins.addr = static_cast<uint32_t>(std::stoul(tok[2]));
      if (ins.kind == Kind::Load)
        ins.dst = parse_reg(tok[3], 'd', line_no);
      else
        ins.src0 = parse_reg(tok[3], 's', line_no);
    } else if (tok[0] == "fp") {
      if (tok.size() < 3)
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": truncated fp instruction");
      ins.kind = Kind::FpOp;
      std::string func = tok[1];
      const size_t dot = func.find('.');
      std::string suffix;
      if (dot != std::string::npos) {
        suffix = func.substr(dot + 1);
        func.erase(dot);
      }
      if (!parse_fp_func(func, ins.fp))
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown fp function '" + func + "'");
      if (ins.fp == FpFunc::Cmp) {
        if (suffix == "eq") ins.cmp = fp::CmpOp::Eq;
        else if (suffix == "lt") ins.cmp = fp::CmpOp::Lt;
        else if (suffix == "le") ins.cmp = fp::CmpOp::Le;
        else
          throw std::invalid_argument("line " + std::to_string(line_no) +
                                      ": unknown comparison '" + suffix + "'");
      } else if (suffix == "w" && ins.fp == FpFunc::Fma) {
        ins.widen = true;
      } else if (!suffix.empty()) {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unexpected suffix '" + suffix + "'");
      }
      size_t i = 2;
      ins.fmt = parse_fmt(tok[i++], line_no);
      if (ins.fp == FpFunc::Convert) ins.fmt2 = parse_fmt(tok[i++], line_no);
      ins.dst = parse_reg(tok[i++], 'd', line_no);
      int* slots[3] = {&ins.src0, &ins.src1, &ins.src2};
      int nsrc = 0;
      while (i < tok.size() && tok[i][0] == 's' && nsrc < 3)
        *slots[nsrc++] = parse_reg(tok[i++], 's', line_no);
      if (ins.fp == FpFunc::Shuffle) {
        if (i + 2 != tok.size())
          throw std::invalid_argument("line " + std::to_string(line_no) +
                                      ": shuffle needs two selectors");
        ins.sel0 = static_cast<uint8_t>(std::stoi(tok[i]));
        ins.sel1 = static_cast<uint8_t>(std::stoi(tok[i + 1]));
        i += 2;
      }
      if (i != tok.size())
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": trailing tokens");
    } else if (tok[0] == "divsqrt") {
      ins.kind = Kind::FpDivSqrt;
      if (tok[1] == "div") {
        expect(6);
        ins.ds = DsFunc::Div;
      } else if (tok[1] == "sqrt") {
        expect(5);
        ins.ds = DsFunc::Sqrt;
      } else {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown divsqrt function");
      }
      ins.fmt = parse_fmt(tok[2], line_no);
      ins.dst = parse_reg(tok[3], 'd', line_no);
      ins.src0 = parse_reg(tok[4], 's', line_no);
      if (ins.ds == DsFunc::Div) ins.src1 = parse_reg(tok[5], 's', line_no);
    } else if (tok[0] == "barrier") {
      expect(2);
      ins.kind = Kind::Barrier;
      ins.barrier_id = std::stoi(tok[1]);
    } else if (tok[0] == "end") {
      expect(1);
      ins.kind = Kind::End;
    } else {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": unknown mnemonic '" + tok[0] + "'");
    }
    p.instrs.push_back(ins);
  }
  if (!saw_core) throw std::invalid_argument("missing core header line");
  validate(p);
  return p;
}

Program load_string(const std::string& text) {
  std::istringstream is(text);
  return load(is);
}

uint64_t mem_key(Region r, uint32_t addr) {
  return (uint64_t(r == Region::L2 ? 1 : 0) << 32) | addr;
}

}  // namespace tpsim::isa
