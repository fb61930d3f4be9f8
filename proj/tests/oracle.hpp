#pragma once

// Independent brute-force outcome enumerator for straight-line programs
// (loads, stores, full/write-write fences, register computes, return).
//
// Deliberately separate from the exploration engine: it re-transcribes the
// ordering rules directly over the static instruction list and enumerates all
// commit interleavings recursively, reading each load from the latest
// committed store. Used to cross-check the engine's outcome sets on the
// litmus corpus, in both the weak and the sequentially-consistent regime.

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordo/ir.hpp"

namespace litmus_oracle {

using ordo::BinOp;
using ordo::FenceKind;
using ordo::Mode;
using ordo::Op;
using ordo::OpKind;
using ordo::Program;

struct OInstr {
    Op op = Op::Return;
    OpKind kind = OpKind::Load;
    Mode mode = Mode::Rlx;
    bool shared = false;      // commits to memory / fence event
    bool full_fence = false;
    int loc = -1;             // static flat location
    int dst = -1;
    BinOp bop = BinOp::Mov;
    // operand descriptors: (is_reg, reg-or-const)
    bool a_is_reg = false, b_is_reg = false;
    int64_t a_val = 0, b_val = 0;
    int a_reg = -1, b_reg = -1;
    int wwf_before = 0;       // write-write fences earlier in program order
    int writer_a = -1, writer_b = -1;  // instruction index defining each operand
};

class Oracle {
public:
    Oracle(const Program& p, bool sc) : p_(p), sc_(sc) {
        // static locations: globals then object fields
        for (auto& g : p.globals) {
            loc_id_[g.name] = (int)init_.size();
            names_.push_back(g.name);
            init_.push_back(g.init.v);
        }
        for (auto& o : p.objects)
            for (auto& f : o.fields) {
                loc_id_[o.name + "." + f.name] = (int)init_.size();
                names_.push_back(o.name + "." + f.name);
                init_.push_back(f.init.v);
            }
        for (auto& tc : p.threads) {
            threads_.emplace_back();
            auto& code = threads_.back();
            std::vector<int> last_writer(tc.regs.size(), -1);
            int wwf = 0;
            for (auto& in : tc.code) {
                OInstr oi;
                oi.op = in.op;
                oi.wwf_before = wwf;
                switch (in.op) {
                case Op::Return: continue;  // not a step
                case Op::Fence:
                    if (in.fence == FenceKind::CompilerOnly) continue;
                    if (in.fence == FenceKind::WriteWrite) {
                        wwf++;
                        continue;
                    }
                    oi.shared = true;
                    oi.full_fence = true;
                    oi.kind = OpKind::Fence;
                    oi.mode = ordo::effective_mode(p, in);
                    break;
                case Op::Load:
                case Op::Store: {
                    oi.shared = true;
                    oi.kind = in.op_kind();
                    oi.mode = ordo::effective_mode(p, in);
                    std::string key;
                    if (in.addr.kind == ordo::AddrExpr::Kind::Global)
                        key = in.addr.sym;
                    else if (in.addr.kind == ordo::AddrExpr::Kind::ObjField)
                        key = in.addr.sym + "." + in.addr.field;
                    else
                        throw std::runtime_error("oracle: register-addressed access");
                    oi.loc = loc_id_.at(key);
                    if (in.op == Op::Load) oi.dst = in.dst;
                    if (in.op == Op::Store) set_operand_a(oi, in.a, last_writer);
                    break;
                }
                case Op::Compute:
                    oi.dst = in.dst;
                    oi.bop = in.bop;
                    set_operand_a(oi, in.a, last_writer);
                    if (in.bop != BinOp::Mov && in.bop != BinOp::Not)
                        set_operand_b(oi, in.b, last_writer);
                    break;
                default: throw std::runtime_error("oracle: unsupported instruction");
                }
                int idx = (int)code.size();
                code.push_back(oi);
                if (oi.dst >= 0) last_writer[oi.dst] = idx;
            }
            nregs_.push_back((int)tc.regs.size());
        }
    }

    std::set<std::vector<int64_t>> outcomes(const std::vector<std::string>& obs) {
        obs_locs_.clear();
        for (auto& o : obs) obs_locs_.push_back(loc_id_.at(o));
        mem_ = init_;
        committed_.clear();
        regs_.clear();
        for (size_t t = 0; t < threads_.size(); t++) {
            committed_.emplace_back(threads_[t].size(), false);
            regs_.emplace_back(nregs_[t], 0);
        }
        results_.clear();
        enumerate();
        return results_;
    }

private:
    static void set_operand(bool& is_reg, int& reg, int64_t& val, int& writer,
                            const ordo::Operand& o, const std::vector<int>& lw) {
        if (o.is_reg()) {
            is_reg = true;
            reg = o.reg;
            writer = lw[o.reg];
        } else {
            val = o.cval.v;
        }
    }
    void set_operand_a(OInstr& oi, const ordo::Operand& o, const std::vector<int>& lw) {
        set_operand(oi.a_is_reg, oi.a_reg, oi.a_val, oi.writer_a, o, lw);
    }
    void set_operand_b(OInstr& oi, const ordo::Operand& o, const std::vector<int>& lw) {
        set_operand(oi.b_is_reg, oi.b_reg, oi.b_val, oi.writer_b, o, lw);
    }

    bool acquire_src(const OInstr& a) const {
        bool reads = a.kind == OpKind::Load || a.kind == OpKind::Rmw || a.kind == OpKind::Await;
        bool acq_mode = a.mode == Mode::Acq || a.mode == Mode::Sc;
        return (reads && acq_mode) || (a.full_fence && acq_mode);
    }
    bool release_tgt(const OInstr& b) const {
        bool writes = b.kind == OpKind::Store || b.kind == OpKind::Rmw;
        bool rel_mode = b.mode == Mode::Rel || b.mode == Mode::Sc;
        return (writes && rel_mode) || (b.full_fence && rel_mode);
    }

    // must a precede b (a before b in program order, both shared)?
    bool ordered(const OInstr& a, const OInstr& b) const {
        if (a.loc >= 0 && a.loc == b.loc) return true;                     // R1
        if (acquire_src(a)) return true;                                   // R2
        if (release_tgt(b)) return true;                                   // R3
        if (a.mode == Mode::Sc && b.mode == Mode::Sc && a.shared && b.shared) return true;  // R4
        bool a_writes = a.kind == OpKind::Store || a.kind == OpKind::Rmw;
        bool b_writes = b.kind == OpKind::Store || b.kind == OpKind::Rmw;
        if (a_writes && b_writes && a.wwf_before < b.wwf_before) return true;  // R7
        return false;
    }

    bool committable(int t, int j) const {
        const auto& code = threads_[t];
        const OInstr& b = code[j];
        if (b.writer_a >= 0 && !committed_[t][b.writer_a]) return false;  // R5
        if (b.writer_b >= 0 && !committed_[t][b.writer_b]) return false;
        for (int i = 0; i < j; i++) {
            if (committed_[t][i]) continue;
            if (sc_) return false;  // total per-thread order
            if (code[i].shared && b.shared && ordered(code[i], b)) return false;
        }
        return true;
    }

    void enumerate() {
        bool any = false;
        for (size_t t = 0; t < threads_.size(); t++) {
            for (size_t j = 0; j < threads_[t].size(); j++) {
                if (committed_[t][j] || !committable((int)t, (int)j)) continue;
                any = true;
                const OInstr& oi = threads_[t][j];
                committed_[t][j] = true;
                int64_t old_mem = 0, old_reg = 0;
                if (oi.op == Op::Store) {
                    old_mem = mem_[oi.loc];
                    mem_[oi.loc] = oi.a_is_reg ? regs_[t][oi.a_reg] : oi.a_val;
                } else if (oi.op == Op::Load) {
                    old_reg = regs_[t][oi.dst];
                    regs_[t][oi.dst] = mem_[oi.loc];
                } else if (oi.op == Op::Compute) {
                    old_reg = regs_[t][oi.dst];
                    int64_t a = oi.a_is_reg ? regs_[t][oi.a_reg] : oi.a_val;
                    int64_t b = oi.b_is_reg ? regs_[t][oi.b_reg] : oi.b_val;
                    int64_t r = 0;
                    switch (oi.bop) {
                    case BinOp::Mov: r = a; break;
                    case BinOp::Not: r = a == 0 ? 1 : 0; break;
                    case BinOp::Add: r = a + b; break;
                    case BinOp::Sub: r = a - b; break;
                    case BinOp::Eq: r = a == b ? 1 : 0; break;
                    case BinOp::Ne: r = a != b ? 1 : 0; break;
                    case BinOp::Gt: r = a > b ? 1 : 0; break;
                    }
                    regs_[t][oi.dst] = r;
                }
                enumerate();
                if (oi.op == Op::Store) mem_[oi.loc] = old_mem;
                if (oi.op == Op::Load || oi.op == Op::Compute) regs_[t][oi.dst] = old_reg;
                committed_[t][j] = false;
            }
        }
        if (!any) {
            bool done = true;
            for (size_t t = 0; t < threads_.size(); t++)
                for (size_t j = 0; j < threads_[t].size(); j++)
                    if (!committed_[t][j]) done = false;
            if (!done) return;  // cannot happen for valid straight-line code
            std::vector<int64_t> out;
            for (int l : obs_locs_) out.push_back(mem_[l]);
            results_.insert(out);
        }
    }

    const Program& p_;
    bool sc_;
    std::map<std::string, int> loc_id_;
    std::vector<std::string> names_;
    std::vector<int64_t> init_;
    std::vector<std::vector<OInstr>> threads_;
    std::vector<int> nregs_;
    std::vector<int> obs_locs_;
    std::vector<int64_t> mem_;
    std::vector<std::vector<bool>> committed_;
    std::vector<std::vector<int64_t>> regs_;
    std::set<std::vector<int64_t>> results_;
};

inline std::set<std::vector<int64_t>> outcomes(const Program& p,
                                               const std::vector<std::string>& obs, bool sc) {
    Oracle o(p, sc);
    return o.outcomes(obs);
}

}  // namespace litmus_oracle
