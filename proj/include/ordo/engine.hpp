#pragma once

// Exhaustive operational exploration of barrier-annotated programs.
//
// Model: reorder-then-interleave over a single global commit order
// (multi-copy atomic). Each thread fetches instructions in (guessed) program
// order into a bounded window; a step commits one committable instance; reads,
// RMWs and awaits observe the latest committed write per location. An instance
// is committable when its preserved-program-order predecessors have committed,
// its operand-defining instances have committed, and (for writes, RMWs and
// full fences) every earlier branch guess is verified and no earlier await of
// the same thread is still pending.
//
// Preserved program order, for a before b in one thread's dynamic order:
//   R1  same location (unresolved addresses are conservatively may-alias);
//   R2  a is an acquire (ACQ/SC load, RMW or await, or an ACQ/SC full fence)
//       -> a precedes all later instructions;
//   R3  b is a release (REL/SC store or RMW, or a REL/SC full fence)
//       -> all earlier instructions precede b;
//   R4  a and b both SC;
//   R5  b's operands or address derive from a's result (enforced structurally:
//       operand-defining instances must have committed);
//   R6  a feeds a branch condition and b is a write after that branch
//       (enforced structurally: a branch is passed either resolved — its
//       feeder already committed — or under a guess, and writes never commit
//       with an unverified earlier guess);
//   R7  a write-write fence sits between writes a and b;
//   R8  a is an await (any mode) and b is a write, RMW or full fence. An
//       await is the exit test of a spin loop, so everything after it is
//       control-dependent on a read; hardware may hoist later reads out of
//       the loop but never makes a store (or the ordering promise of a full
//       fence) visible before the loop is known to exit.
//
// Branch directions are guessed at fetch when the condition is not yet
// available (speculation on); loads and awaits may commit under pending
// guesses, and mismatched guesses prune the path. Exploration is a
// depth-first search over machine states with state memoization: the visitor
// receives each distinct terminal (complete or blocked) state once, with the
// first trace that reached it; path counts are aggregated exactly via the
// memo table.

#include <array>
#include <chrono>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "ordo/ir.hpp"

namespace ordo {

enum class Model : uint8_t { Weak, ScOracle };

struct EngineConfig {
    Model model = Model::Weak;
    bool speculation = true;
    int max_pending_guesses = 4;
    int window = 96;  // max fetched-uncommitted instances per thread
    uint64_t max_steps = 1'000'000'000;  // per-path transition bound
    std::chrono::milliseconds timeout{60000};  // <=0 means unlimited
    uint64_t max_states = 100'000'000;  // memo-table entry bound
    // Memo-table memory ceiling. Past it the table stops growing and new
    // states overwrite old ones (sound: forgotten subtrees are re-explored).
    uint64_t max_table_bytes = uint64_t(2) << 30;
};

struct Event {
    int seq = 0;
    int tid = 0;
    int po = 0;  // fetch-order rank within the thread (dynamic program order)
    Op op = Op::Load;
    Mode mode = Mode::Rlx;
    int loc = -1;
    bool has_r = false, has_w = false;
    Value r, w;
    int point_id = -1;  // 1-based, -1 for pinned accesses
    std::string tag;    // source tag, empty for pinned accesses
};

struct BlockedAwaitInfo {
    int tid = 0;
    int loc = -1;  // -1 when the address never resolved
    AwaitPred pred = AwaitPred::NonZero;
    Value operand;
    int point_id = -1;
    std::string tag;
};

struct ExecutionTrace {
    std::vector<Event> commit_order;
    bool complete = false;
    bool poisoned = false;  // a speculative read dereferenced a non-reference
    std::vector<BlockedAwaitInfo> blocked;
    std::vector<std::pair<std::string, Value>> final_globals;
};

enum class VisitResult : uint8_t { Continue, Stop };
using Visitor = std::function<VisitResult(const ExecutionTrace&)>;

struct CoverageCell {
    uint64_t commits = 0;
    uint64_t branch_then = 0;
    uint64_t branch_else = 0;
};

struct ExplorationSummary {
    uint64_t executions_visited = 0;   // path counts (exact via memoization)
    uint64_t blocked_executions = 0;   // path counts ending blocked
    uint64_t distinct_complete = 0;    // distinct terminal states, complete
    uint64_t distinct_blocked = 0;     // distinct terminal states, blocked
    uint64_t states = 0;               // memoized states explored
    uint64_t truncated_paths = 0;      // max-steps / window-overflow cut-offs
    uint64_t evictions = 0;            // memo subtrees forgotten (probe window full)
    uint64_t runtime_errors = 0;       // non-speculative bad dereferences
    std::string first_runtime_error;
    bool hit_timeout = false;
    bool state_limit_hit = false;
    bool stopped_early = false;        // visitor requested stop
    std::vector<std::vector<CoverageCell>> coverage;  // [thread][code index]
};

// ---------------------------------------------------------------------------
// Flat location table

struct LocMap {
    int n_globals = 0;
    std::vector<int> obj_base;
    std::vector<std::vector<int>> field_slot;  // [obj][field-name id] -> offset or -1
    std::vector<std::string> names;            // per flat loc
    std::vector<Value> init;
    std::vector<std::string> field_names;      // interned field names
    std::vector<int> loc_obj;                  // owning object per loc, -1 = global

    explicit LocMap(const Program& p) {
        n_globals = (int)p.globals.size();
        for (auto& g : p.globals) {
            names.push_back(g.name);
            init.push_back(g.init);
            loc_obj.push_back(-1);
        }
        auto intern = [&](const std::string& f) {
            for (size_t i = 0; i < field_names.size(); i++)
                if (field_names[i] == f) return (int)i;
            field_names.push_back(f);
            return (int)field_names.size() - 1;
        };
        for (size_t oi = 0; oi < p.objects.size(); oi++) {
            obj_base.push_back((int)names.size());
            field_slot.emplace_back();
            for (auto& f : p.objects[oi].fields) {
                int fid = intern(f.name);
                if ((int)field_slot[oi].size() <= fid) field_slot[oi].resize(fid + 1, -1);
                field_slot[oi][fid] = (int)names.size() - obj_base[oi];
                names.push_back(p.objects[oi].name + "." + f.name);
                init.push_back(f.init);
                loc_obj.push_back((int)oi);
            }
        }
    }
    int field_id(const std::string& f) const {
        for (size_t i = 0; i < field_names.size(); i++)
            if (field_names[i] == f) return (int)i;
        return -1;
    }
    int total() const { return (int)names.size(); }
    // Flat loc of a field of object `oi`, or -1 if that object lacks the field.
    int resolve(int oi, int fid) const {
        if (oi < 0 || oi >= (int)field_slot.size() || fid < 0) return -1;
        if (fid >= (int)field_slot[oi].size()) return -1;
        int slot = field_slot[oi][fid];
        return slot < 0 ? -1 : obj_base[oi] + slot;
    }
    const std::string& name(int loc) const { return names[loc]; }
};

// Standalone transcription of the preserved-program-order rules over
// descriptive facts about a dynamic pair (a before b in one thread).
struct PpoQuery {
    OpKind a_kind = OpKind::Load, b_kind = OpKind::Load;
    Mode a_mode = Mode::Rlx, b_mode = Mode::Rlx;
    bool a_full_fence = false, b_full_fence = false;
    bool same_location = false;
    bool b_depends_on_a = false;       // value or address derivation (R5)
    bool branch_between_fed_by_a = false;  // a feeds a branch fetched before b
    bool ww_fence_between = false;
};

inline bool ppo_ordered(const PpoQuery& q) {
    bool a_reads = q.a_kind == OpKind::Load || q.a_kind == OpKind::Rmw || q.a_kind == OpKind::Await;
    bool b_writes = q.b_kind == OpKind::Store || q.b_kind == OpKind::Rmw;
    bool a_writes = q.a_kind == OpKind::Store || q.a_kind == OpKind::Rmw;
    bool a_acquire = (a_reads && (q.a_mode == Mode::Acq || q.a_mode == Mode::Sc)) ||
                     (q.a_full_fence && (q.a_mode == Mode::Acq || q.a_mode == Mode::Sc));
    bool b_release = (b_writes && (q.b_mode == Mode::Rel || q.b_mode == Mode::Sc)) ||
                     (q.b_full_fence && (q.b_mode == Mode::Rel || q.b_mode == Mode::Sc));
    if (q.same_location) return true;                                       // R1
    if (a_acquire) return true;                                             // R2
    if (b_release) return true;                                             // R3
    if (q.a_mode == Mode::Sc && q.b_mode == Mode::Sc) return true;          // R4
    if (q.b_depends_on_a) return true;                                      // R5
    if (q.branch_between_fed_by_a && a_reads && b_writes) return true;      // R6
    if (q.ww_fence_between && a_writes && b_writes) return true;            // R7
    if (q.a_kind == OpKind::Await && (b_writes || q.b_full_fence)) return true;  // R8
    return false;
}

// ---------------------------------------------------------------------------

namespace engine_detail {

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct H128 {
    uint64_t a = 0, b = 0;
    void x(const H128& o) {
        a ^= o.a;
        b ^= o.b;
    }
    bool zero() const { return a == 0 && b == 0; }
};

template <typename... W>
inline H128 fact(uint64_t tag, W... ws) {
    uint64_t h1 = mix64(tag * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    uint64_t h2 = mix64(tag + 0xda942042e4dd58b5ull);
    ((h1 = mix64(h1 ^ (uint64_t)ws), h2 = mix64(h2 + (uint64_t)ws)), ...);
    return {h1, h2};
}

inline uint64_t vkey(const Value& v) {
    return (uint64_t)v.v * 2 + (v.is_ref() ? 1 : 0);
}

constexpr int kMaxStream = 256;

struct Bits {
    uint64_t w[4] = {0, 0, 0, 0};
    void set(int i) { w[i >> 6] |= 1ull << (i & 63); }
    void clear(int i) { w[i >> 6] &= ~(1ull << (i & 63)); }
    bool test(int i) const { return (w[i >> 6] >> (i & 63)) & 1; }
    bool none() const { return (w[0] | w[1] | w[2] | w[3]) == 0; }
};

// Is any bit of (x & y) set below position `pos`?
inline bool any_common_below(const Bits& x, const Bits& y, int pos) {
    int full = pos >> 6, rem = pos & 63;
    for (int i = 0; i < full; i++)
        if (x.w[i] & y.w[i]) return true;
    if (rem && (x.w[full] & y.w[full] & ((1ull << rem) - 1))) return true;
    return false;
}

inline bool any_below(const Bits& x, int pos) {
    int full = pos >> 6, rem = pos & 63;
    for (int i = 0; i < full; i++)
        if (x.w[i]) return true;
    if (rem && (x.w[full] & ((1ull << rem) - 1))) return true;
    return false;
}

// Compiled per-instruction static facts.
struct CInstr {
    Op op;
    OpKind kind;
    Mode mode = Mode::Rlx;
    int dst = -1;
    AddrExpr::Kind akind = AddrExpr::Kind::Global;
    int static_loc = -1;  // resolved for Global/ObjField
    int base_reg = -1;
    int fid = -1;  // interned field id for RegField
    Operand a, b;
    FenceKind fence = FenceKind::Full;
    AwaitPred pred = AwaitPred::NonZero;
    CasConv conv = CasConv::ReturnsOld;
    BinOp bop = BinOp::Mov;
    int t1 = -1, t2 = -1;
    int point_id = -1;
    const std::string* tag = nullptr;
    bool shared = false;     // commits as an event
    bool is_write = false;   // store/rmw
    bool is_read = false;    // load/rmw/await
    bool acq_src = false;    // R2 source when pending
    bool release = false;    // R3 target
    bool sc = false;
    bool write_like = false;  // needs verified prefix (write/rmw/full fence)
};

struct Inst {
    int32_t ci = -1;
    int32_t in_addr = -1, in_a = -1, in_b = -1;  // stream positions, -1 = none
    int32_t loc = -1;                            // -1 unknown, -2 none
    int32_t wwf_before = 0;
    bool done = false;
    bool local = false;  // compute/nondet/numanode: no commit event
    Value val;           // dst result
    Value rv, wv;
    bool has_r = false, has_w = false;
};

struct Guess {
    int32_t cond_pos;    // stream position of the condition's defining instance
    int32_t before_pos;  // stream size when the branch was fetched
    int32_t br_ci;
    bool dir_then;
};

enum class Stall : uint8_t { None, Branch, Nondet, Window, Returned };

struct ThreadRt {
    std::vector<Inst> stream;
    std::vector<Guess> guesses;
    std::vector<int> reg_def;  // register -> defining stream position
    int pc = 0;
    Stall stall = Stall::None;
    int stall_cond_pos = -1;  // for Stall::Branch
    int wwf_count = 0;
    int pending_count = 0;  // fetched, not done, shared accesses
    Bits pending;           // shared-access instances not yet done
    Bits pending_local;     // local instances not yet evaluated
    Bits acq_src;           // static acquire sources (gate with pending)
    Bits sc_bits;
    Bits writes;
    Bits awaits;            // R8 sources (gate with pending)
    Bits unresolved;  // pending with loc == -1
    // XOR of every thread-attributed fact currently in the state hash. When
    // the thread can never act again, the whole accumulator is collapsed out
    // of the hash in one step (see try_quiesce).
    H128 hacc;
    bool quiesced = false;
};

enum class AK : uint8_t {
    Mem,
    Done,
    LocalDone,
    Fetch,
    RegDef,
    Pc,
    Stall,
    GuessPush,
    GuessRemove,
    WwCnt,
    Event,
    Hash,
    Poison,
    Resolve,
    Quiesce
};

struct Action {
    AK k;
    int32_t t = 0, a = 0, b = 0;
    Value v1, v2;
    H128 h;  // companion hash delta (applied at mutation, re-XORed at undo)
    Guess g{};
};

// Open-addressed memo table, 32 bytes per entry, bounded probe window. An
// all-zero key doubles as the empty-slot marker, so a state hashing to
// exactly zero is simply never memoized (harmless: it gets re-explored).
// Every key lives within kWindow slots of its home, so lookups are O(kWindow)
// even at 100% occupancy. When a window has no empty slot (always the case
// once the byte cap stops growth), the entry whose memoized subtree has the
// fewest paths is sacrificed — an entry's complete+blocked count is exactly
// the work saved by a future hit, so the torrent of near-leaf states cannot
// flush the expensive interior entries that make memoization pay. Forgetting
// a subtree is sound: if revisited it is re-explored and, because counts are
// propagated rather than re-walked, yields identical totals.
struct VisitedTable {
    struct Entry {
        uint64_t h1 = 0, h2 = 0;
        uint64_t complete = 0, blocked = 0;
    };
    static_assert(sizeof(Entry) == 32);
    static constexpr int kWindow = 8;
    std::vector<Entry> tab;
    size_t count = 0;
    size_t max_slots = size_t(1) << 26;
    uint64_t evictions = 0;
    VisitedTable() { tab.resize(1 << 16); }
    static bool occupied(const Entry& e) { return (e.h1 | e.h2) != 0; }
    size_t home(const H128& h) const {
        return (h.a ^ h.b * 0x9e3779b97f4a7c15ull) & (tab.size() - 1);
    }
    static uint64_t weight(const Entry& e) { return sat_add_(e.complete, e.blocked); }
    static uint64_t sat_add_(uint64_t a, uint64_t b) {
        uint64_t s = a + b;
        return s < a ? UINT64_MAX : s;
    }
    Entry* find(const H128& h) {
        if (h.zero()) return nullptr;
        size_t mask = tab.size() - 1;
        size_t i = home(h);
        for (int k = 0; k < kWindow; k++, i = (i + 1) & mask) {
            if (!occupied(tab[i])) return nullptr;
            if (tab[i].h1 == h.a && tab[i].h2 == h.b) return &tab[i];
        }
        return nullptr;
    }
    void insert(const H128& h, uint64_t complete, uint64_t blocked) {
        if (h.zero()) return;
        if (count * 10 >= tab.size() * 6 && tab.size() * 2 <= max_slots) grow();
        size_t mask = tab.size() - 1;
        size_t i = home(h);
        Entry* victim = nullptr;
        for (int k = 0; k < kWindow; k++, i = (i + 1) & mask) {
            Entry& e = tab[i];
            if (!occupied(e)) {
                e = {h.a, h.b, complete, blocked};
                count++;
                return;
            }
            if (e.h1 == h.a && e.h2 == h.b) return;
            if (!victim || weight(e) < weight(*victim)) victim = &e;
        }
        // Full window: keep whichever subtree is larger. Either way one
        // memoized subtree is forgotten.
        if (weight(*victim) <= sat_add_(complete, blocked))
            *victim = {h.a, h.b, complete, blocked};
        evictions++;
    }
    void grow() {
        std::vector<Entry> old = std::move(tab);
        tab.assign(old.size() * 2, Entry{});
        count = 0;
        for (auto& e : old) {
            if (!occupied(e)) continue;
            size_t mask = tab.size() - 1;
            size_t i = home(H128{e.h1, e.h2});
            Entry* victim = nullptr;
            bool placed = false;
            for (int k = 0; k < kWindow; k++, i = (i + 1) & mask) {
                if (!occupied(tab[i])) {
                    tab[i] = e;
                    count++;
                    placed = true;
                    break;
                }
                if (!victim || weight(tab[i]) < weight(*victim)) victim = &tab[i];
            }
            if (!placed) {
                if (weight(*victim) <= weight(e)) *victim = e;
                evictions++;
            }
        }
    }
};

inline uint64_t sat_add(uint64_t a, uint64_t b) {
    uint64_t s = a + b;
    return s < a ? UINT64_MAX : s;
}

}  // namespace engine_detail

// ---------------------------------------------------------------------------

class Engine {
    using H128 = engine_detail::H128;
    using Bits = engine_detail::Bits;
    using CInstr = engine_detail::CInstr;
    using Inst = engine_detail::Inst;
    using Guess = engine_detail::Guess;
    using Stall = engine_detail::Stall;
    using AK = engine_detail::AK;
    using Action = engine_detail::Action;

public:
    Engine(const Program& p, const EngineConfig& cfg) : p_(p), cfg_(cfg), locs_(p) {
        if (cfg_.window > 200) cfg_.window = 200;
        if (cfg_.window < 4) cfg_.window = 4;
        if (cfg_.max_pending_guesses > 16) cfg_.max_pending_guesses = 16;
        if (cfg_.model == Model::ScOracle) cfg_.speculation = false;
        compile();
    }

    const LocMap& locs() const { return locs_; }

    ExplorationSummary run(const Visitor& visit) {
        visitor_ = &visit;
        summary_ = ExplorationSummary{};
        summary_.coverage.resize(p_.threads.size());
        for (size_t t = 0; t < p_.threads.size(); t++)
            summary_.coverage[t].assign(code_[t].size(), {});
        reset_state();
        deadline_valid_ = cfg_.timeout.count() > 0;
        deadline_ = std::chrono::steady_clock::now() + cfg_.timeout;
        tick_ = 0;
        stop_ = false;
        aborted_ = false;
        for (size_t t = 0; t < rt_.size(); t++)
            if (!pump((int)t)) return summary_;  // overflow already counted
        for (size_t t = 0; t < rt_.size(); t++) try_quiesce((int)t);
        auto counts = dfs(0);
        if (!aborted_) {
            summary_.executions_visited = counts.first;
            summary_.blocked_executions = counts.second;
        } else {
            summary_.executions_visited = summary_.distinct_complete;
            summary_.blocked_executions = summary_.distinct_blocked;
        }
        summary_.states = visited_.count;
        summary_.evictions = visited_.evictions;
        return summary_;
    }

    // Replays a recorded commit order: re-applies writes in sequence and checks
    // every recorded read against the latest committed write. Returns the final
    // global values and whether the replay was consistent.
    static std::pair<bool, std::vector<std::pair<std::string, Value>>> replay(
        const Program& p, const ExecutionTrace& tr) {
        LocMap lm(p);
        std::vector<Value> mem = lm.init;
        bool ok = true;
        for (auto& e : tr.commit_order) {
            if (e.loc < 0) continue;
            if (e.has_r && !(mem[e.loc] == e.r)) ok = false;
            if (e.has_w) mem[e.loc] = e.w;
        }
        std::vector<std::pair<std::string, Value>> fin;
        for (int g = 0; g < lm.n_globals; g++) fin.emplace_back(lm.name(g), mem[g]);
        return {ok, fin};
    }

private:
    // ---- compilation ----
    void compile() {
        code_.resize(p_.threads.size());
        for (size_t t = 0; t < p_.threads.size(); t++) {
            auto& tc = p_.threads[t];
            code_[t].reserve(tc.code.size());
            for (auto& in : tc.code) {
                CInstr c;
                c.op = in.op;
                c.kind = in.op_kind();
                c.dst = in.dst;
                c.a = in.a;
                c.b = in.b;
                c.fence = in.fence;
                c.pred = in.pred;
                c.conv = in.conv;
                c.bop = in.bop;
                c.t1 = in.t1;
                c.t2 = in.t2;
                c.akind = in.addr.kind;
                if (in.is_shared_access()) {
                    c.mode = effective_mode(p_, in);
                    if (in.bp >= 0) {
                        c.point_id = p_.points[in.bp].id;
                        c.tag = &p_.points[in.bp].tag;
                    }
                    if (in.op != Op::Fence) {
                        switch (in.addr.kind) {
                        case AddrExpr::Kind::Global:
                            c.static_loc = p_.find_global(in.addr.sym);
                            break;
                        case AddrExpr::Kind::ObjField: {
                            int oi = p_.find_object(in.addr.sym);
                            c.static_loc = locs_.resolve(oi, locs_.field_id(in.addr.field));
                            break;
                        }
                        case AddrExpr::Kind::RegField:
                            c.base_reg = in.addr.reg;
                            c.fid = locs_.field_id(in.addr.field);
                            break;
                        }
                    }
                    bool marker = in.op == Op::Fence && in.fence != FenceKind::Full;
                    c.shared = !marker;
                    c.is_write = in.op == Op::Store || in.op == Op::Swap || in.op == Op::Cas;
                    c.is_read = in.op == Op::Load || in.op == Op::Swap || in.op == Op::Cas ||
                                in.op == Op::Await;
                    bool full_fence = in.op == Op::Fence && in.fence == FenceKind::Full;
                    c.acq_src = (c.is_read && (c.mode == Mode::Acq || c.mode == Mode::Sc)) ||
                                (full_fence && (c.mode == Mode::Acq || c.mode == Mode::Sc));
                    c.release = (c.is_write && (c.mode == Mode::Rel || c.mode == Mode::Sc)) ||
                                (full_fence && (c.mode == Mode::Rel || c.mode == Mode::Sc));
                    c.sc = c.mode == Mode::Sc;
                    c.write_like = c.is_write || full_fence;
                }
                code_[t].push_back(c);
            }
        }
    }

    void reset_state() {
        mem_ = locs_.init;
        rt_.assign(p_.threads.size(), engine_detail::ThreadRt{});
        for (size_t t = 0; t < rt_.size(); t++) {
            rt_[t].reg_def.assign(p_.threads[t].regs.size(), -1);
            rt_[t].stream.reserve(64);
        }
        journal_.clear();
        frames_.clear();
        events_.clear();
        hash_ = H128{};
        for (int l = 0; l < locs_.total(); l++) hash_.x(mem_fact(l, mem_[l]));
        for (size_t t = 0; t < rt_.size(); t++) thash((int)t, pc_fact((int)t, 0));
        poisoned_ = false;
        visited_ = engine_detail::VisitedTable{};
        size_t slots = size_t(1) << 16;
        while (slots * 2 * sizeof(engine_detail::VisitedTable::Entry) <= cfg_.max_table_bytes)
            slots *= 2;
        visited_.max_slots = slots;
    }

    // ---- hashing facts ----
    static H128 mem_fact(int loc, const Value& v) {
        return engine_detail::fact(1, loc, engine_detail::vkey(v));
    }
    static H128 fetch_fact(int t, int pos, int ci) { return engine_detail::fact(2, t, pos, ci); }
    // Only the register-visible result (`val`) can affect anything after the
    // commit: read/written values live on in memory facts and in the recorded
    // event, not in the reachable state.
    H128 done_fact(int t, int pos) const {
        const Inst& i = rt_[t].stream[pos];
        return engine_detail::fact(3, t, pos, engine_detail::vkey(i.val));
    }
    static H128 pc_fact(int t, int pc) { return engine_detail::fact(4, t, pc); }
    static H128 guess_fact(int t, const Guess& g) {
        return engine_detail::fact(5, t, g.cond_pos, g.before_pos, g.br_ci, g.dir_then ? 1 : 0);
    }
    static H128 poison_fact() { return engine_detail::fact(6, 1); }
    static H128 resolve_fact(int t, int pos, int loc) {
        return engine_detail::fact(7, t, pos, loc);
    }
    static H128 quiesce_fact(int t) { return engine_detail::fact(8, t); }

    // ---- journal ----
    void push_frame() { frames_.push_back(journal_.size()); }

    void act(Action a) { journal_.push_back(std::move(a)); }

    // Thread-attributed facts are mirrored into the thread's accumulator so
    // try_quiesce can remove them all at once.
    void thash(int t, const H128& d) {
        hash_.x(d);
        rt_[t].hacc.x(d);
    }

    void pop_frame() {
        size_t base = frames_.back();
        frames_.pop_back();
        while (journal_.size() > base) {
            Action& a = journal_.back();
            hash_.x(a.h);
            if (a.t >= 0 && a.k != AK::Quiesce) rt_[a.t].hacc.x(a.h);
            auto& T = a.t >= 0 ? rt_[a.t] : rt_[0];
            switch (a.k) {
            case AK::Mem: mem_[a.a] = a.v1; break;
            case AK::Done: {
                Inst& i = T.stream[a.a];
                i.done = false;
                i.has_r = i.has_w = false;
                T.pending.set(a.a);
                T.pending_count++;
                break;
            }
            case AK::LocalDone: {
                Inst& i = T.stream[a.a];
                i.done = false;
                T.pending_local.set(a.a);
                break;
            }
            case AK::Fetch: {
                int pos = (int)T.stream.size() - 1;
                const Inst& i = T.stream[pos];
                const CInstr& c = code_[a.t][i.ci];
                if (c.shared && !i.done) {
                    T.pending.clear(pos);
                    T.pending_count--;
                }
                if (i.local && !i.done) T.pending_local.clear(pos);
                T.acq_src.clear(pos);
                T.sc_bits.clear(pos);
                T.writes.clear(pos);
                T.awaits.clear(pos);
                T.unresolved.clear(pos);
                T.stream.pop_back();
                break;
            }
            case AK::RegDef: T.reg_def[a.a] = a.b; break;
            case AK::Pc: T.pc = a.a; break;
            case AK::Stall:
                T.stall = (Stall)a.a;
                T.stall_cond_pos = a.b;
                break;
            case AK::GuessPush: T.guesses.pop_back(); break;
            case AK::GuessRemove: T.guesses.insert(T.guesses.begin() + a.a, a.g); break;
            case AK::WwCnt: T.wwf_count = a.a; break;
            case AK::Event: events_.pop_back(); break;
            case AK::Hash: break;
            case AK::Poison: poisoned_ = a.a != 0; break;
            case AK::Resolve: {
                T.stream[a.a].loc = -1;
                T.unresolved.set(a.a);
                break;
            }
            case AK::Quiesce: T.quiesced = false; break;
            }
            journal_.pop_back();
        }
    }

    // A returned thread with nothing in flight can never act again; its
    // registers and instance history are dead state. Replace every fact it
    // contributed to the hash with a single quiesced marker, so states that
    // differ only in a finished thread's history share one memo entry.
    void try_quiesce(int t) {
        auto& T = rt_[t];
        if (T.quiesced || T.stall != Stall::Returned) return;
        if (T.pending_count != 0 || !T.pending_local.none() || !T.guesses.empty()) return;
        Action a;
        a.k = AK::Quiesce;
        a.t = t;
        a.h = T.hacc;
        a.h.x(quiesce_fact(t));
        hash_.x(a.h);  // not thash: hacc stays frozen so the undo is symmetric
        T.quiesced = true;
        act(std::move(a));
    }

    // ---- mutations ----
    void write_mem(int loc, const Value& v) {
        Action a;
        a.k = AK::Mem;
        a.t = -1;
        a.a = loc;
        a.v1 = mem_[loc];
        a.h = mem_fact(loc, mem_[loc]);
        a.h.x(mem_fact(loc, v));
        hash_.x(a.h);
        mem_[loc] = v;
        act(std::move(a));
    }

    void set_pc(int t, int pc) {
        Action a;
        a.k = AK::Pc;
        a.t = t;
        a.a = rt_[t].pc;
        a.h = pc_fact(t, rt_[t].pc);
        a.h.x(pc_fact(t, pc));
        thash(t, a.h);
        rt_[t].pc = pc;
        act(std::move(a));
    }

    void set_stall(int t, Stall s, int cond_pos = -1) {
        Action a;
        a.k = AK::Stall;
        a.t = t;
        a.a = (int)rt_[t].stall;
        a.b = rt_[t].stall_cond_pos;
        rt_[t].stall = s;
        rt_[t].stall_cond_pos = cond_pos;
        act(std::move(a));
    }

    void set_reg_def(int t, int reg, int pos) {
        Action a;
        a.k = AK::RegDef;
        a.t = t;
        a.a = reg;
        a.b = rt_[t].reg_def[reg];
        rt_[t].reg_def[reg] = pos;
        act(std::move(a));
    }

    void resolve_loc(int t, int pos, int loc) {
        Action a;
        a.k = AK::Resolve;
        a.t = t;
        a.a = pos;
        a.h = resolve_fact(t, pos, loc);
        thash(t, a.h);
        rt_[t].stream[pos].loc = loc;
        rt_[t].unresolved.clear(pos);
        act(std::move(a));
    }

    void mark_poison() {
        if (poisoned_) return;
        Action a;
        a.k = AK::Poison;
        a.t = -1;
        a.a = 0;
        a.h = poison_fact();
        hash_.x(a.h);
        poisoned_ = true;
        act(std::move(a));
    }

    // ---- value plumbing ----
    Value inst_value(int t, int pos) const { return rt_[t].stream[pos].val; }

    Value operand_value(int t, const Operand& o, int in_pos) const {
        if (!o.is_reg()) return o.cval;
        return inst_value(t, in_pos);
    }

    bool inputs_done(int t, const Inst& i) const {
        auto& T = rt_[t];
        if (i.in_addr >= 0 && !T.stream[i.in_addr].done) return false;
        if (i.in_a >= 0 && !T.stream[i.in_a].done) return false;
        if (i.in_b >= 0 && !T.stream[i.in_b].done) return false;
        return true;
    }

    // ---- fetch ----
    // Returns false when the path dies (stream overflow). Never prunes on
    // guesses (guessing happens via explicit transitions).
    bool pump(int t) {
        auto& T = rt_[t];
        if (T.stall == Stall::Returned) return true;
        int ctrl_steps = 0;  // guards against label/jump-only cycles
        while (true) {
            if ((int)T.stream.size() >= engine_detail::kMaxStream || ctrl_steps > 4096) {
                summary_.truncated_paths++;  // pathological unrolling: drop path, flag it
                return false;
            }
            if (T.pending_count >= cfg_.window) {
                set_stall(t, Stall::Window);
                return true;
            }
            if (T.pc < 0 || T.pc >= (int)code_[t].size()) {
                set_stall(t, Stall::Returned);  // fell off the end: treat as returned
                return true;
            }
            const CInstr& c = code_[t][T.pc];
            switch (c.op) {
            case Op::Label:
                ctrl_steps++;
                set_pc(t, T.pc + 1);
                continue;
            case Op::Jump:
                ctrl_steps++;
                set_pc(t, c.t1);
                continue;
            case Op::Return:
                set_stall(t, Stall::Returned);
                return true;
            case Op::Branch: {
                int cpos = T.reg_def[c.dst];
                if (cpos >= 0 && T.stream[cpos].done) {
                    ctrl_steps++;
                    bool then = T.stream[cpos].val.truthy();
                    cover_branch(t, T.pc, then);
                    set_pc(t, then ? c.t1 : c.t2);
                    if (T.stall != Stall::None) set_stall(t, Stall::None);
                    continue;
                }
                set_stall(t, Stall::Branch, cpos);
                return true;
            }
            case Op::NondetBool:
                set_stall(t, Stall::Nondet);
                return true;
            case Op::NumaNode: {
                fetch_local(t, c, Value::integer(p_.numa_of(t)), true);
                set_pc(t, T.pc + 1);
                continue;
            }
            case Op::Compute: {
                fetch_compute(t, c);
                set_pc(t, T.pc + 1);
                continue;
            }
            case Op::Fence:
                if (c.fence == FenceKind::CompilerOnly) {
                    set_pc(t, T.pc + 1);
                    continue;
                }
                if (c.fence == FenceKind::WriteWrite) {
                    Action a;
                    a.k = AK::WwCnt;
                    a.t = t;
                    a.a = T.wwf_count;
                    T.wwf_count++;
                    act(std::move(a));
                    set_pc(t, T.pc + 1);
                    continue;
                }
                [[fallthrough]];
            default: {
                fetch_shared(t, c);
                set_pc(t, T.pc + 1);
                if (T.stall != Stall::None) set_stall(t, Stall::None);
                continue;
            }
            }
        }
    }

    int push_inst(int t, Inst i) {
        auto& T = rt_[t];
        int pos = (int)T.stream.size();
        Action a;
        a.k = AK::Fetch;
        a.t = t;
        a.h = fetch_fact(t, pos, i.ci);
        thash(t, a.h);
        T.stream.push_back(i);
        act(std::move(a));
        return pos;
    }

    void fetch_local(int t, const CInstr& c, Value v, bool ready) {
        auto& T = rt_[t];
        Inst i;
        i.ci = (int)(&c - code_[t].data());
        i.local = true;
        i.loc = -2;
        int pos = push_inst(t, i);
        if (ready) {
            local_done(t, pos, v);
        } else {
            T.pending_local.set(pos);
        }
        if (c.dst >= 0) set_reg_def(t, c.dst, pos);
    }

    void fetch_compute(int t, const CInstr& c) {
        auto& T = rt_[t];
        Inst i;
        i.ci = (int)(&c - code_[t].data());
        i.local = true;
        i.loc = -2;
        i.in_a = c.a.is_reg() ? T.reg_def[c.a.reg] : -1;
        bool two = c.bop != BinOp::Mov && c.bop != BinOp::Not;
        i.in_b = two && c.b.is_reg() ? T.reg_def[c.b.reg] : -1;
        int pos = push_inst(t, i);
        if (inputs_done(t, T.stream[pos]))
            local_done(t, pos, eval_compute(t, pos));
        else
            T.pending_local.set(pos);
        set_reg_def(t, c.dst, pos);
    }

    Value eval_compute(int t, int pos) {
        auto& T = rt_[t];
        const Inst& i = T.stream[pos];
        const CInstr& c = code_[t][i.ci];
        Value a = operand_value(t, c.a, i.in_a);
        if (c.bop == BinOp::Mov) return a;
        if (c.bop == BinOp::Not) return Value::integer(a.truthy() ? 0 : 1);
        Value b = operand_value(t, c.b, i.in_b);
        switch (c.bop) {
        case BinOp::Add: return Value::integer(a.v + b.v);
        case BinOp::Sub: return Value::integer(a.v - b.v);
        case BinOp::Eq: return Value::integer(a == b ? 1 : 0);
        case BinOp::Ne: return Value::integer(a != b ? 1 : 0);
        case BinOp::Gt: return Value::integer(a.gt(b) ? 1 : 0);
        default: return a;
        }
    }

    void local_done(int t, int pos, Value v) {
        auto& T = rt_[t];
        Inst& i = T.stream[pos];
        i.val = v;
        i.done = true;
        T.pending_local.clear(pos);
        Action a;
        a.k = AK::LocalDone;
        a.t = t;
        a.a = pos;
        a.h = done_fact(t, pos);
        thash(t, a.h);
        act(std::move(a));
    }

    void fetch_shared(int t, const CInstr& c) {
        auto& T = rt_[t];
        Inst i;
        i.ci = (int)(&c - code_[t].data());
        i.wwf_before = T.wwf_count;
        if (c.op == Op::Fence) {
            i.loc = -2;
        } else if (c.akind == AddrExpr::Kind::RegField) {
            i.in_addr = T.reg_def[c.base_reg];
            if (i.in_addr >= 0 && T.stream[i.in_addr].done)
                i.loc = resolve_addr(t, T.stream[i.in_addr].val, c);
            else
                i.loc = -1;
        } else {
            i.loc = c.static_loc;
        }
        switch (c.op) {
        case Op::Store:
        case Op::Swap:
            i.in_a = c.a.is_reg() ? T.reg_def[c.a.reg] : -1;
            break;
        case Op::Cas:
            i.in_a = c.a.is_reg() ? T.reg_def[c.a.reg] : -1;
            i.in_b = c.b.is_reg() ? T.reg_def[c.b.reg] : -1;
            break;
        case Op::Await:
            if (c.pred == AwaitPred::Equals) i.in_a = c.a.is_reg() ? T.reg_def[c.a.reg] : -1;
            break;
        default: break;
        }
        int pos = push_inst(t, i);
        T.pending.set(pos);
        T.pending_count++;
        if (c.acq_src) T.acq_src.set(pos);
        if (c.sc) T.sc_bits.set(pos);
        if (c.is_write) T.writes.set(pos);
        if (c.op == Op::Await) T.awaits.set(pos);
        if (T.stream[pos].loc == -1) T.unresolved.set(pos);
        if (c.dst >= 0) set_reg_def(t, c.dst, pos);
    }

    // Flat location for a field access through a base value; -1 = bad base or
    // missing field (caller decides poison vs hard error).
    int resolve_addr(int t, const Value& base, const CInstr& c) {
        (void)t;
        if (!base.is_ref()) return -1;
        return locs_.resolve((int)base.v, c.fid);
    }

    // ---- propagation after a commit or guess ----
    // Evaluates ready local computes, resolves addresses, verifies guesses.
    // Returns false if a guess verification failed (prune).
    bool propagate(int t) {
        auto& T = rt_[t];
        bool changed = true;
        while (changed) {
            changed = false;
            // local computes
            for (int w = 0; w < 4; w++) {
                uint64_t bits = T.pending_local.w[w];
                while (bits) {
                    int pos = w * 64 + __builtin_ctzll(bits);
                    bits &= bits - 1;
                    if (inputs_done(t, T.stream[pos])) {
                        local_done(t, pos, eval_compute(t, pos));
                        changed = true;
                    }
                }
            }
            // address resolution
            for (int w = 0; w < 4; w++) {
                uint64_t bits = T.unresolved.w[w];
                while (bits) {
                    int pos = w * 64 + __builtin_ctzll(bits);
                    bits &= bits - 1;
                    Inst& i = T.stream[pos];
                    if (i.in_addr >= 0 && T.stream[i.in_addr].done) {
                        int loc = resolve_addr(t, T.stream[i.in_addr].val, code_[t][i.ci]);
                        resolve_loc(t, pos, loc == -1 ? -3 : loc);  // -3 = bad base, resolved
                        changed = true;
                    }
                }
            }
            // guess verification
            for (size_t gi = 0; gi < T.guesses.size();) {
                const Guess g = T.guesses[gi];
                if (g.cond_pos >= 0 && T.stream[g.cond_pos].done) {
                    bool actual = T.stream[g.cond_pos].val.truthy();
                    if (actual != g.dir_then) return false;  // mispredicted: prune
                    Action a;
                    a.k = AK::GuessRemove;
                    a.t = t;
                    a.a = (int)gi;
                    a.g = g;
                    a.h = guess_fact(t, g);
                    thash(t, a.h);
                    T.guesses.erase(T.guesses.begin() + gi);
                    act(std::move(a));
                    cover_branch(t, find_branch_ci(t, g), g.dir_then);
                    changed = true;
                } else {
                    gi++;
                }
            }
        }
        if (!pump(t)) return false;
        try_quiesce(t);
        return true;
    }

    int find_branch_ci(int, const Guess& g) const { return g.br_ci; }

    void cover_branch(int t, int ci, bool then) {
        auto& cell = summary_.coverage[t][ci];
        if (then)
            cell.branch_then++;
        else
            cell.branch_else++;
    }

    // ---- committability ----
    bool committable(int t, int pos) const {
        auto& T = rt_[t];
        const Inst& i = T.stream[pos];
        const CInstr& c = code_[t][i.ci];
        if (!inputs_done(t, i)) return false;
        bool sc_total = cfg_.model == Model::ScOracle;
        if (sc_total) {
            if (engine_detail::any_below(T.pending, pos)) return false;
            if (engine_detail::any_below(T.pending_local, pos)) return false;
        } else {
            // R2: pending acquire source before pos
            if (engine_detail::any_common_below(T.acq_src, T.pending, pos)) return false;
            // R3: release target requires an empty earlier pending set
            if (c.release && engine_detail::any_below(T.pending, pos)) return false;
            // R4
            if (c.sc && engine_detail::any_common_below(T.sc_bits, T.pending, pos)) return false;
            // R1 (+ conservative unresolved aliasing)
            if (c.op != Op::Fence) {
                if (engine_detail::any_below(T.unresolved, pos)) return false;
                for (int w = 0; w <= (pos >> 6); w++) {
                    uint64_t bits = T.pending.w[w];
                    if (w == (pos >> 6)) bits &= (pos & 63) ? ((1ull << (pos & 63)) - 1) : 0;
                    while (bits) {
                        int q = w * 64 + __builtin_ctzll(bits);
                        bits &= bits - 1;
                        if (T.stream[q].loc == i.loc) return false;
                    }
                }
            }
            // R7: write-write fence between an earlier pending write and this write
            if (c.is_write && T.wwf_count > 0) {
                for (int w = 0; w <= (pos >> 6); w++) {
                    uint64_t bits = T.pending.w[w] & T.writes.w[w];
                    if (w == (pos >> 6)) bits &= (pos & 63) ? ((1ull << (pos & 63)) - 1) : 0;
                    while (bits) {
                        int q = w * 64 + __builtin_ctzll(bits);
                        bits &= bits - 1;
                        if (T.stream[q].wwf_before < i.wwf_before) return false;
                    }
                }
            }
            // verified prefix for writes, RMWs and full fences, and R8: no
            // earlier await (a spin-loop exit) may still be pending
            if (c.write_like) {
                for (auto& g : T.guesses)
                    if (g.before_pos <= pos) return false;
                if (engine_detail::any_common_below(T.awaits, T.pending, pos)) return false;
            }
        }
        if (c.op == Op::Await) {
            if (i.loc < 0) return false;  // bad base: never satisfiable; blocks
            Value cur = mem_[i.loc];
            switch (c.pred) {
            case AwaitPred::NonZero: return cur.truthy();
            case AwaitPred::Zero: return !cur.truthy();
            case AwaitPred::Equals: return cur == operand_value(t, c.a, i.in_a);
            }
        }
        return true;
    }

    bool speculative(int t, int pos) const {
        for (auto& g : rt_[t].guesses)
            if (g.before_pos <= pos) return true;
        return false;
    }

    // A guess only ever helps if some instance fetched after the branch could
    // commit before the condition resolves. The condition's inputs sit below
    // the branch, so while any of them is a pending acquire source, R2 blocks
    // everything fetched after it. If every pending leaf of the condition's
    // dependency closure is an acquire source, the last of them to commit
    // resolves the branch in the same propagation step — speculation can then
    // never enable a commit and would only multiply states.
    bool guess_could_help(int t, int cpos) const {
        if (cpos < 0) return true;  // undefined condition: keep old behavior
        auto& T = rt_[t];
        Bits seen;
        int stack[engine_detail::kMaxStream];
        int n = 0;
        stack[n++] = cpos;
        seen.set(cpos);
        while (n > 0) {
            int pos = stack[--n];
            const Inst& i = T.stream[pos];
            if (i.done) continue;
            if (i.local) {
                if (i.in_a >= 0 && !seen.test(i.in_a)) {
                    seen.set(i.in_a);
                    stack[n++] = i.in_a;
                }
                if (i.in_b >= 0 && !seen.test(i.in_b)) {
                    seen.set(i.in_b);
                    stack[n++] = i.in_b;
                }
            } else if (!code_[t][i.ci].acq_src) {
                return true;
            }
        }
        return false;
    }

    // ---- transitions ----
    struct Choice {
        enum Kind : uint8_t { Commit, GuessThen, GuessElse, Nondet0, Nondet1 } kind;
        int t;
        int pos;  // commit position
    };

    void build_menu(std::vector<Choice>& out) const {
        out.clear();
        // forced nondet first: lowest stalled thread forks deterministically
        for (size_t t = 0; t < rt_.size(); t++) {
            if (rt_[t].stall == Stall::Nondet) {
                out.push_back({Choice::Nondet0, (int)t, -1});
                out.push_back({Choice::Nondet1, (int)t, -1});
                return;
            }
        }
        for (size_t t = 0; t < rt_.size(); t++) {
            auto& T = rt_[t];
            for (int w = 0; w < 4; w++) {
                uint64_t bits = T.pending.w[w];
                while (bits) {
                    int pos = w * 64 + __builtin_ctzll(bits);
                    bits &= bits - 1;
                    if (committable((int)t, pos)) out.push_back({Choice::Commit, (int)t, pos});
                }
            }
            if (T.stall == Stall::Branch && cfg_.speculation &&
                (int)T.guesses.size() < cfg_.max_pending_guesses &&
                guess_could_help((int)t, T.stall_cond_pos)) {
                out.push_back({Choice::GuessThen, (int)t, -1});
                out.push_back({Choice::GuessElse, (int)t, -1});
            }
        }
    }

    bool apply(const Choice& ch) {
        switch (ch.kind) {
        case Choice::Commit: return apply_commit(ch.t, ch.pos);
        case Choice::GuessThen:
        case Choice::GuessElse: return apply_guess(ch.t, ch.kind == Choice::GuessThen);
        case Choice::Nondet0:
        case Choice::Nondet1: return apply_nondet(ch.t, ch.kind == Choice::Nondet1);
        }
        return false;
    }

    bool apply_commit(int t, int pos) {
        auto& T = rt_[t];
        Inst& i = T.stream[pos];
        const CInstr& c = code_[t][i.ci];
        summary_.coverage[t][i.ci].commits++;

        Value rv, wv;
        bool has_r = false, has_w = false, bad = false;
        if (c.op != Op::Fence && i.loc < 0) bad = true;
        if (bad) {
            if (c.op == Op::Store || c.op == Op::Swap || c.op == Op::Cas) {
                runtime_error(t, i, "write through a non-reference base");
                return false;
            }
            if (!speculative(t, pos)) {
                runtime_error(t, i, "read through a non-reference base");
                return false;
            }
            // speculative bad read: poison the path and read 0; if the guess
            // verifies the poison flag surfaces in the trace and summary
            mark_poison();
            rv = Value::integer(0);
            has_r = true;
        } else {
            switch (c.op) {
            case Op::Load:
            case Op::Await:
                rv = mem_[i.loc];
                has_r = true;
                break;
            case Op::Store:
                wv = operand_value(t, c.a, i.in_a);
                has_w = true;
                break;
            case Op::Swap:
                rv = mem_[i.loc];
                wv = operand_value(t, c.a, i.in_a);
                has_r = has_w = true;
                break;
            case Op::Cas: {
                rv = mem_[i.loc];
                has_r = true;
                if (rv == operand_value(t, c.a, i.in_a)) {
                    wv = operand_value(t, c.b, i.in_b);
                    has_w = true;
                }
                break;
            }
            case Op::Fence: break;
            default: return false;
            }
        }
        if (has_w) write_mem(i.loc, wv);

        i.done = true;
        i.rv = rv;
        i.wv = wv;
        i.has_r = has_r;
        i.has_w = has_w;
        switch (c.op) {
        case Op::Load:
        case Op::Await: i.val = rv; break;
        case Op::Swap: i.val = rv; break;
        case Op::Cas: i.val = c.conv == CasConv::ReturnsOld ? rv : Value::integer(has_w ? 1 : 0);
            break;
        default: break;
        }
        T.pending.clear(pos);
        T.pending_count--;
        {
            Action a;
            a.k = AK::Done;
            a.t = t;
            a.a = pos;
            a.h = done_fact(t, pos);
            thash(t, a.h);
            act(std::move(a));
        }
        {
            Action a;
            a.k = AK::Event;
            a.t = t;
            events_.push_back(make_event(t, pos));
            act(std::move(a));
        }
        return propagate(t);
    }

    Event make_event(int t, int pos) const {
        const Inst& i = rt_[t].stream[pos];
        const CInstr& c = code_[t][i.ci];
        Event e;
        e.seq = (int)events_.size();
        e.tid = t;
        e.po = pos;
        e.op = c.op;
        e.mode = c.mode;
        e.loc = i.loc >= 0 ? i.loc : -1;
        e.has_r = i.has_r;
        e.has_w = i.has_w;
        e.r = i.rv;
        e.w = i.wv;
        e.point_id = c.point_id;
        if (c.tag) e.tag = *c.tag;
        return e;
    }

    bool apply_guess(int t, bool then) {
        auto& T = rt_[t];
        const CInstr& c = code_[t][T.pc];
        Guess g;
        g.cond_pos = T.reg_def[c.dst];
        g.before_pos = (int)T.stream.size();
        g.br_ci = T.pc;
        g.dir_then = then;
        Action a;
        a.k = AK::GuessPush;
        a.t = t;
        a.h = guess_fact(t, g);
        thash(t, a.h);
        T.guesses.push_back(g);
        act(std::move(a));
        set_pc(t, then ? c.t1 : c.t2);
        set_stall(t, Stall::None);
        return propagate(t);
    }

    bool apply_nondet(int t, bool one) {
        auto& T = rt_[t];
        const CInstr& c = code_[t][T.pc];
        fetch_local(t, c, Value::integer(one ? 1 : 0), true);
        set_pc(t, T.pc + 1);
        set_stall(t, Stall::None);
        return propagate(t);
    }

    void runtime_error(int t, const Inst& i, const char* what) {
        summary_.runtime_errors++;
        if (summary_.first_runtime_error.empty()) {
            std::ostringstream os;
            os << "thread " << t << ", " << to_string(code_[t][i.ci].kind) << ": " << what;
            summary_.first_runtime_error = os.str();
        }
    }

    // ---- terminal handling ----
    bool thread_finished(int t) const {
        auto& T = rt_[t];
        return T.stall == Stall::Returned && T.pending_count == 0 && T.guesses.empty();
    }

    void visit_terminal(bool complete) {
        if (!visitor_ || !*visitor_) return;
        ExecutionTrace tr;
        tr.commit_order = events_;
        tr.complete = complete;
        tr.poisoned = poisoned_;
        for (int g = 0; g < locs_.n_globals; g++) tr.final_globals.emplace_back(locs_.name(g), mem_[g]);
        if (!complete) {
            for (size_t t = 0; t < rt_.size(); t++) {
                auto& T = rt_[t];
                for (int pos = 0; pos < (int)T.stream.size(); pos++) {
                    if (!T.pending.test(pos)) continue;
                    const CInstr& c = code_[t][T.stream[pos].ci];
                    if (c.op != Op::Await) continue;
                    BlockedAwaitInfo b;
                    b.tid = (int)t;
                    b.loc = T.stream[pos].loc >= 0 ? T.stream[pos].loc : -1;
                    b.pred = c.pred;
                    if (c.pred == AwaitPred::Equals && T.stream[pos].in_a >= 0 &&
                        T.stream[T.stream[pos].in_a].done)
                        b.operand = T.stream[T.stream[pos].in_a].val;
                    else if (c.pred == AwaitPred::Equals && !c.a.is_reg())
                        b.operand = c.a.cval;
                    b.point_id = c.point_id;
                    if (c.tag) b.tag = *c.tag;
                    tr.blocked.push_back(b);
                }
            }
        }
        if ((*visitor_)(tr) == VisitResult::Stop) {
            stop_ = true;
            aborted_ = true;
            summary_.stopped_early = true;
        }
    }

    // ---- search ----
    std::pair<uint64_t, uint64_t> dfs(int depth) {
        if (stop_) return {0, 0};
        if (++tick_ % 4096 == 0 && deadline_valid_ &&
            std::chrono::steady_clock::now() >= deadline_) {
            summary_.hit_timeout = true;
            stop_ = true;
            aborted_ = true;
            return {0, 0};
        }
        if ((uint64_t)depth > cfg_.max_steps) {
            summary_.truncated_paths++;
            return {0, 0};
        }
        if (auto* e = visited_.find(hash_)) return {e->complete, e->blocked};
        if (visited_.count >= cfg_.max_states) {
            summary_.state_limit_hit = true;
            stop_ = true;
            aborted_ = true;
            return {0, 0};
        }

        std::vector<Choice> menu;
        build_menu(menu);
        if (menu.empty()) {
            bool complete = true;
            for (size_t t = 0; t < rt_.size(); t++)
                if (!thread_finished((int)t)) complete = false;
            if (complete)
                summary_.distinct_complete++;
            else
                summary_.distinct_blocked++;
            visit_terminal(complete);
            uint64_t c = complete ? 1 : 0, b = complete ? 0 : 1;
            if (!stop_) visited_.insert(hash_, c, b);
            return {c, b};
        }

        uint64_t comp = 0, blk = 0;
        for (auto& ch : menu) {
            push_frame();
            bool ok = apply(ch);
            if (ok) {
                auto [c, b] = dfs(depth + 1);
                comp = engine_detail::sat_add(comp, c);
                blk = engine_detail::sat_add(blk, b);
            }
            pop_frame();
            if (stop_) return {comp, blk};
        }
        visited_.insert(hash_, comp, blk);
        return {comp, blk};
    }

    const Program& p_;
    EngineConfig cfg_;
    LocMap locs_;
    std::vector<std::vector<CInstr>> code_;
    std::vector<engine_detail::ThreadRt> rt_;
    std::vector<Value> mem_;
    std::vector<Action> journal_;
    std::vector<size_t> frames_;
    std::vector<Event> events_;
    H128 hash_;
    engine_detail::VisitedTable visited_;
    ExplorationSummary summary_;
    const Visitor* visitor_ = nullptr;
    bool poisoned_ = false;
    bool stop_ = false;
    bool aborted_ = false;
    bool deadline_valid_ = false;
    std::chrono::steady_clock::time_point deadline_;
    uint64_t tick_ = 0;
};

// ---------------------------------------------------------------------------

inline ExplorationSummary explore(const Program& p, const EngineConfig& cfg, const Visitor& v) {
    Engine e(p, cfg);
    return e.run(v);
}

inline ExplorationSummary sc_executions(const Program& p, EngineConfig cfg, const Visitor& v) {
    cfg.model = Model::ScOracle;
    return explore(p, cfg, v);
}

// One event per line: `#<seq> T<id> <kind>@<mode> <object>.<field> r=<val> w=<val> [src-tag]`;
// blocked awaits in a trailing section.
inline std::string dump_trace(const Program& p, const ExecutionTrace& tr) {
    LocMap lm(p);
    auto pv = [&](const Value& v) {
        if (v.is_ref()) return "&" + p.objects[v.v].name;
        return std::to_string(v.v);
    };
    std::ostringstream os;
    for (auto& e : tr.commit_order) {
        os << "#" << e.seq << " T" << e.tid << " ";
        switch (e.op) {
        case Op::Load: os << "load"; break;
        case Op::Store: os << "store"; break;
        case Op::Swap:
        case Op::Cas: os << "rmw"; break;
        case Op::Fence: os << "fence"; break;
        case Op::Await: os << "await"; break;
        default: os << "?"; break;
        }
        os << "@" << to_string(e.mode) << " " << (e.loc >= 0 ? lm.name(e.loc) : "-");
        os << " r=" << (e.has_r ? pv(e.r) : "-");
        os << " w=" << (e.has_w ? pv(e.w) : "-");
        os << " [" << (e.tag.empty() ? "-" : e.tag) << "]\n";
    }
    if (!tr.complete) {
        os << "blocked:\n";
        for (auto& b : tr.blocked) {
            os << "  T" << b.tid << " await " << (b.loc >= 0 ? lm.name(b.loc) : "<unresolved>")
               << " ";
            switch (b.pred) {
            case AwaitPred::NonZero: os << "nonzero"; break;
            case AwaitPred::Zero: os << "zero"; break;
            case AwaitPred::Equals: os << "eq " << pv(b.operand); break;
            }
            os << " [" << (b.tag.empty() ? "-" : b.tag) << "]\n";
        }
    }
    return os.str();
}

}  // namespace ordo
