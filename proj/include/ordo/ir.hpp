#pragma once

// Concurrent-program IR: barrier-annotated shared-memory programs over a fixed
// set of named global cells and named objects with fields. Threads run straight
// inlined instruction sequences; mode-carrying shared accesses reference entries
// of a program-wide barrier-point table shared across threads.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ordo {

enum class Mode : uint8_t { Rlx = 0, Acq = 1, Rel = 2, Sc = 3 };
enum class OpKind : uint8_t { Load, Store, Rmw, Fence, Await };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::Rlx: return "rlx";
    case Mode::Acq: return "acq";
    case Mode::Rel: return "rel";
    case Mode::Sc: return "sc";
    }
    return "?";
}

inline const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::Load: return "load";
    case OpKind::Store: return "store";
    case OpKind::Rmw: return "rmw";
    case OpKind::Fence: return "fence";
    case OpKind::Await: return "await";
    }
    return "?";
}

// Lattice: Rlx < Acq < Sc and Rlx < Rel < Sc; Acq and Rel are incomparable.
inline bool mode_leq(Mode a, Mode b) {
    if (a == b) return true;
    if (a == Mode::Rlx) return true;
    if (b == Mode::Sc) return true;
    return false;
}

inline bool mode_valid_for(OpKind k, Mode m) {
    switch (k) {
    case OpKind::Load:
    case OpKind::Await: return m != Mode::Rel;
    case OpKind::Store: return m != Mode::Acq;
    case OpKind::Rmw:
    case OpKind::Fence: return true;
    }
    return false;
}

// Valid modes from weakest to strongest, the probe order of the optimizer sweep.
inline std::vector<Mode> modes_weakest_first(OpKind k) {
    std::vector<Mode> out{Mode::Rlx};
    if (mode_valid_for(k, Mode::Acq)) out.push_back(Mode::Acq);
    if (mode_valid_for(k, Mode::Rel)) out.push_back(Mode::Rel);
    out.push_back(Mode::Sc);
    return out;
}

// Modes one covering step below m in the lattice restricted to k's valid modes.
inline std::vector<Mode> modes_one_step_down(OpKind k, Mode m) {
    std::vector<Mode> out;
    switch (m) {
    case Mode::Sc:
        if (mode_valid_for(k, Mode::Acq)) out.push_back(Mode::Acq);
        if (mode_valid_for(k, Mode::Rel)) out.push_back(Mode::Rel);
        if (out.empty()) out.push_back(Mode::Rlx);
        break;
    case Mode::Acq:
    case Mode::Rel: out.push_back(Mode::Rlx); break;
    case Mode::Rlx: break;
    }
    return out;
}

// A runtime value: an integer or a reference to a declared object. Null is the
// integer 0 (references never compare equal to any integer, and compare greater
// than any integer, which carries the `me->spin > 1` idiom).
struct Value {
    enum class Tag : uint8_t { Int, Ref };
    Tag tag = Tag::Int;
    int64_t v = 0;

    static Value integer(int64_t x) { return Value{Tag::Int, x}; }
    static Value ref(int64_t obj) { return Value{Tag::Ref, obj}; }

    bool is_ref() const { return tag == Tag::Ref; }
    bool truthy() const { return is_ref() || v != 0; }

    friend bool operator==(const Value& a, const Value& b) {
        return a.tag == b.tag && a.v == b.v;
    }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

    // Ordering used by `>` in guard expressions.
    bool gt(const Value& o) const {
        if (is_ref() && !o.is_ref()) return true;
        if (!is_ref() && o.is_ref()) return false;
        return v > o.v;
    }
};

struct GlobalDecl {
    std::string name;
    Value init;
};

struct FieldDecl {
    std::string name;
    Value init;
};

struct ObjectDecl {
    std::string name;
    std::vector<FieldDecl> fields;
};

// Shared-memory address of an access: a global cell, a field of a named object,
// or a field of the object referenced by a register at commit time.
struct AddrExpr {
    enum class Kind : uint8_t { Global, ObjField, RegField };
    Kind kind = Kind::Global;
    std::string sym;    // global or object name (Global/ObjField)
    std::string field;  // field name (ObjField/RegField)
    int reg = -1;       // base register (RegField)

    static AddrExpr global(std::string g) { return {Kind::Global, std::move(g), {}, -1}; }
    static AddrExpr obj(std::string o, std::string f) {
        return {Kind::ObjField, std::move(o), std::move(f), -1};
    }
    static AddrExpr via(int reg, std::string f) { return {Kind::RegField, {}, std::move(f), reg}; }

    friend bool operator==(const AddrExpr&, const AddrExpr&) = default;
};

struct Operand {
    enum class Kind : uint8_t { Const, Reg };
    Kind kind = Kind::Const;
    Value cval;
    int reg = -1;

    static Operand constant(Value v) { return {Kind::Const, v, -1}; }
    static Operand of_reg(int r) { return {Kind::Reg, {}, r}; }
    bool is_reg() const { return kind == Kind::Reg; }

    friend bool operator==(const Operand&, const Operand&) = default;
};

enum class Op : uint8_t {
    Load,
    Store,
    Swap,
    Cas,
    Fence,
    Await,
    Compute,
    Branch,
    Jump,
    Label,
    NondetBool,
    NumaNode,
    Return
};

enum class FenceKind : uint8_t { Full, WriteWrite, CompilerOnly };
enum class AwaitPred : uint8_t { NonZero, Zero, Equals };
enum class CasConv : uint8_t { ReturnsOld, ReturnsFlag };
enum class BinOp : uint8_t { Mov, Add, Sub, Eq, Ne, Gt, Not };

struct Instr {
    Op op = Op::Return;
    int dst = -1;  // result register (load/swap/cas/await/compute/nondet/numanode)
    AddrExpr addr;
    Operand a, b;  // store value | swap value | cas expected+desired | compute operands
    FenceKind fence = FenceKind::Full;
    AwaitPred pred = AwaitPred::NonZero;
    CasConv conv = CasConv::ReturnsOld;
    BinOp bop = BinOp::Mov;
    int t1 = -1, t2 = -1;  // branch then/else target, jump target (instr index)
    std::string label;     // label name (Label), target names kept for printing
    std::string lt1, lt2;
    Mode mode = Mode::Sc;  // effective mode when bp < 0
    int bp = -1;           // index into Program::points, -1 for non-point accesses
    bool pinned = false;   // non-point shared access with a fixed inline mode

    bool is_shared_access() const {
        switch (op) {
        case Op::Load:
        case Op::Store:
        case Op::Swap:
        case Op::Cas:
        case Op::Fence:
        case Op::Await: return true;
        default: return false;
        }
    }

    OpKind op_kind() const {
        switch (op) {
        case Op::Load: return OpKind::Load;
        case Op::Store: return OpKind::Store;
        case Op::Swap:
        case Op::Cas: return OpKind::Rmw;
        case Op::Fence: return OpKind::Fence;
        case Op::Await: return OpKind::Await;
        default: return OpKind::Load;
        }
    }
};

// A mode slot on a shared access, shared by every thread that executes the same
// static access. Identity is (function, source tag, ordinal); the ordinal
// disambiguates multiple accesses carrying the same source tag.
struct BarrierPoint {
    int id = 0;  // 1-based position in canonical listing order
    std::string func;
    std::string tag;
    int ordinal = 0;
    OpKind kind = OpKind::Load;
    Mode mode = Mode::Sc;
    bool fixed = false;   // listed, but not subject to optimization
    std::string snippet;  // reference source text for reports (optional)
    int func_index = 0;   // declaration order of `func`
    int seq = 0;          // emission order within `func`
};

struct FinalAssert {
    std::string global;
    int64_t expected = 0;
};

struct ThreadCode {
    int id = 0;
    std::vector<std::string> regs;  // register names, index = register id
    std::vector<Instr> code;
};

struct Program {
    std::string name;
    std::vector<GlobalDecl> globals;
    std::vector<ObjectDecl> objects;
    std::vector<ThreadCode> threads;
    std::vector<int> numa;  // numa node per thread index; empty = id mod 2
    std::vector<std::string> functions;  // declaration order, for point sorting
    std::vector<BarrierPoint> points;    // canonical listing order
    std::optional<FinalAssert> final_assert;

    int numa_of(int tid) const {
        if (tid >= 0 && tid < (int)numa.size()) return numa[tid];
        return tid % 2;
    }
    int find_global(const std::string& n) const {
        for (size_t i = 0; i < globals.size(); i++)
            if (globals[i].name == n) return (int)i;
        return -1;
    }
    int find_object(const std::string& n) const {
        for (size_t i = 0; i < objects.size(); i++)
            if (objects[i].name == n) return (int)i;
        return -1;
    }
};

// ---------------------------------------------------------------------------
// Barrier-point listing and assignments

using Assignment = std::vector<Mode>;

// Points are kept sorted by (function declaration order, emission order); the
// returned sequence is the canonical optimizer sweep order. Ids are stable for
// byte-identical programs.
inline const std::vector<BarrierPoint>& list_barrier_points(const Program& p) {
    return p.points;
}

inline Assignment current_assignment(const Program& p) {
    Assignment a;
    a.reserve(p.points.size());
    for (auto& pt : p.points) a.push_back(pt.mode);
    return a;
}

struct ApplyError {
    std::string message;
};

// Replaces every point's mode. Errors on length mismatch or a mode invalid for
// the point's operation kind; never partially applies.
inline std::optional<ApplyError> apply_assignment(Program& p, const Assignment& a) {
    if (a.size() != p.points.size())
        return ApplyError{"assignment length " + std::to_string(a.size()) +
                          " does not match barrier-point count " +
                          std::to_string(p.points.size())};
    for (size_t i = 0; i < a.size(); i++)
        if (!mode_valid_for(p.points[i].kind, a[i]))
            return ApplyError{std::string("mode ") + to_string(a[i]) + " invalid for " +
                              to_string(p.points[i].kind) + " point " +
                              std::to_string(p.points[i].id) + " (" + p.points[i].tag + ")"};
    for (size_t i = 0; i < a.size(); i++) p.points[i].mode = a[i];
    return std::nullopt;
}

inline Mode effective_mode(const Program& p, const Instr& in) {
    return in.bp >= 0 ? p.points[in.bp].mode : in.mode;
}

// ---------------------------------------------------------------------------
// Validation

struct Diagnostic {
    int thread = -1;
    int ordinal = -1;  // instruction index within the thread
    std::string rule;
    std::string message;
};

namespace detail {

inline void reg_uses(const Instr& in, std::vector<int>& out) {
    auto op = [&](const Operand& o) {
        if (o.is_reg()) out.push_back(o.reg);
    };
    if (in.addr.kind == AddrExpr::Kind::RegField &&
        (in.op == Op::Load || in.op == Op::Store || in.op == Op::Swap || in.op == Op::Cas ||
         in.op == Op::Await))
        out.push_back(in.addr.reg);
    switch (in.op) {
    case Op::Store:
    case Op::Swap: op(in.a); break;
    case Op::Cas:
        op(in.a);
        op(in.b);
        break;
    case Op::Await:
        if (in.pred == AwaitPred::Equals) op(in.a);
        break;
    case Op::Compute:
        op(in.a);
        if (in.bop != BinOp::Mov && in.bop != BinOp::Not) op(in.b);
        break;
    case Op::Branch: out.push_back(in.dst); break;  // condition register
    default: break;
    }
}

inline int reg_def(const Instr& in) {
    switch (in.op) {
    case Op::Load:
    case Op::Swap:
    case Op::Cas:
    case Op::Await:
    case Op::Compute:
    case Op::NondetBool:
    case Op::NumaNode: return in.dst;
    default: return -1;
    }
}

}  // namespace detail

// Structural checks: named locations resolve, modes are valid for their
// operation kinds, branch targets are in range, and every register is assigned
// on every path before it is used (forward must-assign dataflow per thread).
inline std::vector<Diagnostic> validate(const Program& p) {
    std::vector<Diagnostic> out;
    auto diag = [&](int t, int i, std::string rule, std::string msg) {
        out.push_back({t, i, std::move(rule), std::move(msg)});
    };

    for (size_t pi = 0; pi < p.points.size(); pi++) {
        auto& pt = p.points[pi];
        if (!mode_valid_for(pt.kind, pt.mode))
            diag(-1, -1, "mode-validity",
                 std::string("barrier point ") + std::to_string(pt.id) + " (" + pt.tag +
                     "): mode " + to_string(pt.mode) + " invalid for " + to_string(pt.kind));
    }
    if (p.final_assert && p.find_global(p.final_assert->global) < 0)
        diag(-1, -1, "location-resolution",
             "final assertion references undeclared global " + p.final_assert->global);

    for (auto& t : p.threads) {
        const auto& code = t.code;
        int nregs = (int)t.regs.size();
        for (size_t i = 0; i < code.size(); i++) {
            const Instr& in = code[i];
            if (in.is_shared_access()) {
                Mode m = effective_mode(p, in);
                if (!mode_valid_for(in.op_kind(), m))
                    diag(t.id, (int)i, "mode-validity",
                         std::string("mode ") + to_string(m) + " invalid for " +
                             to_string(in.op_kind()));
                if (in.op != Op::Fence) {
                    switch (in.addr.kind) {
                    case AddrExpr::Kind::Global:
                        if (p.find_global(in.addr.sym) < 0)
                            diag(t.id, (int)i, "location-resolution",
                                 "undeclared global " + in.addr.sym);
                        break;
                    case AddrExpr::Kind::ObjField: {
                        int oi = p.find_object(in.addr.sym);
                        if (oi < 0) {
                            diag(t.id, (int)i, "location-resolution",
                                 "undeclared object " + in.addr.sym);
                        } else {
                            bool found = false;
                            for (auto& f : p.objects[oi].fields)
                                if (f.name == in.addr.field) found = true;
                            if (!found)
                                diag(t.id, (int)i, "location-resolution",
                                     "object " + in.addr.sym + " has no field " + in.addr.field);
                        }
                        break;
                    }
                    case AddrExpr::Kind::RegField: break;  // register checked below
                    }
                }
                if (in.bp >= 0 && in.bp < (int)p.points.size()) {
                    if (p.points[in.bp].kind != in.op_kind())
                        diag(t.id, (int)i, "point-kind",
                             "barrier point kind mismatch at point " +
                                 std::to_string(p.points[in.bp].id));
                } else if (in.bp >= (int)p.points.size()) {
                    diag(t.id, (int)i, "point-kind", "barrier point index out of range");
                }
            }
            if (in.op == Op::Branch || in.op == Op::Jump) {
                if (in.t1 < 0 || in.t1 >= (int)code.size() ||
                    (in.op == Op::Branch && (in.t2 < 0 || in.t2 >= (int)code.size())))
                    diag(t.id, (int)i, "branch-target", "branch target out of range");
            }
        }

        // Must-assign dataflow. IN[i] = intersection of OUT over predecessors.
        size_t n = code.size();
        if (n == 0) continue;
        std::vector<std::vector<int>> preds(n);
        for (size_t i = 0; i < n; i++) {
            const Instr& in = code[i];
            auto edge = [&](int to) {
                if (to >= 0 && to < (int)n) preds[to].push_back((int)i);
            };
            if (in.op == Op::Jump) {
                edge(in.t1);
            } else if (in.op == Op::Branch) {
                edge(in.t1);
                edge(in.t2);
            } else if (in.op != Op::Return && i + 1 < n) {
                edge((int)i + 1);
            }
        }
        size_t words = (nregs + 63) / 64;
        auto all_ones = std::vector<uint64_t>(words, ~0ull);
        std::vector<std::vector<uint64_t>> inb(n, all_ones), outb(n, all_ones);
        if (!inb.empty()) inb[0].assign(words, 0);
        bool changed = true;
        while (changed) {
            changed = false;
            for (size_t i = 0; i < n; i++) {
                std::vector<uint64_t> cur = i == 0 ? std::vector<uint64_t>(words, 0) : all_ones;
                if (i != 0) {
                    if (preds[i].empty()) {
                        cur = all_ones;  // unreachable; facts are vacuous
                    } else {
                        for (int pr : preds[i])
                            for (size_t w = 0; w < words; w++) cur[w] &= outb[pr][w];
                    }
                }
                if (i == 0 && !preds[0].empty())
                    for (int pr : preds[0])
                        for (size_t w = 0; w < words; w++) cur[w] &= outb[pr][w];
                if (cur != inb[i]) {
                    inb[i] = cur;
                    changed = true;
                }
                auto o = cur;
                int d = detail::reg_def(code[i]);
                if (d >= 0) o[d / 64] |= 1ull << (d % 64);
                if (o != outb[i]) {
                    outb[i] = o;
                    changed = true;
                }
            }
        }
        for (size_t i = 0; i < n; i++) {
            std::vector<int> uses;
            detail::reg_uses(code[i], uses);
            for (int r : uses) {
                if (r < 0 || r >= nregs) {
                    diag(t.id, (int)i, "use-before-def", "register index out of range");
                } else if (!(inb[i][r / 64] >> (r % 64) & 1)) {
                    diag(t.id, (int)i, "use-before-def",
                         "register " + t.regs[r] + " may be used before assignment");
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Program builder. Emits per-thread code while deduplicating barrier points
// across threads by (function, tag, ordinal). Labels resolve at thread_end().

class ProgBuilder {
public:
    explicit ProgBuilder(std::string name) { prog_.name = std::move(name); }

    Program& prog() { return prog_; }

    void global(const std::string& n, Value init) { prog_.globals.push_back({n, init}); }
    void object(const std::string& n, std::vector<FieldDecl> fields) {
        prog_.objects.push_back({n, std::move(fields)});
    }
    void numa_map(std::vector<int> m) { prog_.numa = std::move(m); }
    void final_assert(const std::string& g, int64_t v) { prog_.final_assert = {{g, v}}; }

    int thread_begin() {
        cur_ = ThreadCode{};
        cur_.id = (int)prog_.threads.size();
        regmap_.clear();
        labels_.clear();
        fixups_.clear();
        tag_ordinal_.clear();
        return cur_.id;
    }

    void fn(const std::string& name) {
        cur_fn_ = name;
        for (size_t i = 0; i < prog_.functions.size(); i++)
            if (prog_.functions[i] == name) {
                cur_fn_idx_ = (int)i;
                return;
            }
        cur_fn_idx_ = (int)prog_.functions.size();
        prog_.functions.push_back(name);
        fn_seq_[name] = 0;
    }

    int reg(const std::string& name) {
        auto it = regmap_.find(name);
        if (it != regmap_.end()) return it->second;
        int id = (int)cur_.regs.size();
        cur_.regs.push_back(name);
        regmap_[name] = id;
        return id;
    }

    // Shared accesses with a barrier point.
    void ld(const std::string& dst, AddrExpr a, Mode m, const std::string& tag,
            const std::string& snip = "") {
        Instr in;
        in.op = Op::Load;
        in.dst = reg(dst);
        in.addr = std::move(a);
        in.bp = point(OpKind::Load, m, tag, snip);
        emit(in);
    }
    void st(AddrExpr a, Operand v, Mode m, const std::string& tag,
            const std::string& snip = "") {
        Instr in;
        in.op = Op::Store;
        in.addr = std::move(a);
        in.a = v;
        in.bp = point(OpKind::Store, m, tag, snip);
        emit(in);
    }
    void swap(const std::string& dst, AddrExpr a, Operand v, Mode m, const std::string& tag,
              const std::string& snip = "") {
        Instr in;
        in.op = Op::Swap;
        in.dst = reg(dst);
        in.addr = std::move(a);
        in.a = v;
        in.bp = point(OpKind::Rmw, m, tag, snip);
        emit(in);
    }
    void cas(const std::string& dst, AddrExpr a, Operand expected, Operand desired, CasConv cv,
             Mode m, const std::string& tag, const std::string& snip = "") {
        Instr in;
        in.op = Op::Cas;
        in.dst = reg(dst);
        in.addr = std::move(a);
        in.a = expected;
        in.b = desired;
        in.conv = cv;
        in.bp = point(OpKind::Rmw, m, tag, snip);
        emit(in);
    }
    void await(const std::string& dst, AddrExpr a, AwaitPred pr, Mode m, const std::string& tag,
               Operand eq = Operand::constant(Value::integer(0)),
               const std::string& snip = "") {
        Instr in;
        in.op = Op::Await;
        in.dst = reg(dst);
        in.addr = std::move(a);
        in.pred = pr;
        in.a = eq;
        in.bp = point(OpKind::Await, m, tag, snip);
        emit(in);
    }
    void fence(FenceKind k, Mode m, const std::string& tag, const std::string& snip = "") {
        Instr in;
        in.op = Op::Fence;
        in.fence = k;
        if (k == FenceKind::Full) {
            in.bp = point(OpKind::Fence, m, tag, snip);
        } else {
            in.mode = m;  // write-write and compiler-only fences carry no point
            in.pinned = true;
        }
        emit(in);
    }

    // Pinned shared accesses: fixed inline mode, no optimizer-visible point.
    void ld_pinned(const std::string& dst, AddrExpr a, Mode m) {
        Instr in;
        in.op = Op::Load;
        in.dst = reg(dst);
        in.addr = std::move(a);
        in.mode = m;
        in.pinned = true;
        emit(in);
    }
    void st_pinned(AddrExpr a, Operand v, Mode m) {
        Instr in;
        in.op = Op::Store;
        in.addr = std::move(a);
        in.a = v;
        in.mode = m;
        in.pinned = true;
        emit(in);
    }

    // Marks subsequently created points as fixed (listed, not optimizable).
    void set_fixed_points(bool f) { fixed_points_ = f; }

    // Locals and control flow.
    void mov(const std::string& dst, Operand v) {
        Instr in;
        in.op = Op::Compute;
        in.bop = BinOp::Mov;
        in.dst = reg(dst);
        in.a = v;
        emit(in);
    }
    void binop(const std::string& dst, BinOp op, Operand a, Operand b) {
        Instr in;
        in.op = Op::Compute;
        in.bop = op;
        in.dst = reg(dst);
        in.a = a;
        in.b = b;
        emit(in);
    }
    void notop(const std::string& dst, Operand a) {
        Instr in;
        in.op = Op::Compute;
        in.bop = BinOp::Not;
        in.dst = reg(dst);
        in.a = a;
        emit(in);
    }
    void label(const std::string& l) {
        Instr in;
        in.op = Op::Label;
        in.label = l;
        labels_[l] = (int)cur_.code.size();
        emit(in);
    }
    void br(const std::string& cond, const std::string& lthen, const std::string& lelse) {
        Instr in;
        in.op = Op::Branch;
        in.dst = reg(cond);
        in.lt1 = lthen;
        in.lt2 = lelse;
        fixups_.push_back((int)cur_.code.size());
        emit(in);
    }
    void jmp(const std::string& l) {
        Instr in;
        in.op = Op::Jump;
        in.lt1 = l;
        fixups_.push_back((int)cur_.code.size());
        emit(in);
    }
    void nondet(const std::string& dst) {
        Instr in;
        in.op = Op::NondetBool;
        in.dst = reg(dst);
        emit(in);
    }
    void numanode(const std::string& dst) {
        Instr in;
        in.op = Op::NumaNode;
        in.dst = reg(dst);
        emit(in);
    }
    void ret() {
        Instr in;
        in.op = Op::Return;
        emit(in);
    }

    Operand r(const std::string& name) { return Operand::of_reg(reg(name)); }
    static Operand c(int64_t v) { return Operand::constant(Value::integer(v)); }
    Operand objref(const std::string& name) {
        int oi = prog_.find_object(name);
        return Operand::constant(Value::ref(oi));
    }

    void thread_end() {
        for (int i : fixups_) {
            Instr& in = cur_.code[i];
            in.t1 = labels_.at(in.lt1);
            if (in.op == Op::Branch) in.t2 = labels_.at(in.lt2);
        }
        prog_.threads.push_back(std::move(cur_));
    }

    // Sorts points canonically and assigns 1-based ids; call once after all
    // threads are built.
    void finish() {
        std::vector<int> order(prog_.points.size());
        for (size_t i = 0; i < order.size(); i++) order[i] = (int)i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            auto& x = prog_.points[a];
            auto& y = prog_.points[b];
            if (x.func_index != y.func_index) return x.func_index < y.func_index;
            return x.seq < y.seq;
        });
        std::vector<int> newidx(order.size());
        std::vector<BarrierPoint> sorted;
        sorted.reserve(order.size());
        for (size_t i = 0; i < order.size(); i++) {
            newidx[order[i]] = (int)i;
            sorted.push_back(prog_.points[order[i]]);
            sorted.back().id = (int)i + 1;
        }
        prog_.points = std::move(sorted);
        for (auto& t : prog_.threads)
            for (auto& in : t.code)
                if (in.bp >= 0) in.bp = newidx[in.bp];
    }

private:
    int point(OpKind kind, Mode m, const std::string& tag, const std::string& snip) {
        int ord = tag_ordinal_[cur_fn_ + "\x1f" + tag]++;
        for (size_t i = 0; i < prog_.points.size(); i++) {
            auto& pt = prog_.points[i];
            if (pt.func == cur_fn_ && pt.tag == tag && pt.ordinal == ord) return (int)i;
        }
        BarrierPoint pt;
        pt.func = cur_fn_;
        pt.func_index = cur_fn_idx_;
        pt.tag = tag;
        pt.ordinal = ord;
        pt.kind = kind;
        pt.mode = m;
        pt.fixed = fixed_points_;
        pt.snippet = snip;
        pt.seq = fn_seq_[cur_fn_]++;
        prog_.points.push_back(pt);
        return (int)prog_.points.size() - 1;
    }

    void emit(Instr in) { cur_.code.push_back(std::move(in)); }

    Program prog_;
    ThreadCode cur_;
    std::string cur_fn_ = "main";
    int cur_fn_idx_ = -1;
    bool fixed_points_ = false;
    std::unordered_map<std::string, int> regmap_;
    std::unordered_map<std::string, int> labels_;
    std::unordered_map<std::string, int> fn_seq_;
    std::unordered_map<std::string, int> tag_ordinal_;  // per-thread emission counter
    std::vector<int> fixups_;
};

}  // namespace ordo
