#pragma once

// Built-in program corpus: classic reordering litmus tests and the
// compact-NUMA-aware queue lock in two encodings (textbook shape and the
// Linux kernel-patch shape), parameterized by thread count.

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordo/ir.hpp"

namespace ordo::programs {

using OutcomeSet = std::set<std::vector<int64_t>>;

// A litmus program plus the observation globals whose final values form an
// outcome. Each observed register is written to its own harness global at the
// end of the observing thread (pinned relaxed stores on private locations, so
// they never perturb the interesting accesses). The expected sets are the
// hand-derived reachable outcomes per model, cross-checked against both the
// engine and the independent brute-force enumerator by the test suite.
struct LitmusSpec {
    std::string name;
    Program prog;
    std::vector<std::string> obs;
    OutcomeSet expected_weak;
    OutcomeSet expected_sc;
};

namespace detail {
inline Operand c(int64_t v) { return Operand::constant(Value::integer(v)); }
inline Operand r(ProgBuilder& b, const std::string& n) { return Operand::of_reg(b.reg(n)); }
}  // namespace detail

// Message passing: T0 publishes data then a flag; T1 polls the flag then reads
// the data. Observed: (flag seen, data seen).
inline LitmusSpec litmus_mp(Mode data_st, Mode flag_st, Mode flag_ld, Mode data_ld,
                            const std::string& name) {
    using detail::c;
    ProgBuilder b(name);
    b.global("x", Value::integer(0));
    b.global("flag", Value::integer(0));
    b.global("o0", Value::integer(0));
    b.global("o1", Value::integer(0));
    b.thread_begin();
    b.fn("producer");
    b.st(AddrExpr::global("x"), c(1), data_st, "mp.c:2", "x = 1;");
    b.st(AddrExpr::global("flag"), c(1), flag_st, "mp.c:3", "flag = 1;");
    b.ret();
    b.thread_end();
    b.thread_begin();
    b.fn("consumer");
    b.ld("r0", AddrExpr::global("flag"), flag_ld, "mp.c:7", "r0 = flag;");
    b.ld("r1", AddrExpr::global("x"), data_ld, "mp.c:8", "r1 = x;");
    b.st_pinned(AddrExpr::global("o0"), detail::r(b, "r0"), Mode::Rlx);
    b.st_pinned(AddrExpr::global("o1"), detail::r(b, "r1"), Mode::Rlx);
    b.ret();
    b.thread_end();
    b.finish();
    return {name, b.prog(), {"o0", "o1"}};
}

// Store buffering: each thread stores its own location then loads the other's.
inline LitmusSpec litmus_sb(Mode m, const std::string& name) {
    using detail::c;
    ProgBuilder b(name);
    b.global("x", Value::integer(0));
    b.global("y", Value::integer(0));
    b.global("o0", Value::integer(0));
    b.global("o1", Value::integer(0));
    const char* tags[2][2] = {{"sb.c:2", "sb.c:3"}, {"sb.c:7", "sb.c:8"}};
    const char* mine[2] = {"x", "y"};
    const char* theirs[2] = {"y", "x"};
    const char* obs[2] = {"o0", "o1"};
    for (int t = 0; t < 2; t++) {
        b.thread_begin();
        b.fn(t == 0 ? "left" : "right");
        b.st(AddrExpr::global(mine[t]), c(1), m, tags[t][0]);
        b.ld("r", AddrExpr::global(theirs[t]), m, tags[t][1]);
        b.st_pinned(AddrExpr::global(obs[t]), detail::r(b, "r"), Mode::Rlx);
        b.ret();
        b.thread_end();
    }
    b.finish();
    return {name, b.prog(), {"o0", "o1"}};
}

// Load buffering: each thread loads the other's location then stores its own.
// `dep` threads the loaded value into the store (address-free data dependency).
inline LitmusSpec litmus_lb(bool dep, const std::string& name) {
    using detail::c;
    ProgBuilder b(name);
    b.global("x", Value::integer(0));
    b.global("y", Value::integer(0));
    b.global("o0", Value::integer(0));
    b.global("o1", Value::integer(0));
    const char* tags[2][2] = {{"lb.c:2", "lb.c:3"}, {"lb.c:7", "lb.c:8"}};
    const char* mine[2] = {"y", "x"};
    const char* theirs[2] = {"x", "y"};
    const char* obs[2] = {"o0", "o1"};
    for (int t = 0; t < 2; t++) {
        b.thread_begin();
        b.fn(t == 0 ? "left" : "right");
        b.ld("r", AddrExpr::global(theirs[t]), Mode::Rlx, tags[t][0]);
        b.st(AddrExpr::global(mine[t]), dep ? detail::r(b, "r") : c(1), Mode::Rlx, tags[t][1]);
        b.st_pinned(AddrExpr::global(obs[t]), detail::r(b, "r"), Mode::Rlx);
        b.ret();
        b.thread_end();
    }
    b.finish();
    return {name, b.prog(), {"o0", "o1"}};
}

// Coherence of reads: two same-location loads must not observe writes to that
// location out of order.
inline LitmusSpec litmus_corr() {
    using detail::c;
    ProgBuilder b("CoRR");
    b.global("x", Value::integer(0));
    b.global("o0", Value::integer(0));
    b.global("o1", Value::integer(0));
    b.thread_begin();
    b.fn("writer");
    b.st(AddrExpr::global("x"), c(1), Mode::Rlx, "corr.c:2");
    b.st(AddrExpr::global("x"), c(2), Mode::Rlx, "corr.c:3");
    b.ret();
    b.thread_end();
    b.thread_begin();
    b.fn("reader");
    b.ld("r0", AddrExpr::global("x"), Mode::Rlx, "corr.c:7");
    b.ld("r1", AddrExpr::global("x"), Mode::Rlx, "corr.c:8");
    b.st_pinned(AddrExpr::global("o0"), detail::r(b, "r0"), Mode::Rlx);
    b.st_pinned(AddrExpr::global("o1"), detail::r(b, "r1"), Mode::Rlx);
    b.ret();
    b.thread_end();
    b.finish();
    return {"CoRR", b.prog(), {"o0", "o1"}};
}

// Message passing with a built-in verdict: the consumer computes whether it
// saw the flag but stale data, and the final assertion demands it never does.
// The maximally relaxed passing annotation is data-store RLX, flag-store REL,
// flag-load ACQ, data-load RLX.
inline Program mp_checked(Mode data_st = Mode::Sc, Mode flag_st = Mode::Sc,
                          Mode flag_ld = Mode::Sc, Mode data_ld = Mode::Sc) {
    using detail::c;
    ProgBuilder b("mp-checked");
    b.global("x", Value::integer(0));
    b.global("flag", Value::integer(0));
    b.global("ok", Value::integer(1));
    b.final_assert("ok", 1);
    b.thread_begin();
    b.fn("producer");
    b.st(AddrExpr::global("x"), c(1), data_st, "mpo.c:2", "x = 1;");
    b.st(AddrExpr::global("flag"), c(1), flag_st, "mpo.c:3", "flag = 1;");
    b.ret();
    b.thread_end();
    b.thread_begin();
    b.fn("consumer");
    b.ld("r0", AddrExpr::global("flag"), flag_ld, "mpo.c:7", "r0 = flag;");
    b.ld("r1", AddrExpr::global("x"), data_ld, "mpo.c:8", "r1 = x;");
    b.binop("saw_flag", BinOp::Eq, detail::r(b, "r0"), c(1));
    b.binop("stale", BinOp::Eq, detail::r(b, "r1"), c(0));
    b.binop("both", BinOp::Add, detail::r(b, "saw_flag"), detail::r(b, "stale"));
    b.binop("bad", BinOp::Eq, detail::r(b, "both"), c(2));
    b.binop("okv", BinOp::Sub, c(1), detail::r(b, "bad"));
    b.st_pinned(AddrExpr::global("ok"), detail::r(b, "okv"), Mode::Rlx);
    b.ret();
    b.thread_end();
    b.finish();
    return b.prog();
}

inline std::vector<LitmusSpec> litmus_corpus() {
    std::vector<LitmusSpec> v;
    v.push_back(litmus_mp(Mode::Rlx, Mode::Rlx, Mode::Rlx, Mode::Rlx, "MP"));
    v.push_back(litmus_mp(Mode::Rlx, Mode::Rel, Mode::Acq, Mode::Rlx, "MP+rel/acq"));
    v.push_back(litmus_sb(Mode::Rlx, "SB"));
    v.push_back(litmus_sb(Mode::Sc, "SB+sc"));
    v.push_back(litmus_lb(false, "LB"));
    v.push_back(litmus_lb(true, "LB+data-dep"));
    v.push_back(litmus_corr());
    v[0].expected_weak = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    v[0].expected_sc = {{0, 0}, {0, 1}, {1, 1}};
    v[1].expected_weak = {{0, 0}, {0, 1}, {1, 1}};
    v[1].expected_sc = {{0, 0}, {0, 1}, {1, 1}};
    v[2].expected_weak = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    v[2].expected_sc = {{0, 1}, {1, 0}, {1, 1}};
    v[3].expected_weak = {{0, 1}, {1, 0}, {1, 1}};
    v[3].expected_sc = {{0, 1}, {1, 0}, {1, 1}};
    v[4].expected_weak = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    v[4].expected_sc = {{0, 0}, {0, 1}, {1, 0}};
    v[5].expected_weak = {{0, 0}};
    v[5].expected_sc = {{0, 0}};
    v[6].expected_weak = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    v[6].expected_sc = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    return v;
}

inline std::optional<LitmusSpec> litmus_by_name(const std::string& name) {
    for (auto& l : litmus_corpus())
        if (l.name == name) return l;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Compact NUMA-aware queue lock (textbook shape).
//
// Each client thread owns one queue node, acquires the lock once, increments
// a plain shared counter, and releases; the final assertion checks the count,
// so any mutual-exclusion failure surfaces as a lost update. Source tags name
// lines of the reference listing in docs/cna-reference.md; every shared access
// starts sequentially consistent (the optimizer's baseline). keep_lock_local
// is a nondeterministic boolean, standing in for the probabilistic threshold.

namespace detail {

// One client thread: cna_lock, v++, cna_unlock with find_successor inlined.
inline void cna_thread(ProgBuilder& b, const std::string& me_name) {
    auto me = [&](const char* f) { return AddrExpr::obj(me_name, f); };
    auto via = [&](const std::string& reg, const char* f) {
        return AddrExpr::via(b.reg(reg), f);
    };
    auto r = [&](const std::string& n) { return Operand::of_reg(b.reg(n)); };
    const Mode M = Mode::Sc;

    b.thread_begin();
    b.fn("cna_lock");
    b.st(me("next"), c(0), M, "cnalock.h:38", "me->next = 0;");
    b.st(me("socket"), c(-1), M, "cnalock.h:39", "me->socket = -1;");
    b.st(me("spin"), c(0), M, "cnalock.h:40", "me->spin = 0;");
    b.swap("pred", AddrExpr::global("tail"), b.objref(me_name), M, "cnalock.h:42",
           "cna_node_t *tail = SWAP(&lock->tail, me);");
    b.binop("lock_free", BinOp::Eq, r("pred"), c(0));
    b.br("lock_free", "L_fast", "L_slow");
    b.label("L_fast");
    b.st(me("spin"), c(1), M, "cnalock.h:45", "if (!tail) { me->spin = 1; return; }");
    b.jmp("L_cs");
    b.label("L_slow");
    b.numanode("nn");
    b.st(me("socket"), r("nn"), M, "cnalock.h:47", "me->socket = current_numa_node();");
    b.st(via("pred", "next"), b.objref(me_name), M, "cnalock.h:50", "tail->next = me;");
    b.await("spin_v", me("spin"), AwaitPred::NonZero, M, "cnalock.h:52", c(0),
            "while (!me->spin) { CPU_PAUSE(); }");
    b.label("L_cs");

    // critical section: plain (non-atomic) increment of the shared counter
    b.ld_pinned("v_r", AddrExpr::global("v"), Mode::Rlx);
    b.binop("v_w", BinOp::Add, r("v_r"), c(1));
    b.st_pinned(AddrExpr::global("v"), r("v_w"), Mode::Rlx);

    b.fn("cna_unlock");
    b.ld("u_next", me("next"), M, "cnalock.h:60", "if (!me->next) {");
    b.binop("u_has_next", BinOp::Ne, r("u_next"), c(0));
    b.br("u_has_next", "U_main", "U_empty");
    b.label("U_empty");
    b.ld("u_spin1", me("spin"), M, "cnalock.h:62", "if (me->spin == 1) {");
    b.binop("u_spin_is1", BinOp::Eq, r("u_spin1"), c(1));
    b.br("u_spin_is1", "U_trytail", "U_sec");
    b.label("U_trytail");
    b.cas("u_cas1", AddrExpr::global("tail"), b.objref(me_name), c(0),
          CasConv::ReturnsFlag, M, "cnalock.h:64",
          "if (CAS(&lock->tail, me, NULL) == me) return;");
    b.br("u_cas1", "U_done", "U_wait");
    b.label("U_sec");
    b.ld("u_secHead", me("spin"), M, "cnalock.h:67",
         "cna_node_t *secHead = (cna_node_t *) me->spin;");
    b.ld("u_secTail", via("u_secHead", "secTail"), M, "cnalock.h:68",
         "if (CAS(&lock->tail, me, secHead->secTail) == me) {");
    b.cas("u_cas2", AddrExpr::global("tail"), b.objref(me_name), r("u_secTail"),
          CasConv::ReturnsFlag, M, "cnalock.h:68",
          "if (CAS(&lock->tail, me, secHead->secTail) == me) {");
    b.br("u_cas2", "U_sechand", "U_wait");
    b.label("U_sechand");
    b.st(via("u_secHead", "spin"), c(1), M, "cnalock.h:69", "secHead->spin = 1;");
    b.jmp("U_done");
    b.label("U_wait");
    b.await("u_next2", me("next"), AwaitPred::NonZero, M, "cnalock.h:74", c(0),
            "while (me->next == NULL) { CPU_PAUSE(); }");
    b.label("U_main");
    b.nondet("keep");
    b.br("keep", "F_enter", "U_nolocal");

    b.label("F_enter");
    b.fn("find_successor");
    b.ld("f_next", me("next"), M, "cnalock.h:95", "cna_node_t *next = me->next;");
    b.ld("f_mysock", me("socket"), M, "cnalock.h:96", "int mySocket = me->socket;");
    b.binop("f_unset", BinOp::Eq, r("f_mysock"), c(-1));
    b.br("f_unset", "F_setsock", "F_sockok");
    b.label("F_setsock");
    b.numanode("f_nn");
    b.mov("f_mysock", r("f_nn"));
    b.label("F_sockok");
    b.ld("f_nsock", via("f_next", "socket"), M, "cnalock.h:99",
         "if (next->socket == mySocket) return next;");
    b.binop("f_same1", BinOp::Eq, r("f_nsock"), r("f_mysock"));
    b.br("f_same1", "F_retnext", "F_scan");
    b.label("F_retnext");
    b.mov("succ", r("f_next"));
    b.jmp("F_done");
    b.label("F_scan");
    b.mov("f_secHead", r("f_next"));
    b.mov("f_secTail", r("f_next"));
    b.ld("f_cur", via("f_next", "next"), M, "cnalock.h:103",
         "cna_node_t *cur = next->next;");
    b.label("F_loop");
    b.binop("f_curnz", BinOp::Ne, r("f_cur"), c(0));
    b.br("f_curnz", "F_body", "F_retnull");
    b.label("F_body");
    b.ld("f_csock", via("f_cur", "socket"), M, "cnalock.h:106",
         "if (cur->socket == mySocket) {");
    b.binop("f_same2", BinOp::Eq, r("f_csock"), r("f_mysock"));
    b.br("f_same2", "F_found", "F_adv");
    b.label("F_found");
    b.ld("f_spin1", me("spin"), M, "cnalock.h:107", "if (me->spin > 1)");
    b.binop("f_hassec", BinOp::Gt, r("f_spin1"), c(1));
    b.br("f_hassec", "F_append", "F_assign");
    b.label("F_append");
    b.ld("f_spinH", me("spin"), M, "cnalock.h:108",
         "((cna_node_t *)(me->spin))->secTail->next = secHead;");
    b.ld("f_spinT", via("f_spinH", "secTail"), M, "cnalock.h:108",
         "((cna_node_t *)(me->spin))->secTail->next = secHead;");
    b.st(via("f_spinT", "next"), r("f_secHead"), M, "cnalock.h:108",
         "((cna_node_t *)(me->spin))->secTail->next = secHead;");
    b.jmp("F_cut");
    b.label("F_assign");
    b.st(me("spin"), r("f_secHead"), M, "cnalock.h:110",
         "me->spin = (uintptr_t) secHead;");
    b.label("F_cut");
    b.st(via("f_secTail", "next"), c(0), M, "cnalock.h:111", "secTail->next = NULL;");
    b.ld("f_spinH2", me("spin"), M, "cnalock.h:112",
         "((cna_node_t *)(me->spin))->secTail = secTail;");
    b.st(via("f_spinH2", "secTail"), r("f_secTail"), M, "cnalock.h:112",
         "((cna_node_t *)(me->spin))->secTail = secTail;");
    b.mov("succ", r("f_cur"));
    b.jmp("F_done");
    b.label("F_adv");
    b.mov("f_secTail", r("f_cur"));
    b.ld("f_cur", via("f_cur", "next"), M, "cnalock.h:116", "cur = cur->next;");
    b.jmp("F_loop");
    b.label("F_retnull");
    b.mov("succ", c(0));
    b.label("F_done");

    b.fn("cna_unlock");
    b.binop("u_has_succ", BinOp::Ne, r("succ"), c(0));
    b.br("u_has_succ", "U_local", "U_nolocal");
    b.label("U_local");
    b.ld("u_spin2", me("spin"), M, "cnalock.h:79", "succ->spin = me->spin;");
    b.st(via("succ", "spin"), r("u_spin2"), M, "cnalock.h:79",
         "succ->spin = me->spin;");
    b.jmp("U_done");
    b.label("U_nolocal");
    b.ld("u_spin3", me("spin"), M, "cnalock.h:80", "} else if (me->spin > 1) {");
    b.binop("u_has_sec", BinOp::Gt, r("u_spin3"), c(1));
    b.br("u_has_sec", "U_flush", "U_direct");
    b.label("U_flush");
    b.ld("u_succ2", me("spin"), M, "cnalock.h:82", "succ = (cna_node_t *) me->spin;");
    b.ld("u_ftail", via("u_succ2", "secTail"), M, "cnalock.h:83",
         "succ->secTail->next = me->next;");
    b.ld("u_next3", me("next"), M, "cnalock.h:83", "succ->secTail->next = me->next;");
    b.st(via("u_ftail", "next"), r("u_next3"), M, "cnalock.h:83",
         "succ->secTail->next = me->next;");
    b.st(via("u_succ2", "spin"), c(1), M, "cnalock.h:84", "succ->spin = 1;");
    b.jmp("U_done");
    b.label("U_direct");
    b.ld("u_next4", me("next"), M, "cnalock.h:86", "me->next->spin = 1;");
    b.st(via("u_next4", "spin"), c(1), M, "cnalock.h:86", "me->next->spin = 1;");
    b.label("U_done");
    b.ret();
    b.thread_end();
}

}  // namespace detail

// Every mode starts SC; 40 barrier points shared by all threads.
inline Program cna(int n_threads) {
    if (n_threads < 1) throw std::invalid_argument("cna: need at least 1 thread");
    ProgBuilder b("cna");
    std::vector<std::string> nodes;
    for (int i = 0; i < n_threads; i++) {
        nodes.push_back("node" + std::to_string(i));
        b.object(nodes.back(), {{"next", Value::integer(0)},
                                {"socket", Value::integer(0)},
                                {"spin", Value::integer(0)},
                                {"secTail", Value::integer(0)}});
    }
    b.global("tail", Value::integer(0));
    b.global("v", Value::integer(0));
    b.final_assert("v", n_threads);
    for (auto& nm : nodes) detail::cna_thread(b, nm);
    b.finish();
    return b.prog();
}

// The known-good relaxed annotation: SWAP and both tail CASes stay SC, the
// hand-off stores are releases, the waits and queue-link loads are acquires,
// everything else relaxed.
inline Assignment cna_reference_assignment(const Program& p) {
    Assignment a(p.points.size(), Mode::Rlx);
    auto set = [&](const char* fn, const char* tag, int ord, Mode m) {
        for (auto& pt : p.points)
            if (pt.func == fn && pt.tag == tag && pt.ordinal == ord) {
                a[pt.id - 1] = m;
                return;
            }
        throw std::logic_error(std::string("no barrier point ") + fn + " " + tag);
    };
    set("cna_lock", "cnalock.h:42", 0, Mode::Sc);     // SWAP(&lock->tail, me)
    set("cna_lock", "cnalock.h:50", 0, Mode::Rel);    // tail->next = me
    set("cna_lock", "cnalock.h:52", 0, Mode::Acq);    // while (!me->spin)
    set("cna_unlock", "cnalock.h:60", 0, Mode::Acq);  // if (!me->next)
    set("cna_unlock", "cnalock.h:64", 0, Mode::Sc);   // CAS(&lock->tail, me, NULL)
    set("cna_unlock", "cnalock.h:68", 1, Mode::Sc);   // CAS(&lock->tail, me, secTail)
    set("cna_unlock", "cnalock.h:69", 0, Mode::Rel);  // secHead->spin = 1
    set("cna_unlock", "cnalock.h:79", 1, Mode::Rel);  // succ->spin = me->spin
    set("cna_unlock", "cnalock.h:84", 0, Mode::Rel);  // succ->spin = 1
    set("cna_unlock", "cnalock.h:86", 1, Mode::Rel);  // me->next->spin = 1
    set("find_successor", "cnalock.h:103", 0, Mode::Acq);  // cur = next->next
    set("find_successor", "cnalock.h:116", 0, Mode::Acq);  // cur = cur->next
    return a;
}

// cna() with the reference annotation applied.
inline Program cna_annotated(int n_threads) {
    Program p = cna(n_threads);
    if (auto err = apply_assignment(p, cna_reference_assignment(p)))
        throw std::logic_error(err->message);
    return p;
}

// The reference annotation minus the release on the local hand-off store
// (succ->spin = me->spin), on a single-socket topology so that hand-off path
// actually runs: the lost-update bug this store's release prevents.
inline Program cna_buggy(int n_threads) {
    Program p = cna(n_threads);
    p.numa.assign(p.threads.size(), 0);
    Assignment a = cna_reference_assignment(p);
    for (auto& pt : p.points)
        if (pt.func == "cna_unlock" && pt.tag == "cnalock.h:79" && pt.ordinal == 1)
            a[pt.id - 1] = Mode::Rlx;
    if (auto err = apply_assignment(p, a)) throw std::logic_error(err->message);
    return p;
}

// ---------------------------------------------------------------------------
// CNA in its Linux kernel-patch shape: the modified qspinlock slow path with
// the pending-bit logic removed, a circular secondary queue whose encoded
// tail is parked in the holder's ->locked field, and the intra-node handoff
// threshold driven by a client global written concurrently by the spawning
// thread. Source tags name lines of docs/linux-cna-reference.md; every
// barrier point is fixed at the mode of the kernel primitive it encodes.
//
// The patch figure this follows leaves several bodies elided; they are
// reconstructed here from the fragments it does show and the queue
// invariants those fragments imply. The reconstruction decisions:
//
//  - cna_order_queue does a single pass: it moves at most the one
//    remote-socket head waiter to the secondary queue (only when a waiter
//    exists behind it, so the main queue never loses its tail), and the
//    resulting head inherits the holder's preferred socket id.
//  - cna_splice_next keeps the secondary queue circular (tail->next ==
//    head) and starts the reign timer when it creates the queue; the timer
//    value is the constant 2, standing in for local_clock().
//  - cna_splice_head breaks the circular link *before* its release-CAS
//    publishes the secondary tail as the new main tail, and restores the
//    link if the CAS loses to a newly arrived waiter -- the restore store
//    is the fragment the figure shows, which fixes this order: breaking
//    after the CAS would race with that waiter's enqueue store.
//  - cna_try_clear_tail starts with the val == own-tail guard that the
//    unmodified slow path performs at its call site; with the secondary
//    queue empty it defers to __try_clear_tail, otherwise it promotes the
//    secondary queue and hands the lock to the promoted head.
//  - cna_lock_handoff passes the secondary queue and the reign timer to
//    the successor, except when the holder decided to flush, in which case
//    it splices the secondary queue in front of the successor and hands
//    the lock to the spliced head.
//  - await_while(cmpxchg_acquire(..) != 0) expands to test-and-test-and-set
//    form: a relaxed wait until the spinlock reads free, an acquire CAS,
//    and a retry branch (each retry needs an intervening acquisition by
//    another thread, so exploration stays finite).
//  - The priority-node check in cna_wait_head_or_lock is encoded even
//    though no thread runs in a priority context here, so its then-arm is
//    statically dead.
//
// Elided as concurrency-free: per-CPU node indexing and count bookkeeping,
// tail bit packing (tails are direct node references; a node's own encoded
// tail is a constant, not a shared read), and prefetchw.

namespace detail {

inline void linux_cna_thread(ProgBuilder& b, const std::string& me_name) {
    auto me = [&](const char* f) { return AddrExpr::obj(me_name, f); };
    auto via = [&](const std::string& reg, const char* f) {
        return AddrExpr::via(b.reg(reg), f);
    };
    auto r = [&](const std::string& n) { return Operand::of_reg(b.reg(n)); };
    const Mode RLX = Mode::Rlx;

    b.thread_begin();
    b.fn("queued_spin_lock_slowpath");
    b.fence(FenceKind::CompilerOnly, RLX, "qspinlock.c:12", "barrier();");
    b.st(me("locked"), c(0), RLX, "qspinlock.c:13", "node->locked = 0;");
    b.st(me("next"), c(0), RLX, "qspinlock.c:14", "node->next = NULL;");
    b.fn("cna_init_node");
    b.numanode("i_nn");
    b.st(me("numa"), r("i_nn"), RLX, "qspinlock_cna.h:21",
         "cn->numa_node = current_numa_node();");
    b.st(me("start"), c(0), RLX, "qspinlock_cna.h:22", "cn->start_time = 0;");
    b.fn("queued_spin_lock_slowpath");
    b.fence(FenceKind::WriteWrite, RLX, "qspinlock.c:17", "smp_wmb();");
    b.swap("old", AddrExpr::obj("lock", "val"), b.objref(me_name), RLX,
           "qspinlock.c:18", "old = xchg_tail(lock, tail);");
    b.mov("next", c(0));
    b.binop("has_pred", BinOp::Ne, r("old"), c(0));
    b.br("has_pred", "Q_wait", "Q_head");
    b.label("Q_wait");
    b.st(via("old", "next"), b.objref(me_name), RLX, "qspinlock.c:23",
         "WRITE_ONCE(prev->next, node);");
    b.await("q_lk", me("locked"), AwaitPred::NonZero, RLX, "qspinlock.c:24", c(0),
            "arch_mcs_spin_wait(&node->locked);");
    b.ld("next", me("next"), RLX, "qspinlock.c:25", "next = READ_ONCE(node->next);");
    b.label("Q_head");

    b.fn("cna_wait_head_or_lock");
    b.ld("w_st", me("start"), RLX, "qspinlock_cna.h:145", "if (!cn->start_time ||");
    b.binop("w_fresh", BinOp::Eq, r("w_st"), c(0));
    b.br("w_fresh", "W_cull", "W_thr");
    b.label("W_thr");
    b.fn("intra_node_threshold_reached");
    b.ld("w_th", AddrExpr::global("my_threshold"), RLX, "qspinlock_cna.h:27",
         "return my_threshold != 0;");
    b.fn("cna_wait_head_or_lock");
    b.binop("w_notth", BinOp::Eq, r("w_th"), c(0));
    b.br("w_notth", "W_cull", "W_flush");
    b.label("W_cull");
    b.ld("w_nn", me("numa"), RLX, "qspinlock_cna.h:146",
         "if (cn->numa_node == CNA_PRIORITY_NODE)");
    b.binop("w_prio", BinOp::Eq, r("w_nn"), c(-1));
    b.br("w_prio", "W_fixnuma", "W_order");
    b.label("W_fixnuma");
    b.numanode("w_rn");
    b.st(me("numa"), r("w_rn"), RLX, "qspinlock_cna.h:147",
         "cn->numa_node = current_numa_node();");
    b.label("W_order");
    b.fn("cna_order_queue");
    b.ld("o_next", me("next"), RLX, "qspinlock_cna.h:55",
         "next = READ_ONCE(node->next);");
    b.binop("o_has", BinOp::Ne, r("o_next"), c(0));
    b.br("o_has", "O_some", "W_done");
    b.label("O_some");
    b.ld("o_my", me("numa"), RLX, "qspinlock_cna.h:62", "numa_node = cn->numa_node;");
    b.ld("o_nn", via("o_next", "numa"), RLX, "qspinlock_cna.h:63",
         "next_numa_node = ((struct cna_node *)next)->numa_node;");
    b.binop("o_diff", BinOp::Ne, r("o_nn"), r("o_my"));
    b.br("o_diff", "O_remote", "W_done");
    b.label("O_remote");
    b.ld("o_nnext", via("o_next", "next"), RLX, "qspinlock_cna.h:66",
         "nnext = READ_ONCE(next->next);");
    b.binop("o_hasnn", BinOp::Ne, r("o_nnext"), c(0));
    b.br("o_hasnn", "O_splice", "O_fake");
    b.label("O_splice");
    b.fn("cna_splice_next");
    b.st(me("next"), r("o_nnext"), RLX, "qspinlock_cna.h:34", "node->next = nnext;");
    b.ld("s_lk", me("locked"), RLX, "qspinlock_cna.h:37", "if (!(node->locked > 1))");
    b.binop("s_sec", BinOp::Gt, r("s_lk"), c(1));
    b.br("s_sec", "S_app", "S_new");
    b.label("S_new");
    b.st(via("o_next", "next"), r("o_next"), RLX, "qspinlock_cna.h:39",
         "next->next = next;");
    b.st(me("start"), c(2), RLX, "qspinlock_cna.h:40",
         "cn->start_time = local_clock();");
    b.jmp("S_tail");
    b.label("S_app");
    b.ld("s_t2", me("locked"), RLX, "qspinlock_cna.h:43",
         "tail_2nd = decode_tail(node->locked);");
    b.ld("s_h2", via("s_t2", "next"), RLX, "qspinlock_cna.h:44",
         "head_2nd = tail_2nd->next;");
    b.st(via("s_t2", "next"), r("o_next"), RLX, "qspinlock_cna.h:46",
         "tail_2nd->next = next;");
    b.st(via("o_next", "next"), r("s_h2"), RLX, "qspinlock_cna.h:47",
         "next->next = head_2nd;");
    b.label("S_tail");
    b.st(me("locked"), r("o_next"), RLX, "qspinlock_cna.h:50",
         "node->locked = ((struct cna_node *)next)->encoded_tail;");
    b.fn("cna_order_queue");
    b.mov("o_cur", r("o_nnext"));
    b.jmp("O_inherit");
    b.label("O_fake");
    b.mov("o_cur", r("o_next"));
    b.label("O_inherit");
    b.st(via("o_cur", "numa"), r("o_my"), RLX, "qspinlock_cna.h:73",
         "((struct cna_node *)next)->numa_node = numa_node;");
    b.jmp("W_done");
    b.label("W_flush");
    b.fn("cna_wait_head_or_lock");
    b.st(me("start"), c(1), RLX, "qspinlock_cna.h:151",
         "cn->start_time = FLUSH_SECONDARY_QUEUE;");
    b.label("W_done");

    b.fn("queued_spin_lock_slowpath");
    b.mov("lval", c(0));  // cna_wait_head_or_lock returns 0
    b.br("lval", "L_locked", "L_read");
    b.label("L_read");
    b.ld("lval", AddrExpr::obj("lock", "val"), Mode::Acq, "qspinlock.c:30",
         "val = atomic_read_acquire(&lock->val);");
    b.label("L_locked");
    b.await("l_free", AddrExpr::obj("lock", "spinlock"), AwaitPred::Zero, RLX,
            "qspinlock.c:33", c(0),
            "await_while(cmpxchg_acquire(&lock->spinlock, 0, 1) != 0);");
    b.cas("l_got", AddrExpr::obj("lock", "spinlock"), c(0), c(1),
          CasConv::ReturnsFlag, Mode::Acq, "qspinlock.c:33",
          "await_while(cmpxchg_acquire(&lock->spinlock, 0, 1) != 0);");
    b.br("l_got", "T_enter", "L_locked");
    b.label("T_enter");

    b.fn("cna_try_clear_tail");
    b.binop("t_behind", BinOp::Ne, r("lval"), b.objref(me_name));
    b.br("t_behind", "H_handoff", "T_mine");
    b.label("T_mine");
    b.ld("t_lk", me("locked"), RLX, "qspinlock_cna.h:106",
         "if (!(node->locked > 1))");
    b.binop("t_sec", BinOp::Gt, r("t_lk"), c(1));
    b.br("t_sec", "T_splice", "T_mcs");
    b.label("T_mcs");
    b.fn("__try_clear_tail");
    b.cas("t_clr", AddrExpr::obj("lock", "val"), r("lval"), c(0),
          CasConv::ReturnsFlag, RLX, "qspinlock.c:49",
          "return atomic_try_cmpxchg_relaxed(&lock->val, &val, 0);");
    b.br("t_clr", "RELEASE", "H_handoff");
    b.label("T_splice");
    b.fn("cna_splice_head");
    b.ld("p_t2", me("locked"), RLX, "qspinlock_cna.h:85",
         "tail_2nd = decode_tail(node->locked);");
    b.ld("p_h2", via("p_t2", "next"), RLX, "qspinlock_cna.h:86",
         "head_2nd = tail_2nd->next;");
    b.st(via("p_t2", "next"), c(0), RLX, "qspinlock_cna.h:89",
         "tail_2nd->next = NULL;");
    b.cas("p_ok", AddrExpr::obj("lock", "val"), r("lval"), r("p_t2"),
          CasConv::ReturnsFlag, Mode::Rel, "qspinlock_cna.h:91",
          "if (!atomic_try_cmpxchg_release(&lock->val, &val, new)) {");
    b.br("p_ok", "P_won", "P_lost");
    b.label("P_lost");
    b.st(via("p_t2", "next"), r("p_h2"), RLX, "qspinlock_cna.h:93",
         "tail_2nd->next = head_2nd;");
    b.jmp("H_handoff");
    b.label("P_won");
    b.fn("cna_try_clear_tail");
    b.st(via("p_h2", "locked"), c(1), Mode::Rel, "qspinlock_cna.h:112",
         "arch_mcs_lock_handoff(&next->locked, 1);");
    b.jmp("RELEASE");

    b.label("H_handoff");
    b.fn("queued_spin_lock_slowpath");
    b.binop("h_none", BinOp::Eq, r("next"), c(0));
    b.br("h_none", "H_await", "H_have");
    b.label("H_await");
    b.await("next", me("next"), AwaitPred::NonZero, RLX, "qspinlock.c:39", c(0),
            "next = smp_cond_load_relaxed(&node->next, (VAL));");
    b.label("H_have");
    b.fn("cna_lock_handoff");
    b.mov("h_val", c(1));
    b.mov("h_next", r("next"));
    b.ld("h_lk", me("locked"), RLX, "qspinlock_cna.h:123", "if (node->locked > 1) {");
    b.binop("h_sec", BinOp::Gt, r("h_lk"), c(1));
    b.br("h_sec", "H_withsec", "H_store");
    b.label("H_withsec");
    b.ld("h_st", me("start"), RLX, "qspinlock_cna.h:124",
         "if (cn->start_time == FLUSH_SECONDARY_QUEUE) {");
    b.binop("h_fl", BinOp::Eq, r("h_st"), c(1));
    b.br("h_fl", "H_flush", "H_pass");
    b.label("H_flush");
    b.ld("f_t2", me("locked"), RLX, "qspinlock_cna.h:126",
         "tail_2nd = decode_tail(node->locked);");
    b.ld("f_h2", via("f_t2", "next"), RLX, "qspinlock_cna.h:127",
         "head_2nd = tail_2nd->next;");
    b.st(via("f_t2", "next"), r("h_next"), RLX, "qspinlock_cna.h:129",
         "tail_2nd->next = next;");
    b.mov("h_next", r("f_h2"));
    b.jmp("H_store");
    b.label("H_pass");
    b.mov("h_val", r("h_lk"));
    b.st(via("h_next", "start"), r("h_st"), RLX, "qspinlock_cna.h:134",
         "((struct cna_node *)next)->start_time = cn->start_time;");
    b.label("H_store");
    b.st(via("h_next", "locked"), r("h_val"), Mode::Rel, "qspinlock_cna.h:138",
         "arch_mcs_lock_handoff(&next->locked, val);");
    b.label("RELEASE");

    // critical section: plain increment of the shared counter
    b.ld_pinned("cs_r", AddrExpr::global("v"), Mode::Rlx);
    b.binop("cs_w", BinOp::Add, r("cs_r"), c(1));
    b.st_pinned(AddrExpr::global("v"), r("cs_w"), Mode::Rlx);

    b.fn("queued_spin_unlock");
    b.st(AddrExpr::obj("lock", "spinlock"), c(0), Mode::Rel, "qspinlock.c:54",
         "smp_store_release(&lock->spinlock, 0);");
    b.ret();
    b.thread_end();
}

}  // namespace detail

// The Linux-patch encoding: n_threads workers plus the spawning thread, whose
// only action is the concurrent my_threshold = 1 store. 47 barrier points,
// all fixed (2 acquire, 4 release, 41 relaxed).
inline Program linux_cna(int n_threads) {
    if (n_threads < 2)
        throw std::invalid_argument("linux_cna: need at least 2 threads");
    ProgBuilder b("linux-cna");
    b.object("lock", {{"spinlock", Value::integer(0)}, {"val", Value::integer(0)}});
    std::vector<std::string> nodes;
    for (int i = 0; i < n_threads; i++) {
        nodes.push_back("node" + std::to_string(i));
        b.object(nodes.back(), {{"locked", Value::integer(0)},
                                {"next", Value::integer(0)},
                                {"numa", Value::integer(0)},
                                {"start", Value::integer(0)}});
    }
    b.global("my_threshold", Value::integer(0));
    b.global("v", Value::integer(0));
    b.final_assert("v", n_threads);
    b.set_fixed_points(true);
    for (auto& nm : nodes) detail::linux_cna_thread(b, nm);
    b.thread_begin();  // the spawning thread, concurrent with the workers
    b.st_pinned(AddrExpr::global("my_threshold"), detail::c(1), Mode::Rlx);
    b.ret();
    b.thread_end();
    b.finish();
    return b.prog();
}

}  // namespace ordo::programs
