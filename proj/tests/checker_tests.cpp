#include <catch2/catch_amalgamated.hpp>

#include "ordo/checker.hpp"
#include "ordo/programs.hpp"

using namespace ordo;

namespace {
Operand cst(int64_t v) { return Operand::constant(Value::integer(v)); }
}

TEST_CASE("message passing verdicts across annotations") {
    CheckerConfig cfg;
    SECTION("all-SC passes") {
        auto r = check(programs::mp_checked(), cfg);
        CHECK(r.verdict == Verdict::Pass);
        CHECK_FALSE(r.witness.has_value());
    }
    SECTION("release/acquire publication passes") {
        auto r = check(programs::mp_checked(Mode::Rlx, Mode::Rel, Mode::Acq, Mode::Rlx), cfg);
        CHECK(r.verdict == Verdict::Pass);
    }
    SECTION("fully relaxed fails with a witness") {
        auto r = check(programs::mp_checked(Mode::Rlx, Mode::Rlx, Mode::Rlx, Mode::Rlx), cfg);
        REQUIRE(r.verdict == Verdict::AssertionViolation);
        REQUIRE(r.witness.has_value());
        CHECK(r.witness->complete);
        // the witness really ends with ok == 0
        bool found = false;
        for (auto& [n, v] : r.witness->final_globals)
            if (n == "ok") {
                found = true;
                CHECK(v.v == 0);
            }
        CHECK(found);
        auto [ok, fin] = Engine::replay(programs::mp_checked(Mode::Rlx, Mode::Rlx, Mode::Rlx,
                                                             Mode::Rlx),
                                        *r.witness);
        CHECK(ok);
        CHECK(fin == r.witness->final_globals);
        std::string text = explain(programs::mp_checked(Mode::Rlx, Mode::Rlx, Mode::Rlx,
                                                        Mode::Rlx),
                                   r);
        CHECK(text.find("assertion-violation") != std::string::npos);
        CHECK(text.find("reordered") != std::string::npos);
        CHECK(text.find("final state:") != std::string::npos);
    }
}

TEST_CASE("publication needs at least release on the flag store and acquire on its load") {
    CheckerConfig cfg;
    const Mode stores[3] = {Mode::Rlx, Mode::Rel, Mode::Sc};
    const Mode loads[3] = {Mode::Rlx, Mode::Acq, Mode::Sc};
    for (Mode fs : stores)
        for (Mode fl : loads) {
            auto r = check(programs::mp_checked(Mode::Rlx, fs, fl, Mode::Rlx), cfg);
            bool should_pass = fs != Mode::Rlx && fl != Mode::Rlx;
            INFO("flag store " << to_string(fs) << ", flag load " << to_string(fl));
            CHECK(r.verdict == (should_pass ? Verdict::Pass : Verdict::AssertionViolation));
        }
}

TEST_CASE("an unserved await is a liveness violation") {
    ProgBuilder b("stuck");
    b.global("x", Value::integer(0));
    b.thread_begin();
    b.fn("waiter");
    b.await("r", AddrExpr::global("x"), AwaitPred::NonZero, Mode::Acq, "stuck:2",
            Operand::constant(Value::integer(0)), "await x != 0");
    b.ret();
    b.thread_end();
    b.thread_begin();
    b.fn("idler");
    b.ret();
    b.thread_end();
    b.finish();
    auto r = check(b.prog());
    REQUIRE(r.verdict == Verdict::LivenessViolation);
    REQUIRE(r.witness.has_value());
    CHECK_FALSE(r.witness->complete);
    REQUIRE(r.witness->blocked.size() == 1);
    CHECK(r.witness->blocked[0].tid == 0);
    std::string text = explain(b.prog(), r);
    CHECK(text.find("liveness-violation") != std::string::npos);
    CHECK(text.find("blocked") != std::string::npos);
    CHECK(exit_code(r.verdict) == 2);
}

TEST_CASE("a safety violation outranks a concurrent liveness violation") {
    // waiter blocks forever when it reads x == 0, returns when it reads 1;
    // the final assertion fails on every complete execution
    ProgBuilder b("both");
    b.global("x", Value::integer(0));
    b.global("y", Value::integer(0));
    b.global("flag", Value::integer(0));
    b.final_assert("flag", 1);
    b.thread_begin();
    b.fn("waiter");
    b.ld("r", AddrExpr::global("x"), Mode::Acq, "both:2");
    b.br("r", "done", "spin");
    b.label("spin");
    b.await("r2", AddrExpr::global("y"), AwaitPred::NonZero, Mode::Acq, "both:4");
    b.label("done");
    b.ret();
    b.thread_end();
    b.thread_begin();
    b.fn("signaler");
    b.st(AddrExpr::global("x"), cst(1), Mode::Rel, "both:8");
    b.ret();
    b.thread_end();
    b.finish();
    auto r = check(b.prog());
    CHECK(r.verdict == Verdict::AssertionViolation);
    REQUIRE(r.witness.has_value());
    CHECK(r.witness->complete);
}

TEST_CASE("static validation failures yield invalid-program") {
    ProgBuilder b("bad");
    b.global("x", Value::integer(0));
    b.thread_begin();
    b.fn("t0");
    b.st(AddrExpr::global("x"), Operand::of_reg(b.reg("never_set")), Mode::Sc, "bad:2");
    b.ret();
    b.thread_end();
    b.finish();
    auto r = check(b.prog());
    CHECK(r.verdict == Verdict::InvalidProgram);
    CHECK_FALSE(r.diagnostics.empty());
    CHECK(exit_code(r.verdict) == 4);
    std::string text = explain(b.prog(), r);
    CHECK(text.find("invalid-program") != std::string::npos);
    CHECK(text.find("use-before-def") != std::string::npos);
}

TEST_CASE("truncated exploration is never reported as pass") {
    CheckerConfig cfg;
    cfg.engine.max_steps = 3;
    auto r = check(programs::mp_checked(), cfg);
    CHECK(r.verdict == Verdict::Timeout);
    CHECK(r.message.find("truncated") != std::string::npos);
    CHECK(exit_code(r.verdict) == 3);
}

TEST_CASE("state-budget exhaustion is never reported as pass") {
    CheckerConfig cfg;
    cfg.engine.max_states = 4;
    auto r = check(programs::mp_checked(), cfg);
    CHECK(r.verdict == Verdict::Timeout);
    CHECK(r.message.find("state budget") != std::string::npos);
}

TEST_CASE("a weak-regime pass implies a sequentially-consistent pass") {
    for (auto* prog : {"ra", "sc"}) {
        Program p = prog == std::string("ra")
                        ? programs::mp_checked(Mode::Rlx, Mode::Rel, Mode::Acq, Mode::Rlx)
                        : programs::mp_checked();
        CheckerConfig weak;
        auto rw = check(p, weak);
        REQUIRE(rw.verdict == Verdict::Pass);
        CheckerConfig sc;
        sc.engine.model = Model::ScOracle;
        auto rs = check(p, sc);
        CHECK(rs.verdict == Verdict::Pass);
    }
}

TEST_CASE("checking is deterministic including the witness") {
    Program p = programs::mp_checked(Mode::Rlx, Mode::Rlx, Mode::Rlx, Mode::Rlx);
    auto r1 = check(p);
    auto r2 = check(p);
    REQUIRE(r1.verdict == Verdict::AssertionViolation);
    REQUIRE(r2.verdict == Verdict::AssertionViolation);
    CHECK(explain(p, r1) == explain(p, r2));
}

TEST_CASE("exit codes follow the documented contract") {
    CHECK(exit_code(Verdict::Pass) == 0);
    CHECK(exit_code(Verdict::AssertionViolation) == 1);
    CHECK(exit_code(Verdict::LivenessViolation) == 2);
    CHECK(exit_code(Verdict::Timeout) == 3);
    CHECK(exit_code(Verdict::InvalidProgram) == 4);
}
