#include <catch2/catch_amalgamated.hpp>

#include "ordo/ir.hpp"
#include "ordo/text.hpp"

using namespace ordo;

static Program sample() {
    ProgBuilder b("sample");
    b.global("v", Value::integer(0));
    b.object("node0", {{"next", Value::integer(0)},
                       {"spin", Value::integer(0)},
                       {"socket", Value::integer(-1)}});
    b.object("node1", {{"next", Value::integer(0)}, {"spin", Value::integer(0)},
                       {"socket", Value::integer(-1)}});
    b.numa_map({0, 1});
    b.final_assert("v", 2);
    for (int t = 0; t < 2; t++) {
        std::string me = t == 0 ? "node0" : "node1";
        b.thread_begin();
        b.fn("lock");
        b.st(AddrExpr::obj(me, "next"), ProgBuilder::c(0), Mode::Rlx, "l.c:3", "me->next = NULL");
        b.swap("prev", AddrExpr::global("v"), b.objref(me), Mode::Sc, "l.c:4",
               "prev = SWAP(&lock->tail, me)");
        b.br("prev", "Lwait", "Lgo");
        b.label("Lwait");
        b.st(AddrExpr::via(b.reg("prev"), "next"), b.objref(me), Mode::Rel, "l.c:6",
             "prev->next = me");
        b.await("w", AddrExpr::obj(me, "spin"), AwaitPred::NonZero, Mode::Acq, "l.c:7",
                ProgBuilder::c(0), "await me->spin != 0");
        b.label("Lgo");
        b.fn("unlock");
        b.cas("ok", AddrExpr::global("v"), b.objref(me), ProgBuilder::c(0), CasConv::ReturnsFlag,
              Mode::Sc, "l.c:9", "CAS(&lock->tail, me, NULL)");
        b.fence(FenceKind::WriteWrite, Mode::Rlx, "l.c:10");
        b.ld_pinned("x", AddrExpr::obj(me, "spin"), Mode::Rlx);
        b.st_pinned(AddrExpr::obj(me, "spin"), ProgBuilder::c(1), Mode::Rlx);
        b.nondet("nb");
        b.numanode("nn");
        b.binop("s", BinOp::Add, b.r("x"), ProgBuilder::c(1));
        b.notop("t", b.r("nb"));
        b.binop("u", BinOp::Gt, b.r("prev"), ProgBuilder::c(1));
        b.await("e", AddrExpr::obj(me, "spin"), AwaitPred::Equals, Mode::Rlx, "l.c:12", b.r("s"));
        b.jmp("Lend");
        b.label("Lend");
        b.ret();
        b.thread_end();
    }
    b.finish();
    return b.prog();
}

TEST_CASE("print then parse reprints byte-identically") {
    Program p = sample();
    std::string one = print_program(p);
    Program q = parse_program(one);
    std::string two = print_program(q);
    CHECK(one == two);
    CHECK(validate(q).empty());
    REQUIRE(q.points.size() == p.points.size());
    for (size_t i = 0; i < p.points.size(); i++) {
        CHECK(q.points[i].id == p.points[i].id);
        CHECK(q.points[i].func == p.points[i].func);
        CHECK(q.points[i].tag == p.points[i].tag);
        CHECK(q.points[i].ordinal == p.points[i].ordinal);
        CHECK(q.points[i].kind == p.points[i].kind);
        CHECK(q.points[i].mode == p.points[i].mode);
        CHECK(q.points[i].fixed == p.points[i].fixed);
        CHECK(q.points[i].snippet == p.points[i].snippet);
    }
}

TEST_CASE("parsed structure matches the original") {
    Program p = sample();
    Program q = parse_program(print_program(p));
    REQUIRE(q.threads.size() == 2);
    REQUIRE(q.threads[0].code.size() == p.threads[0].code.size());
    CHECK(q.name == "sample");
    CHECK(q.numa == std::vector<int>{0, 1});
    REQUIRE(q.final_assert.has_value());
    CHECK(q.final_assert->global == "v");
    CHECK(q.final_assert->expected == 2);
    REQUIRE(q.objects.size() == 2);
    CHECK(q.objects[0].fields[2].init == Value::integer(-1));
    // Branch targets resolved to the same instruction indexes.
    for (size_t i = 0; i < q.threads[0].code.size(); i++) {
        auto& a = p.threads[0].code[i];
        auto& b = q.threads[0].code[i];
        CHECK(a.op == b.op);
        if (a.op == Op::Branch) {
            CHECK(a.t1 == b.t1);
            CHECK(a.t2 == b.t2);
        }
        if (a.is_shared_access()) {
            CHECK(a.bp == b.bp);
            CHECK(a.pinned == b.pinned);
            if (a.bp < 0) CHECK(a.mode == b.mode);
        }
    }
}

TEST_CASE("fixed points survive the round trip") {
    ProgBuilder b("fx");
    b.global("g", Value::integer(0));
    b.thread_begin();
    b.set_fixed_points(true);
    b.ld("x", AddrExpr::global("g"), Mode::Acq, "q.c:1", "r = READ_ONCE(g)");
    b.set_fixed_points(false);
    b.st(AddrExpr::global("g"), ProgBuilder::c(1), Mode::Rel, "q.c:2");
    b.ret();
    b.thread_end();
    b.finish();
    Program q = parse_program(print_program(b.prog()));
    REQUIRE(q.points.size() == 2);
    CHECK(q.points[0].fixed);
    CHECK(q.points[0].snippet == "r = READ_ONCE(g)");
    CHECK_FALSE(q.points[1].fixed);
    CHECK(q.points[1].snippet.empty());
}

TEST_CASE("snippets with quotes and backslashes round-trip") {
    ProgBuilder b("quotes");
    b.global("g", Value::integer(0));
    b.thread_begin();
    b.ld("x", AddrExpr::global("g"), Mode::Rlx, "q.c:1", "say \"hi\\\" now");
    b.ret();
    b.thread_end();
    b.finish();
    Program q = parse_program(print_program(b.prog()));
    CHECK(q.points[0].snippet == "say \"hi\\\" now");
    CHECK(print_program(q) == print_program(b.prog()));
}

TEST_CASE("parse rejects malformed input with line numbers") {
    CHECK_THROWS_AS(parse_program("global g = 0\n"), ParseError);  // missing program
    CHECK_THROWS_AS(parse_program("program p\nthread 0:\n  load x g ^9\n"), ParseError);
    CHECK_THROWS_AS(parse_program("program p\nthread 0:\n  load x g @zzz!\n"), ParseError);
    CHECK_THROWS_AS(parse_program("program p\nthread 0:\n  br c L1 L2\n"), ParseError);
    CHECK_THROWS_AS(parse_program("program p\npoint 2 f t 0 load rlx\n"), ParseError);
    try {
        parse_program("program p\nthread 0:\n  load x g ^9\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }
}

TEST_CASE("point reference kind must match the instruction") {
    std::string src =
        "program p\n"
        "global g = 0\n"
        "point 1 f t 0 store rlx\n"
        "thread 0:\n"
        "  load x g ^1\n";
    CHECK_THROWS_AS(parse_program(src), ParseError);
}

TEST_CASE("comments and blank lines are ignored") {
    std::string src =
        "# a file header comment\n"
        "program p\n\n"
        "global g = 0  # trailing comment\n"
        "thread 0:\n"
        "  store g 1 @rlx!\n"
        "  ret\n";
    Program q = parse_program(src);
    CHECK(q.globals.size() == 1);
    REQUIRE(q.threads.size() == 1);
    CHECK(q.threads[0].code.size() == 2);
    CHECK(q.threads[0].code[0].pinned);
}
