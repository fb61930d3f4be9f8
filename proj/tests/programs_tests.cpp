#include <catch2/catch_amalgamated.hpp>

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "ordo/checker.hpp"
#include "ordo/engine.hpp"
#include "ordo/programs.hpp"
#include "ordo/text.hpp"

using namespace ordo;

namespace {

CheckResult run_check(const Program& p, int timeout_s = 60) {
    CheckerConfig cfg;
    cfg.engine.timeout = std::chrono::seconds(timeout_s);
    return check(p, cfg);
}

const BarrierPoint& point_at(const Program& p, int id) {
    REQUIRE(id >= 1);
    REQUIRE(id <= (int)p.points.size());
    return p.points[id - 1];
}

const BarrierPoint& point_tagged(const Program& p, const std::string& tag, int ordinal = 0) {
    for (auto& pt : p.points)
        if (pt.tag == tag && pt.ordinal == ordinal) return pt;
    FAIL("no point tagged " << tag << " ordinal " << ordinal);
    return p.points.front();
}

// Total commit count over every instruction carrying the tag, all threads.
uint64_t tag_commits(const Program& p, const CheckResult& r, const std::string& tag) {
    uint64_t total = 0;
    for (size_t t = 0; t < p.threads.size(); t++) {
        auto& code = p.threads[t].code;
        for (size_t i = 0; i < code.size(); i++) {
            if (code[i].bp >= 0 && p.points[code[i].bp].tag == tag)
                total += r.summary.coverage[t][i].commits;
        }
    }
    return total;
}

}  // namespace

TEST_CASE("lock encoding lists exactly forty shared-access points") {
    Program p = programs::cna(2);
    auto& pts = list_barrier_points(p);
    REQUIRE(pts.size() == 40);
    for (auto& pt : pts) {
        CHECK(pt.mode == Mode::Sc);  // optimizer baseline
        CHECK_FALSE(pt.fixed);
        CHECK(pt.tag.rfind("cnalock.h:", 0) == 0);
        CHECK_FALSE(pt.snippet.empty());
    }
    // function blocks in listing order
    for (int id = 1; id <= 8; id++) CHECK(point_at(p, id).func == "cna_lock");
    for (int id = 9; id <= 26; id++) CHECK(point_at(p, id).func == "cna_unlock");
    for (int id = 27; id <= 40; id++) CHECK(point_at(p, id).func == "find_successor");

    // acquisition path
    CHECK(point_at(p, 1).tag == "cnalock.h:38");
    CHECK(point_at(p, 1).kind == OpKind::Store);
    CHECK(point_at(p, 4).tag == "cnalock.h:42");
    CHECK(point_at(p, 4).kind == OpKind::Rmw);
    CHECK(point_at(p, 7).tag == "cnalock.h:50");
    CHECK(point_at(p, 7).kind == OpKind::Store);
    CHECK(point_at(p, 8).tag == "cnalock.h:52");
    CHECK(point_at(p, 8).kind == OpKind::Await);
    // release path
    CHECK(point_at(p, 9).tag == "cnalock.h:60");
    CHECK(point_at(p, 9).kind == OpKind::Load);
    CHECK(point_at(p, 11).tag == "cnalock.h:64");
    CHECK(point_at(p, 11).kind == OpKind::Rmw);
    CHECK(point_at(p, 13).tag == "cnalock.h:68");
    CHECK(point_at(p, 13).ordinal == 0);
    CHECK(point_at(p, 13).kind == OpKind::Load);
    CHECK(point_at(p, 14).tag == "cnalock.h:68");
    CHECK(point_at(p, 14).ordinal == 1);
    CHECK(point_at(p, 14).kind == OpKind::Rmw);
    CHECK(point_at(p, 16).tag == "cnalock.h:74");
    CHECK(point_at(p, 16).kind == OpKind::Await);
    CHECK(point_at(p, 18).tag == "cnalock.h:79");
    CHECK(point_at(p, 18).ordinal == 1);
    CHECK(point_at(p, 18).kind == OpKind::Store);
    CHECK(point_at(p, 26).tag == "cnalock.h:86");
    CHECK(point_at(p, 26).kind == OpKind::Store);
    // successor scan
    CHECK(point_at(p, 27).tag == "cnalock.h:95");
    CHECK(point_at(p, 30).tag == "cnalock.h:103");
    CHECK(point_at(p, 30).kind == OpKind::Load);
    CHECK(point_at(p, 40).tag == "cnalock.h:116");
    CHECK(point_at(p, 40).kind == OpKind::Load);

    // identical listing for any thread count
    Program p4 = programs::cna(4);
    REQUIRE(p4.points.size() == 40);
    for (size_t i = 0; i < 40; i++) {
        CHECK(p4.points[i].func == p.points[i].func);
        CHECK(p4.points[i].tag == p.points[i].tag);
        CHECK(p4.points[i].ordinal == p.points[i].ordinal);
        CHECK(p4.points[i].kind == p.points[i].kind);
    }
}

TEST_CASE("reference annotation shape: 3 sc, 4 acq, 5 rel, 28 rlx") {
    Program p = programs::cna(2);
    Assignment a = programs::cna_reference_assignment(p);
    REQUIRE(a.size() == 40);
    int sc = 0, acq = 0, rel = 0, rlx = 0;
    for (Mode m : a) {
        if (m == Mode::Sc) sc++;
        if (m == Mode::Acq) acq++;
        if (m == Mode::Rel) rel++;
        if (m == Mode::Rlx) rlx++;
    }
    CHECK(sc == 3);
    CHECK(acq == 4);
    CHECK(rel == 5);
    CHECK(rlx == 28);
    CHECK(a[4 - 1] == Mode::Sc);    // SWAP
    CHECK(a[7 - 1] == Mode::Rel);   // tail->next = me
    CHECK(a[8 - 1] == Mode::Acq);   // lock spin
    CHECK(a[9 - 1] == Mode::Acq);   // unlock me->next load
    CHECK(a[11 - 1] == Mode::Sc);   // CAS tail, NULL
    CHECK(a[14 - 1] == Mode::Sc);   // CAS tail, secTail
    CHECK(a[15 - 1] == Mode::Rel);  // secHead->spin = 1
    CHECK(a[18 - 1] == Mode::Rel);  // succ->spin = me->spin
    CHECK(a[24 - 1] == Mode::Rel);  // succ->spin = 1 (flush)
    CHECK(a[26 - 1] == Mode::Rel);  // me->next->spin = 1
    CHECK(a[30 - 1] == Mode::Acq);  // next->next
    CHECK(a[40 - 1] == Mode::Acq);  // cur->next
}

TEST_CASE("single thread takes the fast paths and passes") {
    auto r = run_check(programs::cna(1));
    CHECK(r.verdict == Verdict::Pass);
}

TEST_CASE("two threads: baseline and annotated lock keep mutual exclusion") {
    auto base = run_check(programs::cna(2));
    INFO(base.message);
    CHECK(base.verdict == Verdict::Pass);
    auto annotated = run_check(programs::cna_annotated(2));
    INFO(annotated.message);
    CHECK(annotated.verdict == Verdict::Pass);
}

TEST_CASE("dropping the hand-off release loses an update at two threads") {
    auto r = run_check(programs::cna_buggy(2));
    REQUIRE(r.verdict == Verdict::AssertionViolation);
    REQUIRE(r.witness.has_value());

    // the witness shows some thread's critical-section counter write landing
    // after its own hand-off store, i.e. inside the successor's turn
    Program p = programs::cna_buggy(2);
    LocMap lm(p);
    bool found = false;
    for (int tid = 0; tid < 2 && !found; tid++) {
        int handoff_seq = -1, vwrite_seq = -1;
        for (auto& ev : r.witness->commit_order) {
            if (ev.tid != tid) continue;
            if (ev.tag == "cnalock.h:79" && ev.op == Op::Store) handoff_seq = ev.seq;
            if (ev.op == Op::Store && lm.name(ev.loc) == "v") vwrite_seq = ev.seq;
        }
        if (handoff_seq >= 0 && vwrite_seq > handoff_seq) found = true;
    }
    CHECK(found);
}

TEST_CASE("lock programs survive the text format round trip") {
    Program p = programs::cna(2);
    std::string txt = print_program(p);
    Program q = parse_program(txt);
    REQUIRE(q.points.size() == p.points.size());
    for (size_t i = 0; i < p.points.size(); i++) {
        CHECK(q.points[i].func == p.points[i].func);
        CHECK(q.points[i].tag == p.points[i].tag);
        CHECK(q.points[i].ordinal == p.points[i].ordinal);
        CHECK(q.points[i].kind == p.points[i].kind);
        CHECK(q.points[i].mode == p.points[i].mode);
        CHECK(q.points[i].fixed == p.points[i].fixed);
    }
    REQUIRE(q.threads.size() == p.threads.size());
    for (size_t t = 0; t < p.threads.size(); t++)
        CHECK(q.threads[t].code.size() == p.threads[t].code.size());
    CHECK(print_program(q) == txt);

    Program pb = programs::cna_buggy(2);
    CHECK(print_program(parse_program(print_program(pb))) == print_program(pb));
}

TEST_CASE("kernel variant lists forty-seven pre-fixed points") {
    Program p = programs::linux_cna(2);
    REQUIRE(p.points.size() == 47);
    int acq = 0, rel = 0, rlx = 0, sc = 0;
    for (auto& pt : p.points) {
        CHECK(pt.fixed);
        CHECK_FALSE(pt.snippet.empty());
        if (pt.mode == Mode::Acq) acq++;
        if (pt.mode == Mode::Rel) rel++;
        if (pt.mode == Mode::Rlx) rlx++;
        if (pt.mode == Mode::Sc) sc++;
    }
    CHECK(acq == 2);
    CHECK(rel == 4);
    CHECK(rlx == 41);
    CHECK(sc == 0);

    // acquire side: spinlock test load + lock CAS of the test-and-set expansion
    CHECK(point_tagged(p, "qspinlock.c:30").kind == OpKind::Load);
    CHECK(point_tagged(p, "qspinlock.c:30").mode == Mode::Acq);
    CHECK(point_tagged(p, "qspinlock.c:33", 0).kind == OpKind::Await);
    CHECK(point_tagged(p, "qspinlock.c:33", 0).mode == Mode::Rlx);
    CHECK(point_tagged(p, "qspinlock.c:33", 1).kind == OpKind::Rmw);
    CHECK(point_tagged(p, "qspinlock.c:33", 1).mode == Mode::Acq);
    // release side: splice-head CAS, both hand-off grants, spinlock unlock
    CHECK(point_tagged(p, "qspinlock_cna.h:91").kind == OpKind::Rmw);
    CHECK(point_tagged(p, "qspinlock_cna.h:91").mode == Mode::Rel);
    CHECK(point_tagged(p, "qspinlock_cna.h:112").kind == OpKind::Store);
    CHECK(point_tagged(p, "qspinlock_cna.h:112").mode == Mode::Rel);
    CHECK(point_tagged(p, "qspinlock_cna.h:138").kind == OpKind::Store);
    CHECK(point_tagged(p, "qspinlock_cna.h:138").mode == Mode::Rel);
    CHECK(point_tagged(p, "qspinlock.c:54").kind == OpKind::Store);
    CHECK(point_tagged(p, "qspinlock.c:54").mode == Mode::Rel);
    // relaxed slow path: tail exchange, queue-wait await, tail clear
    CHECK(point_tagged(p, "qspinlock.c:18").kind == OpKind::Rmw);
    CHECK(point_tagged(p, "qspinlock.c:18").mode == Mode::Rlx);
    CHECK(point_tagged(p, "qspinlock.c:24").kind == OpKind::Await);
    CHECK(point_tagged(p, "qspinlock.c:24").mode == Mode::Rlx);
    CHECK(point_tagged(p, "qspinlock.c:49").kind == OpKind::Rmw);
    CHECK(point_tagged(p, "qspinlock.c:49").mode == Mode::Rlx);

    // identical listing for any worker count
    Program p3 = programs::linux_cna(3);
    REQUIRE(p3.points.size() == 47);
    for (size_t i = 0; i < 47; i++) {
        CHECK(p3.points[i].func == p.points[i].func);
        CHECK(p3.points[i].tag == p.points[i].tag);
        CHECK(p3.points[i].ordinal == p.points[i].ordinal);
        CHECK(p3.points[i].kind == p.points[i].kind);
        CHECK(p3.points[i].mode == p.points[i].mode);
    }
}

TEST_CASE("kernel variant needs at least two workers") {
    CHECK_THROWS_AS(programs::linux_cna(0), std::invalid_argument);
    CHECK_THROWS_AS(programs::linux_cna(1), std::invalid_argument);
}

TEST_CASE("kernel variant: two workers keep exclusion, and the secondary queue stays empty") {
    Program p = programs::linux_cna(2);
    auto r = run_check(p, 600);
    INFO(r.message);
    REQUIRE(r.verdict == Verdict::Pass);

    // a secondary queue needs three captive threads, so with two workers the
    // splice, flush and promote stores must never execute for real
    CHECK(tag_commits(p, r, "qspinlock_cna.h:39") == 0);   // new circular link
    CHECK(tag_commits(p, r, "qspinlock_cna.h:40") == 0);   // reign timer start
    CHECK(tag_commits(p, r, "qspinlock_cna.h:93") == 0);   // splice-head restore
    CHECK(tag_commits(p, r, "qspinlock_cna.h:112") == 0);  // promote grant
    CHECK(tag_commits(p, r, "qspinlock_cna.h:129") == 0);  // hand-off flush splice
    CHECK(tag_commits(p, r, "qspinlock_cna.h:151") == 0);  // flush sentinel
    // while the contended main-queue path does run
    CHECK(tag_commits(p, r, "qspinlock.c:23") > 0);  // enqueue link store
    CHECK(tag_commits(p, r, "qspinlock.c:49") > 0);  // tail-clear CAS
    CHECK(tag_commits(p, r, "qspinlock_cna.h:138") > 0);  // plain hand-off grant
}

TEST_CASE("kernel variant survives the text round trip") {
    Program p = programs::linux_cna(3);
    std::string txt = print_program(p);
    Program q = parse_program(txt);
    REQUIRE(q.points.size() == p.points.size());
    for (size_t i = 0; i < p.points.size(); i++) {
        CHECK(q.points[i].tag == p.points[i].tag);
        CHECK(q.points[i].mode == p.points[i].mode);
        CHECK(q.points[i].fixed == p.points[i].fixed);
    }
    CHECK(print_program(q) == txt);
}

TEST_CASE("shipped program files match the builders byte for byte") {
    auto path = [](const char* f) { return std::string(ORDO_PROGRAMS_DIR) + "/" + f; };
    auto slurp = [&](const std::string& fn) {
        std::ifstream f(fn);
        REQUIRE(f.good());
        std::ostringstream s;
        s << f.rdbuf();
        return s.str();
    };
    std::vector<std::pair<const char*, Program>> table;
    table.emplace_back("cna-2.prog", programs::cna(2));
    table.emplace_back("cna-4.prog", programs::cna(4));
    table.emplace_back("cna-annotated-2.prog", programs::cna_annotated(2));
    table.emplace_back("cna-buggy-2.prog", programs::cna_buggy(2));
    table.emplace_back("linux-cna-2.prog", programs::linux_cna(2));
    table.emplace_back("linux-cna-3.prog", programs::linux_cna(3));
    table.emplace_back("litmus-mp.prog", programs::litmus_by_name("MP")->prog);
    table.emplace_back("litmus-mp-rel-acq.prog", programs::litmus_by_name("MP+rel/acq")->prog);
    table.emplace_back("litmus-sb.prog", programs::litmus_by_name("SB")->prog);
    table.emplace_back("litmus-sb-sc.prog", programs::litmus_by_name("SB+sc")->prog);
    table.emplace_back("litmus-lb.prog", programs::litmus_by_name("LB")->prog);
    table.emplace_back("litmus-lb-data-dep.prog", programs::litmus_by_name("LB+data-dep")->prog);
    table.emplace_back("litmus-corr.prog", programs::litmus_by_name("CoRR")->prog);
    for (auto& [file, prog] : table) {
        INFO(file);
        CHECK(slurp(path(file)) == print_program(prog));
    }
}

TEST_CASE("litmus corpus carries its own verified outcome sets") {
    for (auto& spec : programs::litmus_corpus()) {
        INFO(spec.name);
        REQUIRE_FALSE(spec.expected_weak.empty());
        REQUIRE_FALSE(spec.expected_sc.empty());

        for (bool sc : {false, true}) {
            EngineConfig cfg;
            cfg.model = sc ? Model::ScOracle : Model::Weak;
            programs::OutcomeSet got;
            Program p = spec.prog;
            LocMap lm(p);
            std::vector<int> idx;
            for (auto& g : spec.obs) idx.push_back(p.find_global(g));
            explore(p, cfg, [&](const ExecutionTrace& tr) {
                if (tr.complete) {
                    std::vector<int64_t> row;
                    for (int gi : idx) row.push_back(tr.final_globals[gi].second.v);
                    got.insert(row);
                }
                return VisitResult::Continue;
            });
            CHECK(got == (sc ? spec.expected_sc : spec.expected_weak));
        }
    }
}

TEST_CASE("reference listing lines carry the statements the model tags") {
    // docs/cna-reference.md is the listing that every "cnalock.h:<line>"
    // source tag points at. Parse its numbered code block and require each
    // tagged line to contain that point's statement.
    std::map<int, std::string> listing;
    std::ifstream in(std::string(ORDO_DOCS_DIR) + "/cna-reference.md");
    REQUIRE(in.good());
    std::string line;
    bool in_code = false;
    while (std::getline(in, line)) {
        if (line.rfind("```", 0) == 0) {
            if (in_code) break;  // first fenced block only
            in_code = true;
            continue;
        }
        if (!in_code) continue;
        std::istringstream ls(line);
        int n = 0;
        if (!(ls >> n)) continue;  // blank listing line
        std::string rest;
        std::getline(ls, rest);
        REQUIRE(listing.emplace(n, rest).second);  // no duplicate numbers
    }
    REQUIRE(listing.size() >= 100);
    // numbering is gapless 1..119
    REQUIRE(listing.begin()->first == 1);
    REQUIRE(listing.rbegin()->first == 119);

    auto squash = [](const std::string& s) {
        std::string out;
        for (char c : s)
            if (!std::isspace((unsigned char)c)) out.push_back(c);
        return out;
    };

    Program p = programs::cna(2);
    int checked = 0;
    for (auto& pt : list_barrier_points(p)) {
        INFO("point " << pt.id << " tag " << pt.tag << " snippet \"" << pt.snippet << "\"");
        auto colon = pt.tag.find(':');
        REQUIRE(colon != std::string::npos);
        REQUIRE(pt.tag.substr(0, colon) == "cnalock.h");
        int n = std::stoi(pt.tag.substr(colon + 1));
        REQUIRE(listing.count(n) == 1);
        CHECK(squash(listing[n]).find(squash(pt.snippet)) != std::string::npos);
        checked++;
    }
    CHECK(checked == 40);
}
