#pragma once

// Verdict layer over the exploration engine.
//
// check() validates the program, explores every execution, and reports:
//   Pass               every complete execution satisfies the final assertion
//                      and no execution blocks at an await;
//   AssertionViolation some complete execution ends with the asserted global
//                      holding the wrong value (witness attached);
//   LivenessViolation  some execution blocks with threads stuck at awaits that
//                      nothing can ever satisfy (witness attached);
//   Timeout            exploration was cut short (deadline, state budget or a
//                      truncated path): no violation found, but Pass cannot be
//                      claimed;
//   InvalidProgram     static validation failed, or a non-speculative access
//                      dereferenced a non-reference base during exploration.
//
// Safety comes first: when both violation kinds exist, the assertion violation
// wins, and exploration stops at the first assertion witness. The witness is
// the first trace (in the engine's deterministic order) that exhibits the
// winning violation.

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ordo/engine.hpp"
#include "ordo/ir.hpp"

namespace ordo {

enum class Verdict : uint8_t {
    Pass,
    AssertionViolation,
    LivenessViolation,
    Timeout,
    InvalidProgram,
};

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::AssertionViolation: return "assertion-violation";
    case Verdict::LivenessViolation: return "liveness-violation";
    case Verdict::Timeout: return "timeout";
    case Verdict::InvalidProgram: return "invalid-program";
    }
    return "?";
}

// Process exit code contract shared with the command-line tool.
inline int exit_code(Verdict v) {
    switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::AssertionViolation: return 1;
    case Verdict::LivenessViolation: return 2;
    case Verdict::Timeout: return 3;
    case Verdict::InvalidProgram: return 4;
    }
    return 4;
}

struct CheckerConfig {
    EngineConfig engine;
};

struct CheckResult {
    Verdict verdict = Verdict::InvalidProgram;
    std::optional<ExecutionTrace> witness;
    std::vector<Diagnostic> diagnostics;
    ExplorationSummary summary;
    std::string message;
};

inline CheckResult check(const Program& p, const CheckerConfig& cfg = {}) {
    CheckResult res;
    res.diagnostics = validate(p);
    if (!res.diagnostics.empty()) {
        res.verdict = Verdict::InvalidProgram;
        std::ostringstream os;
        os << res.diagnostics.size() << " validation diagnostic(s); first: "
           << res.diagnostics.front().message;
        res.message = os.str();
        return res;
    }

    std::optional<ExecutionTrace> assert_witness;
    std::optional<ExecutionTrace> blocked_witness;
    int assert_loc = -1;
    Value expected;
    if (p.final_assert) {
        assert_loc = p.find_global(p.final_assert->global);
        expected = Value::integer(p.final_assert->expected);
    }

    res.summary = explore(p, cfg.engine, [&](const ExecutionTrace& tr) {
        if (tr.complete) {
            if (assert_loc >= 0 && !(tr.final_globals[assert_loc].second == expected)) {
                assert_witness = tr;
                return VisitResult::Stop;  // top precedence: stop at first witness
            }
        } else if (!blocked_witness) {
            blocked_witness = tr;  // keep exploring: an assertion witness outranks it
        }
        return VisitResult::Continue;
    });

    if (assert_witness) {
        res.verdict = Verdict::AssertionViolation;
        res.witness = std::move(assert_witness);
        std::ostringstream os;
        os << "final assertion failed: " << p.final_assert->global << " == "
           << p.final_assert->expected << " does not hold";
        res.message = os.str();
        return res;
    }
    if (blocked_witness) {
        res.verdict = Verdict::LivenessViolation;
        res.witness = std::move(blocked_witness);
        res.message = "an execution blocks forever at the awaits listed in the witness";
        return res;
    }
    if (res.summary.runtime_errors > 0) {
        res.verdict = Verdict::InvalidProgram;
        res.message = "runtime access error: " + res.summary.first_runtime_error;
        return res;
    }
    if (res.summary.hit_timeout || res.summary.state_limit_hit || res.summary.truncated_paths > 0 ||
        res.summary.stopped_early) {
        res.verdict = Verdict::Timeout;
        std::ostringstream os;
        os << "exploration incomplete (";
        if (res.summary.hit_timeout) os << "deadline exceeded";
        else if (res.summary.state_limit_hit) os << "state budget exceeded";
        else os << res.summary.truncated_paths << " truncated path(s)";
        os << "): no violation found, pass not established";
        res.message = os.str();
        return res;
    }
    res.verdict = Verdict::Pass;
    std::ostringstream os;
    os << res.summary.executions_visited << " execution(s), "
       << res.summary.states << " state(s): assertion holds and every await terminates";
    res.message = os.str();
    return res;
}

// Renders the verdict with the witness trace, marking events that were
// overtaken by a later-fetched instruction of the same thread (commit order vs
// program order).
inline std::string explain(const Program& p, const CheckResult& r) {
    std::ostringstream os;
    os << "verdict: " << to_string(r.verdict) << "\n";
    if (!r.message.empty()) os << r.message << "\n";
    for (auto& d : r.diagnostics)
        os << "  [" << d.rule << "] thread " << d.thread << " instr " << d.ordinal << ": "
           << d.message << "\n";
    if (!r.witness) return os.str();

    const ExecutionTrace& tr = *r.witness;
    os << "witness (" << (tr.complete ? "complete" : "blocked") << ", "
       << tr.commit_order.size() << " events):\n";
    os << dump_trace(p, tr);
    if (tr.poisoned)
        os << "note: a speculative read went through a non-reference base on this path\n";

    // per-thread reordering report
    int nthreads = 0;
    for (auto& e : tr.commit_order) nthreads = std::max(nthreads, e.tid + 1);
    bool any = false;
    std::ostringstream ro;
    for (int t = 0; t < nthreads; t++) {
        int max_po = -1;
        for (auto& e : tr.commit_order) {
            if (e.tid != t) continue;
            if (e.po < max_po) {
                ro << "  T" << t << ": event #" << e.seq
                   << " committed after a later program-order access (reordered)\n";
                any = true;
            }
            max_po = std::max(max_po, e.po);
        }
    }
    if (any) os << "reordering relative to program order:\n" << ro.str();
    os << "final state:";
    for (auto& [n, v] : tr.final_globals) {
        os << " " << n << "=";
        if (v.is_ref())
            os << "&" << p.objects[v.v].name;
        else
            os << v.v;
    }
    os << "\n";
    return os.str();
}

}  // namespace ordo
