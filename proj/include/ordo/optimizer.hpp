#pragma once

// Linear relaxation with adaptive re-check budgets.
//
// Starting from the all-SC baseline (fixed points keep their declared modes),
// points are visited in listing order; each tries candidate modes weakest
// first and keeps the weakest that passes the checker. A Timeout at the
// current budget grows the budget by the configured multiplier and retries,
// up to the max re-check budget, after which the candidate is rejected. The
// budget only ever grows, so later points inherit the schedule. The sweep
// ends with a full re-check of the adopted assignment and a certification
// pass probing every one-step relaxation.

#include <chrono>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ordo/checker.hpp"
#include "ordo/ir.hpp"

namespace ordo {

struct OptimizerConfig {
    std::chrono::milliseconds tau{2000};          // initial re-check budget
    double growth = 2.0;                          // budget multiplier (> 1)
    std::chrono::milliseconds max_recheck{120000};  // budget ceiling
    int threads = 0;     // carried for tooling; the sweep itself is agnostic
    EngineConfig engine; // base exploration knobs; timeout is set per check
};

struct ProbeRecord {
    int point_id = 0;
    Mode mode = Mode::Rlx;   // the probed (relaxed) mode
    Verdict verdict = Verdict::Pass;
};

struct CertificationResult {
    bool maximal = false;     // no probe passed
    int inconclusive = 0;     // probes that timed out (not shown safe)
    std::vector<ProbeRecord> probes;
};

struct DiffEntry {
    int point_id = 0;
    std::string tag;
    std::string snippet;
    OpKind kind = OpKind::Load;
    Mode mode = Mode::Rlx;     // suggested mode (below the SC baseline)
    std::string primitive;     // rendered primitive name
};

struct OptStats {
    int checks = 0;
    int passes = 0;
    int violations = 0;
    int timeouts = 0;  // budget exhaustions (after growth)
    std::chrono::milliseconds spent{0};
};

struct OptReport {
    int total = 0;
    int n_sc = 0, n_acq = 0, n_rel = 0, n_rlx = 0;
    std::vector<DiffEntry> diff;
    OptStats stats;
};

struct OptimizeResult {
    bool refused = false;  // baseline did not pass
    Verdict baseline_verdict = Verdict::Pass;
    bool internal_inconsistency = false;  // final assignment failed its re-check
    std::string error;
    Assignment assignment;
    OptReport report;
    CertificationResult cert;
};

namespace opt_detail {

// Locations that ever receive a reference-valued constant store are treated
// as pointer-typed for primitive naming (reporting only).
inline std::set<std::string> pointer_targets(const Program& p) {
    std::set<std::string> out;
    for (auto& t : p.threads)
        for (auto& in : t.code) {
            const Operand* written = nullptr;
            if (in.op == Op::Store || in.op == Op::Swap) written = &in.a;
            if (in.op == Op::Cas) written = &in.b;
            if (!written || written->is_reg() || !written->cval.is_ref()) continue;
            if (in.addr.kind == AddrExpr::Kind::Global)
                out.insert("g:" + in.addr.sym);
            else
                out.insert("f:" + in.addr.field);
        }
    return out;
}

inline std::string target_key(const Program& p, int bp) {
    for (auto& t : p.threads)
        for (auto& in : t.code)
            if (in.bp == bp && in.is_shared_access()) {
                if (in.op == Op::Fence) return "";
                if (in.addr.kind == AddrExpr::Kind::Global) return "g:" + in.addr.sym;
                return "f:" + in.addr.field;
            }
    return "";
}

inline std::string primitive_name(OpKind kind, Mode mode, bool ptr) {
    if (kind == OpKind::Fence) return std::string("fence_") + to_string(mode);
    const char* verb = "read";
    switch (kind) {
    case OpKind::Load: verb = "read"; break;
    case OpKind::Store: verb = "write"; break;
    case OpKind::Rmw: verb = "rmw"; break;
    case OpKind::Await: verb = "await"; break;
    default: break;
    }
    return std::string(ptr ? "atomicptr_" : "atomic_") + verb + "_" + to_string(mode);
}

inline CheckResult check_with_budget(const Program& p, const Assignment& a,
                                     const OptimizerConfig& cfg,
                                     std::chrono::milliseconds budget) {
    Program q = p;
    auto err = apply_assignment(q, a);
    if (err) {
        CheckResult r;
        r.verdict = Verdict::InvalidProgram;
        r.message = err->message;
        return r;
    }
    CheckerConfig cc;
    cc.engine = cfg.engine;
    cc.engine.timeout = budget;
    return check(q, cc);
}

}  // namespace opt_detail

// Probes every one-step relaxation of `a`. A probe that passes disproves
// maximality; a probe that times out is recorded as inconclusive (relaxation
// not shown safe) without disproving it.
inline CertificationResult certify_maximal(const Program& p, const Assignment& a,
                                           const OptimizerConfig& cfg) {
    CertificationResult cert;
    cert.maximal = true;
    auto points = list_barrier_points(p);
    for (auto& pt : points) {
        if (pt.fixed) continue;
        for (Mode down : modes_one_step_down(pt.kind, a[pt.id - 1])) {
            Assignment probe = a;
            probe[pt.id - 1] = down;
            auto r = opt_detail::check_with_budget(p, probe, cfg, cfg.max_recheck);
            cert.probes.push_back({pt.id, down, r.verdict});
            if (r.verdict == Verdict::Pass) cert.maximal = false;
            if (r.verdict == Verdict::Timeout) cert.inconclusive++;
        }
    }
    return cert;
}

inline OptimizeResult optimize(const Program& p, const OptimizerConfig& cfg = {}) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    OptimizeResult res;
    auto points = list_barrier_points(p);

    // all-SC baseline; fixed points keep their declared modes
    Assignment a;
    for (auto& pt : points) a.push_back(pt.fixed ? pt.mode : Mode::Sc);

    auto account = [&](const CheckResult& r) {
        res.report.stats.checks++;
        if (r.verdict == Verdict::Pass) res.report.stats.passes++;
        else if (r.verdict == Verdict::Timeout) res.report.stats.timeouts++;
        else res.report.stats.violations++;
        return r.verdict;
    };

    auto baseline = opt_detail::check_with_budget(p, a, cfg, cfg.max_recheck);
    account(baseline);
    if (baseline.verdict != Verdict::Pass) {
        res.refused = true;
        res.baseline_verdict = baseline.verdict;
        res.error = "baseline (all-SC) check did not pass: " +
                    std::string(to_string(baseline.verdict));
        res.assignment = a;
        res.report.stats.spent =
            std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0);
        return res;
    }

    std::chrono::milliseconds tau = cfg.tau;
    if (tau.count() <= 0) tau = std::chrono::milliseconds(1);
    auto grow = [&] {
        auto next = std::chrono::milliseconds(
            (int64_t)((double)tau.count() * (cfg.growth > 1.0 ? cfg.growth : 2.0)));
        tau = next > cfg.max_recheck ? cfg.max_recheck : next;
    };

    for (auto& pt : points) {
        if (pt.fixed) continue;
        for (Mode cand : modes_weakest_first(pt.kind)) {
            if (cand == Mode::Sc) break;  // reached the baseline value: covered
                                          // by the previous passing check
            Assignment trial = a;
            trial[pt.id - 1] = cand;
            bool rejected = false, adopted = false;
            while (true) {
                auto r = opt_detail::check_with_budget(p, trial, cfg, tau);
                auto v = account(r);
                if (v == Verdict::Pass) {
                    adopted = true;
                    break;
                }
                if (v == Verdict::Timeout) {
                    if (tau >= cfg.max_recheck) {
                        rejected = true;  // budget exhausted: not shown safe
                        break;
                    }
                    grow();
                    continue;  // retry the same candidate at the larger budget
                }
                rejected = true;  // explicit violation (or invalid)
                break;
            }
            if (adopted) {
                a = trial;
                break;
            }
            (void)rejected;
        }
    }

    // the adopted assignment must itself pass; anything else is a bug we
    // surface loudly rather than return a bad suggestion
    auto final_check = opt_detail::check_with_budget(p, a, cfg, cfg.max_recheck);
    account(final_check);
    if (final_check.verdict != Verdict::Pass) {
        res.internal_inconsistency = true;
        res.error = "internal inconsistency: swept assignment re-check returned " +
                    std::string(to_string(final_check.verdict));
        res.assignment = a;
        res.report.stats.spent =
            std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0);
        return res;
    }

    res.assignment = a;
    res.cert = certify_maximal(p, a, cfg);
    res.report.stats.checks += (int)res.cert.probes.size();
    for (auto& pr : res.cert.probes) {
        if (pr.verdict == Verdict::Pass) res.report.stats.passes++;
        else if (pr.verdict == Verdict::Timeout) res.report.stats.timeouts++;
        else res.report.stats.violations++;
    }

    // report
    res.report.total = (int)points.size();
    auto ptrs = opt_detail::pointer_targets(p);
    for (auto& pt : points) {
        Mode m = a[pt.id - 1];
        switch (m) {
        case Mode::Sc: res.report.n_sc++; break;
        case Mode::Acq: res.report.n_acq++; break;
        case Mode::Rel: res.report.n_rel++; break;
        case Mode::Rlx: res.report.n_rlx++; break;
        }
        if (pt.fixed || m == Mode::Sc) continue;  // diff lists relaxations below the baseline
        DiffEntry d;
        d.point_id = pt.id;
        d.tag = pt.tag;
        d.snippet = pt.snippet;
        d.kind = pt.kind;
        d.mode = m;
        bool ptr = ptrs.count(opt_detail::target_key(p, pt.id - 1)) > 0;
        d.primitive = opt_detail::primitive_name(pt.kind, m, ptr);
        res.report.diff.push_back(d);
    }
    res.report.stats.spent =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0);
    return res;
}

// Byte-stable rendering: summary block, then one diff entry per relaxed point.
inline std::string render_report(const OptReport& r) {
    std::ostringstream os;
    os << "== SUMMARY ===\n";
    os << "Barriers: " << r.total << "\n";
    os << "Seq Cst: " << r.n_sc << "\n";
    os << "Acquire: " << r.n_acq << "\n";
    os << "Release: " << r.n_rel << "\n";
    os << "Relaxed: " << r.n_rlx << "\n";
    os << "\n== DIFF ===\n";
    for (auto& d : r.diff) {
        os << "[" << d.point_id << "] " << d.tag << ":\n";
        os << "  " << (d.snippet.empty() ? "(no source snippet)" : d.snippet) << "\n";
        os << "  ^~~~~~~~~~ " << d.primitive << "\n\n";
    }
    return os.str();
}

}  // namespace ordo
