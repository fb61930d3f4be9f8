// Command-line front end: check, optimize, litmus, stress, dump.
//
// Exit codes: check follows the checker contract (0 pass, 1 assertion
// violation, 2 liveness violation, 3 timeout, 4 invalid program); optimize
// exits 0 when the result is certified maximal, 5 when certification recorded
// an inconclusive probe; litmus exits 1 on any outcome-set mismatch; stress
// exits 1 iff a verified-mode run loses counts; usage errors exit 64.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ordo/checker.hpp"
#include "ordo/nativelock.hpp"
#include "ordo/optimizer.hpp"
#include "ordo/programs.hpp"
#include "ordo/text.hpp"

namespace {

using namespace ordo;

constexpr int kUsageExit = 64;

// Builtin names resolve via the program library; anything else is a file path.
std::optional<Program> load_program(const std::string& name, int threads, std::string& err) {
    try {
        if (name == "cna") return programs::cna(threads);
        if (name == "cna-annotated") return programs::cna_annotated(threads);
        if (name == "cna-buggy") return programs::cna_buggy(threads);
        if (name == "linux-cna") return programs::linux_cna(threads);
        if (auto l = programs::litmus_by_name(name)) return l->prog;
    } catch (const std::exception& e) {
        err = e.what();
        return std::nullopt;
    }
    std::ifstream in(name);
    if (!in) {
        err = "unknown builtin and unreadable file: " + name;
        return std::nullopt;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_program(buf.str());
    } catch (const std::exception& e) {
        err = name + ": " + e.what();
        return std::nullopt;
    }
}

struct EngineFlags {
    int threads = 2;
    std::string model = "weak";
    bool no_speculation = false;
};

void add_engine_flags(CLI::App* cmd, EngineFlags& f) {
    cmd->add_option("--threads", f.threads, "Client thread count for builtin programs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--model", f.model, "Memory model: weak or sc")
        ->check(CLI::IsMember({"weak", "sc"}))
        ->capture_default_str();
    cmd->add_flag("--no-speculation", f.no_speculation,
                  "Disable branch speculation (no fetch past unresolved branches)");
}

void apply_engine_flags(EngineConfig& e, const EngineFlags& f) {
    e.model = f.model == "sc" ? Model::ScOracle : Model::Weak;
    e.speculation = !f.no_speculation;
}

int run_check(const std::string& name, const EngineFlags& flags, double timeout_s) {
    std::string err;
    auto p = load_program(name, flags.threads, err);
    if (!p) {
        std::cerr << "ordo check: " << err << "\n";
        return kUsageExit;
    }
    CheckerConfig cfg;
    apply_engine_flags(cfg.engine, flags);
    cfg.engine.timeout =
        std::chrono::milliseconds((int64_t)(timeout_s * 1000.0));
    auto r = check(*p, cfg);
    std::cout << "verdict: " << to_string(r.verdict) << "\n";
    if (!r.message.empty()) std::cout << r.message << "\n";
    if (r.verdict != Verdict::Pass) std::cerr << explain(*p, r);
    return exit_code(r.verdict);
}

void write_json_report(const std::string& path, const std::string& name,
                       const EngineFlags& flags, const Program& p, const OptimizeResult& res) {
    nlohmann::json doc;
    doc["program"] = name;
    doc["threads"] = flags.threads;
    doc["model"] = flags.model;
    doc["certified-maximal"] = res.cert.maximal && res.cert.inconclusive == 0;
    doc["inconclusive-probes"] = res.cert.inconclusive;
    doc["summary"] = {{"barriers", res.report.total}, {"sc", res.report.n_sc},
                      {"acq", res.report.n_acq},      {"rel", res.report.n_rel},
                      {"rlx", res.report.n_rlx}};
    doc["stats"] = {{"checks", res.report.stats.checks},
                    {"passes", res.report.stats.passes},
                    {"violations", res.report.stats.violations},
                    {"timeouts", res.report.stats.timeouts},
                    {"ms", res.report.stats.spent.count()}};
    doc["assignment"] = nlohmann::json::array();
    for (auto& pt : p.points) {
        doc["assignment"].push_back({{"id", pt.id},
                                     {"source-tag", pt.tag},
                                     {"op-kind", to_string(pt.kind)},
                                     {"mode", to_string(res.assignment[pt.id - 1])}});
    }
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
}

int run_optimize(const std::string& name, const EngineFlags& flags, double tau_s, double growth,
                 double max_timeout_s, const std::string& json_path) {
    std::string err;
    auto p = load_program(name, flags.threads, err);
    if (!p) {
        std::cerr << "ordo optimize: " << err << "\n";
        return kUsageExit;
    }
    OptimizerConfig cfg;
    apply_engine_flags(cfg.engine, flags);
    cfg.threads = flags.threads;
    cfg.tau = std::chrono::milliseconds((int64_t)(tau_s * 1000.0));
    cfg.growth = growth;
    cfg.max_recheck = std::chrono::milliseconds((int64_t)(max_timeout_s * 1000.0));
    auto res = optimize(*p, cfg);
    if (res.refused) {
        std::cerr << "ordo optimize: " << res.error << "\n";
        return exit_code(res.baseline_verdict);
    }
    if (res.internal_inconsistency || !res.error.empty()) {
        std::cerr << "ordo optimize: " << res.error << "\n";
        return 70;
    }
    std::cout << render_report(res.report);
    if (res.cert.maximal && res.cert.inconclusive == 0) {
        std::cout << "certified: maximal\n";
    } else if (res.cert.inconclusive > 0) {
        std::cout << "certified: inconclusive (" << res.cert.inconclusive
                  << " probe(s) not decided within budget)\n";
    } else {
        std::cout << "certified: not maximal\n";
    }
    if (!json_path.empty()) write_json_report(json_path, name, flags, *p, res);
    if (res.cert.inconclusive > 0) return 5;
    return res.cert.maximal ? 0 : 5;
}

// Outcome rows a litmus program can end in, for one model.
programs::OutcomeSet collect_outcomes(const programs::LitmusSpec& spec, Model model) {
    EngineConfig cfg;
    cfg.model = model;
    Program p = spec.prog;
    std::vector<int> idx;
    for (auto& g : spec.obs) idx.push_back(p.find_global(g));
    programs::OutcomeSet got;
    explore(p, cfg, [&](const ExecutionTrace& tr) {
        if (tr.complete) {
            std::vector<int64_t> row;
            for (int gi : idx) row.push_back(tr.final_globals[gi].second.v);
            got.insert(row);
        }
        return VisitResult::Continue;
    });
    return got;
}

std::string render_outcomes(const programs::OutcomeSet& s) {
    std::ostringstream os;
    bool first_row = true;
    for (auto& row : s) {
        if (!first_row) os << " ";
        first_row = false;
        os << "(";
        for (size_t i = 0; i < row.size(); i++) os << (i ? "," : "") << row[i];
        os << ")";
    }
    return os.str();
}

int run_litmus(const std::string& which) {
    std::vector<programs::LitmusSpec> specs;
    if (which == "all") {
        specs = programs::litmus_corpus();
    } else if (auto l = programs::litmus_by_name(which)) {
        specs.push_back(*l);
    } else {
        std::cerr << "ordo litmus: unknown test: " << which << "\n";
        return kUsageExit;
    }
    int bad = 0;
    for (auto& spec : specs) {
        auto weak = collect_outcomes(spec, Model::Weak);
        auto sc = collect_outcomes(spec, Model::ScOracle);
        bool ok = weak == spec.expected_weak && sc == spec.expected_sc;
        std::cout << spec.name << ": " << (ok ? "ok" : "MISMATCH") << " weak={"
                  << render_outcomes(weak) << "} sc={" << render_outcomes(sc) << "}\n";
        if (weak != spec.expected_weak)
            std::cout << "  expected weak={" << render_outcomes(spec.expected_weak) << "}\n";
        if (sc != spec.expected_sc)
            std::cout << "  expected sc={" << render_outcomes(spec.expected_sc) << "}\n";
        if (!ok) bad++;
    }
    return bad ? 1 : 0;
}

int run_stress(int threads, uint64_t iterations, bool buggy) {
    auto r = native::stress(threads, iterations, buggy);
    std::cout << native::render(r) << "\n";
    return r.ok() ? 0 : 1;
}

int run_dump(const std::string& name, int threads) {
    std::string err;
    auto p = load_program(name, threads, err);
    if (!p) {
        std::cerr << "ordo dump: " << err << "\n";
        return kUsageExit;
    }
    std::cout << print_program(*p);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verification and barrier optimization for spinlock algorithms"};
    app.require_subcommand(1);

    // check
    auto* c_check = app.add_subcommand("check", "Exhaustively check a program");
    std::string check_prog;
    EngineFlags check_flags;
    double check_timeout = 60.0;
    c_check->add_option("program", check_prog, "Builtin name or program file path")->required();
    add_engine_flags(c_check, check_flags);
    c_check->add_option("--timeout", check_timeout, "Exploration budget in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // optimize
    auto* c_opt = app.add_subcommand("optimize", "Find a maximally relaxed barrier assignment");
    std::string opt_prog, opt_json;
    EngineFlags opt_flags;
    double opt_tau = 2.0, opt_growth = 2.0, opt_max = 120.0;
    c_opt->add_option("program", opt_prog, "Builtin name or program file path")->required();
    add_engine_flags(c_opt, opt_flags);
    c_opt->add_option("--tau", opt_tau, "Initial per-candidate check budget in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_opt->add_option("--growth", opt_growth, "Budget growth factor after a timeout")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_opt->add_option("--max-timeout", opt_max, "Budget ceiling in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_opt->add_option("--json", opt_json, "Write a machine-readable report to this path");

    // litmus
    auto* c_lit = app.add_subcommand("litmus", "Run litmus tests against expected outcome sets");
    std::string lit_which = "all";
    c_lit->add_option("name", lit_which, "Litmus test name, or 'all'")->capture_default_str();

    // stress
    auto* c_str = app.add_subcommand("stress", "Run the native lock stress harness");
    int str_threads = 4;
    uint64_t str_iters = 10000;
    bool str_buggy = false;
    c_str->add_option("--threads", str_threads, "OS thread count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_str->add_option("--iterations", str_iters, "Guarded increments per thread")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_str->add_flag("--buggy", str_buggy, "Demote the local hand-off store to relaxed");

    // dump
    auto* c_dump = app.add_subcommand("dump", "Print a program in the text format");
    std::string dump_prog;
    int dump_threads = 2;
    c_dump->add_option("program", dump_prog, "Builtin name or program file path")->required();
    c_dump->add_option("--threads", dump_threads, "Client thread count for builtin programs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageExit;
    }

    if (app.got_subcommand(c_check)) return run_check(check_prog, check_flags, check_timeout);
    if (app.got_subcommand(c_opt))
        return run_optimize(opt_prog, opt_flags, opt_tau, opt_growth, opt_max, opt_json);
    if (app.got_subcommand(c_lit)) return run_litmus(lit_which);
    if (app.got_subcommand(c_str)) return run_stress(str_threads, str_iters, str_buggy);
    if (app.got_subcommand(c_dump)) return run_dump(dump_prog, dump_threads);
    return kUsageExit;
}
