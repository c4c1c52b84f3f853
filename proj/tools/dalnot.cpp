#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "dalnot/dalnot.hpp"

using namespace dalnot;

namespace {

struct Config {
    std::string input;
    std::string output;
    int depth = 12;
    std::size_t budget = 10000;
    std::string entry;
    std::vector<Int> args;
    Point query = 0;
    std::string json;
    bool debug_solver = false;
};

Program load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot read " + path);
    }
    std::ostringstream s;
    s << in.rdbuf();
    return parse_program(s.str());
}

void emit(const Config& cfg, const std::string& text) {
    if (cfg.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(cfg.output);
    if (!out || !(out << text)) {
        throw Error("cannot write " + cfg.output);
    }
}

SolverOptions solver_options(const Config& cfg, const Program& p) {
    SolverOptions o;
    o.layouts = layouts_of(p);
    o.debug = cfg.debug_solver ? &std::cerr : nullptr;
    return o;
}

bool numeric(const std::string& s) {
    return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

std::string format_heap(const Heap& heap) {
    std::ostringstream out;
    for (std::size_t k = 0; k < heap.size(); ++k) {
        out << "  " << k + 1 << ": " << heap[k].cls << " {";
        bool first = true;
        for (const auto& [f, v] : heap[k].fields) {
            out << (first ? "" : ", ") << f << " = " << v;
            first = false;
        }
        out << "}\n";
    }
    return out.str();
}

std::string format_trace(const std::vector<Point>& trace) {
    std::ostringstream out;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        out << (k ? " " : "") << trace[k];
    }
    return out.str();
}

int cmd_compile(const Config& cfg) {
    Program p = load(cfg.input);
    std::vector<std::string> warnings;
    auto clauses = compile_program(p, &warnings);
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    emit(cfg, print_clauses(clauses));
    return 0;
}

int cmd_run(const Config& cfg) {
    Program p = load(cfg.input);
    DvmState start;
    if (numeric(cfg.entry)) {
        Point q = static_cast<Point>(std::stol(cfg.entry));
        const MethodDef* m = p.method_at(q);
        if (!m) {
            throw Error("no program point " + cfg.entry);
        }
        std::vector<Int> regs(static_cast<std::size_t>(m->registers), 0);
        if (cfg.args.size() > regs.size()) {
            throw Error("too many register values");
        }
        std::copy(cfg.args.begin(), cfg.args.end(), regs.end() - static_cast<std::ptrdiff_t>(cfg.args.size()));
        start = state_at(p, q, regs);
    } else {
        if (cfg.entry.empty()) {
            throw Error("run needs --entry");
        }
        start = initial_state(p.find_method(cfg.entry), cfg.args);
    }
    auto r = run(p, std::move(start), cfg.budget);
    std::ostringstream out;
    out << "status: " << to_string(r.status) << "\n";
    out << "steps: " << r.trace.size() << "\n";
    out << "trace: " << format_trace(r.trace) << "\n";
    out << "heap:\n" << format_heap(r.final_state.heap);
    emit(cfg, out.str());
    return 0;
}

int cmd_unfold(const Config& cfg) {
    Program p = load(cfg.input);
    UnfoldOptions o;
    o.max_depth = cfg.depth;
    o.solver = solver_options(cfg, p);
    auto u = binary_unfold(p, compile_program(p), o);
    for (const auto& d : u.diagnostics) {
        std::cerr << "note: " << d << "\n";
    }
    if (!u.complete) {
        std::cerr << "warning: unfolding incomplete\n";
    }
    emit(cfg, print_clauses(u.clauses));
    return 0;
}

int cmd_derive(const Config& cfg) {
    Program p = load(cfg.input);
    const MethodDef* m = p.method_at(cfg.query);
    if (!m) {
        throw Error("no program point " + std::to_string(cfg.query));
    }
    std::vector<Int> regs(static_cast<std::size_t>(m->registers), 0);
    if (cfg.args.size() > regs.size()) {
        throw Error("too many register values");
    }
    std::copy(cfg.args.begin(), cfg.args.end(), regs.end() - static_cast<std::ptrdiff_t>(cfg.args.size()));
    auto r = derive(p, compile_program(p), ground_query(p, cfg.query, regs, {}), static_cast<int>(cfg.budget),
                    solver_options(cfg, p));
    std::ostringstream out;
    out << "status: " << to_string(r.status) << "\n";
    out << "steps: " << r.trace.size() << "\n";
    out << "trace: " << format_trace(r.trace) << "\n";
    if (!r.diagnostic.empty()) {
        out << "note: " << r.diagnostic << "\n";
    }
    emit(cfg, out.str());
    return 0;
}

int cmd_analyze(const Config& cfg) {
    Program p = load(cfg.input);
    AnalyzeOptions o;
    o.depth = cfg.depth;
    o.nonterm.solver = solver_options(cfg, p);
    if (!cfg.entry.empty()) {
        o.entry = numeric(cfg.entry) ? static_cast<Point>(std::stol(cfg.entry)) : p.find_method(cfg.entry).entry;
    }
    auto rep = analyze(p, o);
    emit(cfg, format_report(rep));
    if (!cfg.json.empty()) {
        std::ofstream out(cfg.json);
        if (!out || !(out << to_json(rep).dump(2) << "\n")) {
            throw Error("cannot write " + cfg.json);
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Non-termination prover for a Dalvik subset"};
    app.require_subcommand(1);
    Config cfg;

    auto common = [&](CLI::App* sub) {
        sub->add_option("file", cfg.input, "program in the textual Dalvik subset")->required();
        sub->add_option("-o,--output", cfg.output, "write the result here instead of stdout");
        sub->add_flag("--debug-solver", cfg.debug_solver, "trace solver branching on stderr");
    };
    auto* compile = app.add_subcommand("compile", "print the CLP clauses of a program");
    common(compile);

    auto* runc = app.add_subcommand("run", "execute a method with the reference interpreter");
    common(runc);
    runc->add_option("--entry", cfg.entry, "method name, Class.name, or program point")->required();
    runc->add_option("--args", cfg.args, "arguments, placed in the last registers");
    runc->add_option("--budget", cfg.budget, "step budget")->check(CLI::PositiveNumber);

    auto* unfold = app.add_subcommand("unfold", "print the binary unfoldings");
    common(unfold);
    unfold->add_option("--depth", cfg.depth, "unfolding rounds")->check(CLI::PositiveNumber);

    auto* der = app.add_subcommand("derive", "resolve a ground query against the compiled clauses");
    common(der);
    der->add_option("--query", cfg.query, "program point of the query")->required();
    der->add_option("--args", cfg.args, "register values, placed in the last registers");
    der->add_option("--budget", cfg.budget, "resolution step budget")->check(CLI::PositiveNumber);

    auto* an = app.add_subcommand("analyze", "search for a non-termination witness");
    common(an);
    an->add_option("--entry", cfg.entry, "entry point or method (default: every method entry)");
    an->add_option("--depth", cfg.depth, "unfolding rounds")->check(CLI::PositiveNumber);
    an->add_option("--json", cfg.json, "also write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*compile) {
            return cmd_compile(cfg);
        }
        if (*runc) {
            return cmd_run(cfg);
        }
        if (*unfold) {
            return cmd_unfold(cfg);
        }
        if (*der) {
            return cmd_derive(cfg);
        }
        return cmd_analyze(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
