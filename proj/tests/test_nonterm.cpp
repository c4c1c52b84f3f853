#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "dalnot/nonterm.hpp"
#include "reference.hpp"

using namespace dalnot;

namespace {

Program fixture(const std::string& name) {
    std::ifstream in(std::string(DALNOT_FIXTURES) + "/" + name);
    std::ostringstream s;
    s << in.rdbuf();
    return parse_program(s.str());
}

struct Loop {
    Program program;
    BinaryUnfolding unfolding;
    SolverOptions solver;

    explicit Loop(const std::string& file) : program(fixture(file)) {
        UnfoldOptions o;
        o.max_depth = 10;
        unfolding = binary_unfold(program, compile_program(program), o);
        solver.layouts = layouts_of(program);
    }
    const Clause& find(Point from, Point to) const {
        for (const auto& c : unfolding.clauses) {
            auto call = detail::unfold::call_of(c);
            if (c.head.point == from && call && call->point == to) {
                return c;
            }
        }
        throw Error("no clause");
    }
};

} // namespace

TEST_CASE("the aliasing witness is verified", "[nonterm]") {
    Loop l("loops.dalsub");
    const Clause& r = l.find(0, 0);
    const Clause& rp = l.find(10, 0);
    auto res = check_witness(r, rp, parse_template("V1 = V3"), l.solver);
    INFO(res.reason);
    CHECK(res.verdict == WitnessCheck::Verified);

    // the hand-simplified clauses carry the same witness
    auto printed = check_witness(parse_clause(reference::kR), parse_clause(reference::kRPrime),
                               parse_template("V1 = V3"), l.solver);
    INFO(printed.reason);
    CHECK(printed.verdict == WitnessCheck::Verified);

    for (const char* t : {"V1 < V3", "V3 < V1", "true", "V1 > 0"}) {
        INFO(t);
        CHECK(check_witness(r, rp, parse_template(t), l.solver).verdict != WitnessCheck::Verified);
    }
    // the entry stores 0 and then loops while 0 < 2: a template pinning n = 0 is unreachable
    CHECK(check_witness(r, rp, parse_template("V1 = V3, V2 = 0"), l.solver).verdict == WitnessCheck::Refuted);
}

TEST_CASE("distinct objects leave the loop", "[nonterm]") {
    Loop l("loops.dalsub");
    auto res = check_witness(l.find(0, 0), l.find(10, 0), parse_template("V1 != V3"), l.solver);
    CHECK(res.verdict != WitnessCheck::Verified);

    // one iteration over two objects moves this.i towards n and the run halts
    Heap heap{make_object(l.program, "Loops"), make_object(l.program, "Loops")};
    heap[0].fields["i"] = 0;
    heap[1].fields["i"] = 0;
    auto run1 = run(l.program, state_at(l.program, 0, {0, 1, 2, 2}, heap), 1000);
    CHECK(run1.status == RunStatus::Halted);
    CHECK(run1.final_state.heap[0].fields.at("i") == 2);
    CHECK(run1.final_state.heap[1].fields.at("i") == -2);
}

TEST_CASE("integer loops go through projection", "[nonterm]") {
    Program p = parse_program("class C { method f(0) registers 1 { 0: return } }");
    Clause up = parse_clause("p1(V0,M,Mp) :- {V0 > 0, V0p = V0 + 1}, p1(V0p,M,Mp).");
    Clause down = parse_clause("p1(V0,M,Mp) :- {V0 > 0, V0p = V0 - 1}, p1(V0p,M,Mp).");
    Clause entry = parse_clause("p0(V0,M,Mp) :- {X = 1}, p1(X,M,Mp).");
    Clause far = parse_clause("p0(V0,M,Mp) :- {X = -5}, p1(X,M,Mp).");
    CHECK(check_witness(up, entry, parse_template("V0 > 0")).verdict == WitnessCheck::Verified);
    CHECK(check_witness(up, entry, parse_template("true")).verdict == WitnessCheck::Verified);
    CHECK(check_witness(down, entry, parse_template("true")).verdict == WitnessCheck::Refuted);
    CHECK(check_witness(up, far, parse_template("true")).verdict == WitnessCheck::Refuted);
    CHECK(check_witness(up, entry, parse_template("V0 = 2")).verdict != WitnessCheck::Verified);

    auto found = find_witness(p, {up, entry}, {0});
    REQUIRE(found.witness);
    CHECK(found.witness->tmpl.to_string() == "true");
    CHECK_FALSE(find_witness(p, {down, entry}, {0}).witness);
    CHECK_THROWS_AS(check_witness(entry, up, Template{}), Error);
    CHECK_THROWS_AS(check_witness(up, parse_clause("p0(V0,M,Mp) :- {X = 1}, p2(X,M,Mp)."), Template{}), Error);
}

TEST_CASE("verdicts do not depend on variable names", "[nonterm][property]") {
    Loop l("loops.dalsub");
    const Clause& r = l.find(0, 0);
    const Clause& rp = l.find(10, 0);
    Clause r2 = rename_apart(r, "_x");
    Clause rp2 = rename_apart(rp, "_y");
    for (const auto& t : template_family(r, l.program, 40)) {
        INFO(t.to_string());
        CHECK(check_witness(r, rp, t, l.solver).verdict == check_witness(r2, rp2, t, l.solver).verdict);
    }
}

TEST_CASE("the template family", "[nonterm]") {
    Loop l("loops.dalsub");
    auto family = template_family(l.find(0, 0), l.program, 10);
    REQUIRE_FALSE(family.empty());
    CHECK(family.front().to_string() == "true");
    std::set<std::string> seen;
    bool has_alias = false;
    for (const auto& t : family) {
        CHECK(seen.insert(t.to_string()).second);
        has_alias = has_alias || t.to_string() == "V1 = V3";
        VarSet vs;
        for (const auto& c : t.parts) {
            collect_vars(c, vs);
        }
        for (const auto& [v, sort] : vs) {
            CHECK((v == "V1" || v == "V2" || v == "V3"));
        }
    }
    CHECK(has_alias);
}

TEST_CASE("analysis of the fixtures", "[nonterm]") {
    AnalyzeOptions o;
    o.entry = 10;
    auto loops = analyze(fixture("loops.dalsub"), o);
    CHECK(loops.verdict == "diverges");
    REQUIRE(loops.witness);
    CHECK(loops.witness->tmpl.to_string() == "V1 = V3");
    CHECK(loops.entry_point == Point{10});
    auto j = to_json(loops);
    CHECK(j["verdict"] == "diverges");
    CHECK(j["entry_point"] == 10);
    CHECK(j["witness"]["template"] == "V1 = V3");
    CHECK(j["witness"]["r_prime"].get<std::string>().rfind("p10(", 0) == 0);
    CHECK(j.contains("timings"));
    CHECK(format_report(loops).find("V1 = V3") != std::string::npos);

    auto noalias = analyze(fixture("loops_noalias.dalsub"), o);
    CHECK(noalias.verdict == "unknown");
    CHECK_FALSE(noalias.witness);
    CHECK(to_json(noalias)["witness"].is_null());

    auto straight = analyze(parse_program("class C { method f(0) registers 1 { 0: const/16 v0, 1\n 1: return } }"));
    CHECK(straight.verdict == "unknown");
    CHECK(straight.reason == "no witness in the template family");

    AnalyzeOptions shallow;
    shallow.entry = 10;
    shallow.clause_cap = 5;
    auto capped = analyze(fixture("loops.dalsub"), shallow);
    CHECK(capped.verdict == "unknown");
    CHECK(capped.reason == "resource cap");

    o.entry = 99;
    CHECK_THROWS_AS(analyze(fixture("loops.dalsub"), o), Error);
}

TEST_CASE("divergence claims survive replay", "[nonterm][property]") {
    for (const char* f : {"loops.dalsub", "loops_noalias.dalsub", "dispatch.dalsub", "nullderef.dalsub"}) {
        Program p = fixture(f);
        for (Point e : method_entries(p)) {
            AnalyzeOptions o;
            o.entry = e;
            auto rep = analyze(p, o);
            if (rep.verdict != "diverges") {
                continue;
            }
            INFO(f << " entry " << e);
            // the witness clauses alone keep the derivation going from a state they admit
            const auto& w = *rep.witness;
            std::vector<Int> regs(static_cast<std::size_t>(p.method_at(e)->registers), 0);
            Heap heap;
            if (e == 0) {
                heap.push_back(make_object(p, "Loops"));
                regs = {0, 1, 2, 1};
            } else {
                REQUIRE(e == 10);
            }
            auto d = derive(p, {w.r_prime, w.r}, ground_query(p, e, regs, heap), 1000);
            CHECK(d.status == DeriveStatus::BudgetExhausted);
            auto concrete = run(p, state_at(p, e, regs, heap), 1000);
            CHECK(concrete.status == RunStatus::BudgetExhausted);
        }
    }
}

TEST_CASE("under V1 = V3 the loop body is the identity on the heap", "[nonterm]") {
    Loop l("loops.dalsub");
    Clause r = parse_clause(reference::kR);
    auto cs = r.constraints;
    cs.push_back(parse_constraints("{V1 = V3}")[0]);
    auto sorts = clause_vars(r);
    auto goal = [&](const std::string& text) {
        return entails(cs, parse_constraints("{" + text + "}", sorts)[0], l.solver);
    };
    CHECK(goal("Op = O1") == Tri::True);
    CHECK(goal("Xp = X + 1") == Tri::True);
    CHECK(goal("V0p = X") == Tri::True);
    CHECK(goal("Op1 = O") == Tri::True);
    CHECK(goal("A2 = A") == Tri::True);
    // without the alias the heap changes
    CHECK(entails(r.constraints, parse_constraints("{A2 = A}", sorts)[0], l.solver) == Tri::False);
}
