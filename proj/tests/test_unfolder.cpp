#include <catch_amalgamated.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "dalnot/unfolder.hpp"
#include "reference.hpp"
#include "traces.hpp"

using namespace dalnot;

namespace {

Program fixture(const std::string& name) {
    std::ifstream in(std::string(DALNOT_FIXTURES) + "/" + name);
    std::ostringstream s;
    s << in.rdbuf();
    return parse_program(s.str());
}

std::vector<Clause> with_head(const BinaryUnfolding& u, Point from, std::optional<Point> to) {
    std::vector<Clause> out;
    for (const auto& c : u.clauses) {
        auto call = detail::unfold::call_of(c);
        if (c.head.point == from && (to ? call && call->point == *to : !call)) {
            out.push_back(c);
        }
    }
    return out;
}

std::set<std::string> keys(const BinaryUnfolding& u) {
    std::set<std::string> out;
    for (const auto& c : u.clauses) {
        out.insert(pretty(c));
    }
    return out;
}

} // namespace

TEST_CASE("the aliasing cycle and the entry clause appear", "[unfolder]") {
    Program p = fixture("loops.dalsub");
    auto clauses = compile_program(p);
    UnfoldOptions o;
    o.max_depth = 10;
    auto u = binary_unfold(p, clauses, o);
    CHECK(u.complete);
    SolverOptions so;
    so.layouts = layouts_of(p);

    auto entry = with_head(u, 10, 0);
    REQUIRE(entry.size() == 1);
    CHECK(isomorphic(entry[0], parse_clause(reference::kRPrime)));

    auto cycles = with_head(u, 0, 0);
    REQUIRE_FALSE(cycles.empty());
    Clause r = parse_clause(reference::kR);
    int matches = 0;
    for (const auto& c : cycles) {
        std::string why;
        matches += reference::entails_reference(r, c, so, &why);
        INFO(why);
    }
    CHECK(matches == 1);

    // a perturbed reference is rejected
    Clause wrong = parse_clause(std::string(reference::kR).replace(std::string(reference::kR).find("X < V2"), 6, "X > V2"));
    for (const auto& c : cycles) {
        CHECK_FALSE(reference::entails_reference(wrong, c, so));
    }
}

TEST_CASE("clauses first appear at the length of their path", "[unfolder]") {
    Program p = fixture("loops.dalsub");
    UnfoldOptions o;
    o.max_depth = 9;
    auto u = binary_unfold(p, compile_program(p), o);
    for (std::size_t k = 0; k < u.clauses.size(); ++k) {
        auto call = detail::unfold::call_of(u.clauses[k]);
        if (u.clauses[k].head.point == 10 && call && call->point == 0) {
            CHECK(u.rounds[k] == 5);
        }
        if (u.clauses[k].head.point == 0 && call && call->point == 0) {
            CHECK(u.rounds[k] == 9);
        }
    }
    o.max_depth = 8;
    CHECK(with_head(binary_unfold(p, compile_program(p), o), 0, 0).empty());
}

TEST_CASE("a single fact unfolds to itself", "[unfolder]") {
    Program p = parse_program("class C { method f(0) registers 1 { 0: return } }");
    auto clauses = compile_program(p);
    // the implicit constructor contributes a second fact
    auto u = binary_unfold(p, {clauses[0]});
    REQUIRE(u.clauses.size() == 1);
    CHECK(isomorphic(u.clauses[0], clauses[0]));
    CHECK_THROWS_AS(binary_unfold(p, clauses, UnfoldOptions{0, {}, 10}), Error);
}

TEST_CASE("unfoldings are satisfiable and grow with depth", "[unfolder][property]") {
    for (const char* f : {"loops.dalsub", "loops_noalias.dalsub", "dispatch.dalsub"}) {
        Program p = fixture(f);
        auto clauses = compile_program(p);
        SolverOptions so;
        so.layouts = layouts_of(p);
        std::set<std::string> previous;
        for (int d = 1; d <= 7; ++d) {
            UnfoldOptions o;
            o.max_depth = d;
            auto u = binary_unfold(p, clauses, o);
            auto now = keys(u);
            for (const auto& k : previous) {
                INFO(f << " depth " << d << ": " << k);
                CHECK(now.count(k));
            }
            previous = now;
            if (d == 7) {
                for (const auto& c : u.clauses) {
                    CHECK(satisfiable(c.constraints, so).verdict == Verdict::Sat);
                    CHECK(c.calls().size() <= 1);
                }
            }
        }
    }
}

TEST_CASE("lookups resolve from the class slot", "[unfolder]") {
    Program p = fixture("dispatch.dalsub");
    SolverOptions so;
    so.layouts = layouts_of(p);
    MethodRef step{"Base", Signature{"step", 1, true}};
    auto cs = parse_constraints("{read(A,L,0) = 'Counter'}", {{"A", Sort::Mem}, {"L", Sort::Int}});
    Term mem = term::pair(term::var("A", Sort::Mem), term::ivar("I"));
    CHECK(resolve_lookup(cs, lookup_atom(mem, term::ivar("L"), step, 4), p, so) == LookupOutcome::Succeeds);
    CHECK(resolve_lookup(cs, lookup_atom(mem, term::ivar("L"), step, 0), p, so) == LookupOutcome::Fails);
    auto plain = parse_constraints("{read(A,L,0) = 'Plain'}", {{"A", Sort::Mem}, {"L", Sort::Int}});
    CHECK(resolve_lookup(plain, lookup_atom(mem, term::ivar("L"), step, 0), p, so) == LookupOutcome::Succeeds);
    CHECK(resolve_lookup({}, lookup_atom(mem, term::ivar("L"), step, 0), p, so) == LookupOutcome::Undetermined);
    CHECK(resolve_lookup(cs, lookup_atom(term::var("M", Sort::MemPair), term::ivar("L"), step, 4), p, so) ==
          LookupOutcome::Undetermined);
}

TEST_CASE("derivations of the running example", "[unfolder]") {
    Program p = fixture("loops.dalsub");
    auto clauses = compile_program(p);
    auto r = derive(p, clauses, ground_query(p, 10, {0, 0, 0, 0, 0}, {}), 200);
    CHECK(r.status == DeriveStatus::BudgetExhausted);
    REQUIRE(r.trace.size() == 200);
    std::vector<Point> prefix{10, 11, 16, 12, 13, 14, 0, 1, 3, 4, 5, 6, 7, 8, 9, 0};
    CHECK(std::vector<Point>(r.trace.begin(), r.trace.begin() + 16) == prefix);

    // receiver 0 at the call fails the null check
    auto nul = derive(p, clauses, ground_query(p, 14, {0, 0, 2, 0, 0}, {}), 50);
    CHECK(nul.status == DeriveStatus::Failure);
    CHECK(nul.trace.empty());

    Program single = parse_program("class C { method f(0) registers 1 { 0: return } }");
    auto one = derive(single, compile_program(single), ground_query(single, 0, {0}, {}), 10);
    CHECK(one.status == DeriveStatus::Success);
    CHECK(one.trace == std::vector<Point>{0});
    CHECK_THROWS_AS(derive(single, compile_program(single), ground_query(single, 0, {0}, {}), 0), Error);
}

TEST_CASE("derivations visit the points the interpreter visits", "[unfolder][property]") {
    for (const auto& [file, classes] : traces::kFixtures) {
        auto st = traces::check(fixture(file), classes, 2024, 60);
        INFO(file << ": " << st.first_mismatch);
        CHECK(st.mismatches == 0);
        CHECK(st.checked >= 50);
    }
}
