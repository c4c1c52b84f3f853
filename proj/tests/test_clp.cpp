#include <catch_amalgamated.hpp>

#include "dalnot/clp.hpp"

using namespace dalnot;
using namespace dalnot::term;

TEST_CASE("id sequences", "[clp]") {
    auto four = id_seq(4);
    REQUIRE(four.size() == 4);
    for (int k = 0; k < 4; ++k) {
        CHECK(to_string(four[static_cast<std::size_t>(k)]) ==
              "V" + std::to_string(k) + "p = V" + std::to_string(k));
    }
    CHECK(id_seq(0).empty());
    CHECK(id_seq(1).size() == 1);

    auto minus0 = id_except(4, 0);
    REQUIRE(minus0.size() == 3);
    CHECK(to_string(minus0[0]) == "V1p = V1");
    CHECK(id_except(1, 0).empty());
    auto five = id_except(5, 2);
    CHECK(five.size() == 4);
    for (const auto& c : five) {
        CHECK(to_string(c) != "V2p = V2");
    }
    CHECK_THROWS_AS(id_except(3, 3), Error);
    CHECK_THROWS_AS(id_except(3, -1), Error);
}

TEST_CASE("integer terms are kept in linear normal form", "[clp]") {
    Term x = ivar("X"), y = ivar("Y");
    CHECK(to_string(add(x, cst(0))) == "X");
    CHECK(to_string(sub(x, x)) == "0");
    CHECK(to_string(add(scale(x, 2), sub(cst(3), y))) == "2*X - Y + 3");
    CHECK(to_string(plus(x, -1)) == "X - 1");
    CHECK(to_string(scale(y, -1)) == "-Y");
    CHECK(term_equal(add(x, y), add(y, x)));
    CHECK_THROWS_AS(add(x, symbol("w")), SortError);
}

TEST_CASE("array terms", "[clp]") {
    Term a = var("A", Sort::Mem), o = var("O", Sort::Obj);
    Term i = ivar("I"), f = ivar("F");
    CHECK(read(a, i)->sort == Sort::Obj);
    // nested reads collapse to the two-index form
    CHECK(term_equal(read(read(a, i), f), read(a, i, f)));
    CHECK(to_string(read(a, i, f)) == "read(A,I,F)");
    CHECK(write(a, i, o)->sort == Sort::Mem);
    CHECK(to_string(write(o, cst(1), functor("i", cst(0)))) == "write(O,1,i(0))");
    CHECK_THROWS_AS(write(a, i, functor("i", i)), SortError);
    CHECK_THROWS_AS(read(i, i), SortError);
    CHECK_THROWS_AS(pair(o, i), SortError);
    CHECK_THROWS_AS(make_constraint(a, Rel::Lt, a), SortError);
}

TEST_CASE("pretty printing", "[clp]") {
    Clause ret{point_atom(2, {reg_in(0), reg_in(1), reg_in(2), reg_in(3), var("M", Sort::MemPair), var("Mp", Sort::MemPair)}),
               {eq(var("Mp", Sort::MemPair), var("M", Sort::MemPair))},
               {}};
    CHECK(pretty(ret) == "p2(V0,V1,V2,V3,M,Mp) :- {Mp = M}.");

    std::vector<Constraint> cs = id_except(5, 2);
    cs.insert(cs.begin(), eq(reg_out(2), cst(2)));
    Clause c13{point_atom(13, {reg_in(0), reg_in(1), reg_in(2), reg_in(3), reg_in(4), var("M", Sort::MemPair), var("Mp", Sort::MemPair)}),
               cs,
               {point_atom(14, {reg_out(0), reg_out(1), reg_out(2), reg_out(3), reg_out(4), var("M", Sort::MemPair),
                                var("Mp", Sort::MemPair)})}};
    CHECK(pretty(c13) ==
          "p13(V0,V1,V2,V3,V4,M,Mp) :- {V2p = 2, V0p = V0, V1p = V1, V3p = V3, V4p = V4}, p14(V0p,V1p,V2p,V3p,V4p,M,Mp).");
}

TEST_CASE("parse infers sorts", "[clp]") {
    Clause c = parse_clause(
        "p5(V0,V1,V2,V3,[A,I],Mp) :- {V1 > 0, O = read(A,V1), read(O,F) = i(X), O1 = write(O,F,i(V0)), "
        "A1 = write(A,V1,O1)}, p6(V0,V1,V2,V3,[A1,I],Mp).");
    auto vars = clause_vars(c);
    CHECK(vars.at("A") == Sort::Mem);
    CHECK(vars.at("A1") == Sort::Mem);
    CHECK(vars.at("O") == Sort::Obj);
    CHECK(vars.at("O1") == Sort::Obj);
    CHECK(vars.at("F") == Sort::Int);
    CHECK(vars.at("X") == Sort::Int);
    CHECK(vars.at("I") == Sort::Int);
    CHECK(vars.at("Mp") == Sort::MemPair);

    // sort only determined through an equality chain, right to left
    Clause d = parse_clause("p0(V0,M,Mp) :- {B = C, C = write(D,1,E), E = read(Z,2), Q = read(Z,V0,V0)}, p1(V0,M,Mp).");
    auto dv = clause_vars(d);
    CHECK(dv.at("B") == Sort::Mem);
    CHECK(dv.at("D") == Sort::Mem);
    CHECK(dv.at("E") == Sort::Obj);
    CHECK(dv.at("Q") == Sort::Elem);
    CHECK(dv.at("Z") == Sort::Mem);

    CHECK_THROWS_AS(parse_clause("p0(X,M,Mp) :- {X = read(A,1)}."), SortError);
    CHECK_THROWS_AS(parse_clause("p0(X,M,Mp) :- {X < }."), ParseError);
    CHECK_THROWS_AS(parse_clause("q0(X,M,Mp) :- {}."), SortError);
}

TEST_CASE("pretty and parse round-trip", "[clp][property]") {
    const char* texts[] = {
        "p13(V0,V1,V2,V3,V4,M,Mp) :- {V2p = 2, V0p = V0}, p14(V0p,V1p,V2p,V3p,V4p,M,Mp).",
        "p2(V0,V1,V2,V3,M,Mp) :- {Mp = M}.",
        "p10(V0,V1,V2,V3,V4,[A,I],Mp) :- {read(O,0) = 'Loops', read(O,1) = i(0), A1 = write(A,I,O), V0p = I, "
        "I1 = I + 1}, p11(V0p,V1,V2,V3,V4,[A1,I1],Mp).",
        "p14(V0,V1,V2,V3,V4,M,Mp) :- {V0 > 0}, lookup(M,V0,'Loops.m/2',0), p0(0,V0,V2,V1,M,M1), p15(V0,V1,V2,V3,V4,M1,Mp).",
        "p0(V0,V1,[A,I],Mp) :- {read(A,V1,F) = i(V0p), 2*X - Y + 3 <= -4, -X != Y, X >= 0}, p1(V0p,V1,[A,I],Mp).",
    };
    for (const char* t : texts) {
        Clause c = parse_clause(t);
        std::string printed = pretty(c);
        Clause back = parse_clause(printed);
        CHECK(pretty(back) == printed);
        CHECK(isomorphic(c, back));
        // identical modulo nothing: the renaming found is the identity
        auto r = clause_isomorphism(c, back);
        REQUIRE(r);
        for (const auto& [a, b] : r->forward) {
            CHECK(a == b);
        }
    }
    auto many = parse_clauses("% comment\np2(V0,M,Mp) :- {Mp = M}.\np3(V0,M,Mp) :- {}, p2(V0,M,Mp).\n");
    CHECK(many.size() == 2);
}

TEST_CASE("clause isomorphism", "[clp]") {
    Clause c = parse_clause("p0(V0,V1,[A,I],Mp) :- {V1 > 0, read(A,V1,F) = i(V0p), V1p = V1}, p1(V0p,V1p,[A,I],Mp).");

    SECTION("renaming and reordering") {
        Clause d = parse_clause("p0(B0,B1,[H,J],Out) :- {B1p = B1, i(Z) = read(H,B1,G), 0 < B1}, p1(Z,B1p,[H,J],Out).");
        auto r = clause_isomorphism(c, d);
        REQUIRE(r);
        CHECK(r->forward.at("V0p") == "Z");
        CHECK(r->forward.at("F") == "G");
    }
    SECTION("not injective") {
        Clause d = parse_clause("p0(B0,B0,[H,J],Out) :- {B0 > 0, read(H,B0,G) = i(Z), B0 = B0}, p1(Z,B0,[H,J],Out).");
        CHECK_FALSE(isomorphic(c, d));
    }
    SECTION("extra constraint") {
        Clause d = parse_clause(
            "p0(V0,V1,[A,I],Mp) :- {V1 > 0, V0 > 0, read(A,V1,F) = i(V0p), V1p = V1}, p1(V0p,V1p,[A,I],Mp).");
        CHECK_FALSE(isomorphic(c, d));
        CHECK(clause_isomorphism(c, d, true).has_value());
    }
    SECTION("different constant or functor") {
        CHECK_FALSE(isomorphic(c, parse_clause("p0(V0,V1,[A,I],Mp) :- {V1 > 1, read(A,V1,F) = i(V0p), V1p = V1}, "
                                               "p1(V0p,V1p,[A,I],Mp).")));
        CHECK_FALSE(isomorphic(c, parse_clause("p0(V0,V1,[A,I],Mp) :- {V1 > 0, read(A,V1,F) = j(V0p), V1p = V1}, "
                                               "p1(V0p,V1p,[A,I],Mp).")));
    }
    SECTION("duplicates do not count") {
        Clause d = parse_clause(
            "p0(V0,V1,[A,I],Mp) :- {V1 > 0, V1 > 0, read(A,V1,F) = i(V0p), V1p = V1}, p1(V0p,V1p,[A,I],Mp).");
        CHECK(isomorphic(c, d));
    }
    SECTION("linear terms match up to variable order") {
        Clause a = parse_clause("p0(X,Y,M,Mp) :- {Z = X - Y + 1}, p0(Z,Y,M,Mp).");
        Clause b = parse_clause("p0(Q,P,M,Mp) :- {R = -P + Q + 1}, p0(R,P,M,Mp).");
        CHECK(isomorphic(a, b));
        Clause wrong = parse_clause("p0(Q,P,M,Mp) :- {R = P - Q + 1}, p0(R,P,M,Mp).");
        CHECK_FALSE(isomorphic(a, wrong));
    }
}

TEST_CASE("substitution", "[clp]") {
    Clause c = parse_clause("p0(V0,M,Mp) :- {X = V0 + 1, Y = 2*X}, p1(Y,M,Mp).");
    Clause s = substitute(c, Subst{{"X", add(ivar("V0"), cst(1))}, {"M", pair(var("A", Sort::Mem), ivar("I"))}});
    CHECK(pretty(s) == "p0(V0,[A,I],Mp) :- {V0 + 1 = V0 + 1, Y = 2*V0 + 2}, p1(Y,[A,I],Mp).");
    Clause r = rename_apart(c, "_1");
    CHECK(pretty(r) == "p0(V0_1,M_1,Mp_1) :- {X_1 = V0_1 + 1, Y_1 = 2*X_1}, p1(Y_1,M_1,Mp_1).");
    CHECK(isomorphic(c, r));
}
