#pragma once

// Recurrent-set witnesses over binary unfoldings.
//
// A witness is a recursive clause r = p(x) <- c, p(y), an entry clause
// r' = p'(x') <- c', p(y') and a template T over the register positions of p.
// The set actually used is G = T /\ exists z. c(x, z), the template cut down
// to the states where r applies. It is recurrent when every state of G has an
// r-successor in G, which we establish in one of two ways:
//   - persistence: every head position that c or T constrains is provably
//     passed unchanged to the body, so the successor satisfies G because its
//     origin did;
//   - projection: c is pure integer arithmetic, G is computed exactly by
//     eliminating the non-head variables, and c /\ G(x) entails G(y).
// Otherwise the check answers unknown.

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalnot/unfolder.hpp"

namespace dalnot {

/// Conjunction of constraints over V<k>, the k-th register position of a head.
struct Template {
    std::vector<Constraint> parts;

    bool operator==(const Template& o) const {
        return to_string() == o.to_string();
    }
    [[nodiscard]] std::string to_string() const {
        if (parts.empty()) {
            return "true";
        }
        std::string out;
        for (const auto& c : parts) {
            out += (out.empty() ? "" : ", ") + dalnot::to_string(c);
        }
        return out;
    }
};

inline Template parse_template(const std::string& text) {
    if (text == "true") {
        return {};
    }
    return Template{parse_constraints("{" + text + "}")};
}

enum class WitnessCheck { Verified, Refuted, Unknown };

inline const char* to_string(WitnessCheck w) {
    switch (w) {
    case WitnessCheck::Verified: return "verified";
    case WitnessCheck::Refuted: return "refuted";
    case WitnessCheck::Unknown: return "unknown";
    }
    return "?";
}

struct CheckResult {
    WitnessCheck verdict;
    std::string reason;
};

struct Witness {
    Clause r;
    Clause r_prime;
    Template tmpl;
    Point entry = 0;
};

struct NontermOptions {
    SolverOptions solver;
    std::size_t conjunction_cap = 200;
};

namespace detail::nonterm {

inline int register_count(const Atom& a) { return static_cast<int>(a.args.size()) - 2; }

inline std::vector<Constraint> instantiate(const Template& t, const Atom& at) {
    Subst s;
    for (int k = 0; k < register_count(at); ++k) {
        s["V" + std::to_string(k)] = at.args[static_cast<std::size_t>(k)];
    }
    std::vector<Constraint> out;
    for (const auto& c : t.parts) {
        out.push_back(substitute(c, s));
    }
    return out;
}

inline std::vector<Constraint> equate(const Term& a, const Term& b) {
    if (a->kind == TermKind::Pair && b->kind == TermKind::Pair) {
        return {eq(a->args[0], b->args[0]), eq(a->args[1], b->args[1])};
    }
    return {eq(a, b)};
}

// Head positions as variable lists, or nullopt unless every position is a
// fresh variable or a pair of fresh variables.
inline std::optional<std::vector<std::vector<std::string>>> head_positions(const Atom& head) {
    std::vector<std::vector<std::string>> out;
    std::set<std::string> seen;
    auto take = [&](const Term& t, std::vector<std::string>& into) {
        if (t->kind != TermKind::Var || !seen.insert(t->name).second) {
            return false;
        }
        into.push_back(t->name);
        return true;
    };
    for (const auto& a : head.args) {
        std::vector<std::string> vs;
        bool ok = a->kind == TermKind::Pair ? take(a->args[0], vs) && take(a->args[1], vs) : take(a, vs);
        if (!ok) {
            return std::nullopt;
        }
        out.push_back(vs);
    }
    return out;
}

inline bool pure_int(const std::vector<Constraint>& cs) {
    return std::all_of(cs.begin(), cs.end(), [](const Constraint& c) { return c.lhs->sort == Sort::Int; });
}

class IntSpace {
  public:
    lia::Con convert(const Constraint& c) {
        lia::Expr l = expr(c.lhs), r = expr(c.rhs);
        switch (c.rel) {
        case Rel::Eq: return {lia::minus(l, r), lia::Kind::Eq};
        case Rel::Ne: return {lia::minus(l, r), lia::Kind::Ne};
        case Rel::Le: return {lia::minus(l, r), lia::Kind::Le};
        case Rel::Lt: return {lia::plus(lia::minus(l, r), lia::const_expr(1)), lia::Kind::Le};
        case Rel::Ge: return {lia::minus(r, l), lia::Kind::Le};
        case Rel::Gt: return {lia::plus(lia::minus(r, l), lia::const_expr(1)), lia::Kind::Le};
        }
        throw Error("bad relation");
    }
    Constraint back(const lia::Con& c) const {
        LinearForm f;
        f.constant = c.expr.constant;
        for (const auto& [v, k] : c.expr.terms) {
            f.coeffs[names_[static_cast<std::size_t>(v)]] = k;
        }
        return make_constraint(term::from_linear(f), c.kind == lia::Kind::Eq ? Rel::Eq : Rel::Le, term::cst(0));
    }
    int id(const std::string& name) {
        auto [it, fresh] = ids_.try_emplace(name, static_cast<int>(names_.size()));
        if (fresh) {
            names_.push_back(name);
        }
        return it->second;
    }

  private:
    lia::Expr expr(const Term& t) {
        LinearForm f = term::to_linear(t);
        lia::Expr e = lia::const_expr(f.constant);
        for (const auto& [v, k] : f.coeffs) {
            e = lia::plus(e, lia::var_expr(id(v), k));
        }
        return e;
    }
    std::map<std::string, int> ids_;
    std::vector<std::string> names_;
};

inline CheckResult unknown(std::string why) { return {WitnessCheck::Unknown, std::move(why)}; }
inline CheckResult refuted(std::string why) { return {WitnessCheck::Refuted, std::move(why)}; }

// G is recurrent for r; assumes c /\ T(x) is satisfiable.
inline CheckResult recurrent(const Clause& r, const Atom& y, const Template& t, const SolverOptions& opts) {
    auto positions = head_positions(r.head);
    if (!positions) {
        return unknown("head is not a tuple of distinct variables");
    }
    std::vector<Constraint> premise = r.constraints;
    auto tx = instantiate(t, r.head);
    premise.insert(premise.end(), tx.begin(), tx.end());
    VarSet used;
    for (const auto& c : premise) {
        collect_vars(c, used);
    }

    std::vector<std::size_t> moving;
    bool any_unknown = false;
    for (std::size_t k = 0; k < positions->size(); ++k) {
        bool relevant = false;
        for (const auto& v : (*positions)[k]) {
            relevant = relevant || used.count(v);
        }
        if (!relevant || term_equal(r.head.args[k], y.args[k])) {
            continue;
        }
        Tri same = entails_all(premise, equate(r.head.args[k], y.args[k]), opts);
        if (same != Tri::True) {
            moving.push_back(k);
            any_unknown = any_unknown || same == Tri::Unknown;
        }
    }
    if (moving.empty()) {
        return {WitnessCheck::Verified, "the constrained state is passed on unchanged"};
    }

    // integer registers that change: fall back to exact projection
    bool ints_only = pure_int(premise) && std::all_of(moving.begin(), moving.end(), [&](std::size_t k) {
                         return r.head.args[k]->sort == Sort::Int;
                     });
    if (!ints_only) {
        return unknown(any_unknown ? "solver could not decide persistence" : "non-persistent heap state");
    }
    IntSpace space;
    std::set<int> keep;
    Subst to_body;
    for (std::size_t k = 0; k < positions->size(); ++k) {
        const Term& h = r.head.args[k];
        const Term& b = y.args[k];
        if (h->kind == TermKind::Pair) {
            if (b->kind != TermKind::Pair) {
                return unknown("memory argument is not a pair");
            }
            to_body[h->args[0]->name] = b->args[0];
            to_body[h->args[1]->name] = b->args[1];
        } else {
            to_body[h->name] = b;
        }
        for (const auto& v : (*positions)[k]) {
            if (used.count(v)) {
                keep.insert(space.id(v));
            }
        }
    }
    std::vector<lia::Con> cons;
    try {
        for (const auto& c : premise) {
            cons.push_back(space.convert(c));
        }
    } catch (const SortError&) {
        return unknown("non-integer head state");
    }
    auto projected = lia::project(cons, keep);
    if (!projected) {
        return unknown("projection is not exact");
    }
    std::vector<Constraint> gx, gy;
    for (const auto& c : *projected) {
        gx.push_back(space.back(c));
        gy.push_back(substitute(gx.back(), to_body));
    }
    std::vector<Constraint> step = r.constraints;
    step.insert(step.end(), gx.begin(), gx.end());
    switch (entails_all(step, gy, opts)) {
    case Tri::True: return {WitnessCheck::Verified, "the projected guard is invariant"};
    case Tri::False: return refuted("the projected guard is not invariant");
    case Tri::Unknown: break;
    }
    return unknown("solver could not decide invariance");
}

inline std::vector<Int> program_constants(const Program& p) {
    std::set<Int> out;
    for (Point q : p.points()) {
        if (const auto* c = std::get_if<ins::Const>(&p.instruction_at(q))) {
            out.insert(c->value);
        }
    }
    return {out.begin(), out.end()};
}

} // namespace detail::nonterm

/// Checks both conditions of a witness: G is non-empty and recurrent for r,
/// and r' reaches a state of G.
inline CheckResult check_witness(const Clause& r, const Clause& r_prime, const Template& t,
                                 const SolverOptions& opts = {}) {
    using namespace detail::nonterm;
    auto call = detail::unfold::call_of(r);
    auto entry = detail::unfold::call_of(r_prime);
    if (r.body.size() != 1 || !call || call->point != r.head.point) {
        throw Error("witness clause r is not recursive: " + pretty(r));
    }
    if (r_prime.body.size() != 1 || !entry || entry->point != r.head.point) {
        throw Error("entry clause does not call p" + std::to_string(r.head.point) + ": " + pretty(r_prime));
    }
    std::vector<Constraint> guard = r.constraints;
    auto tx = instantiate(t, r.head);
    guard.insert(guard.end(), tx.begin(), tx.end());
    switch (satisfiable(guard, opts).verdict) {
    case Verdict::Unsat: return refuted("template excludes every state the clause applies to");
    case Verdict::Unknown: return unknown("solver could not decide the template guard");
    case Verdict::Sat: break;
    }

    Clause r2 = rename_apart(r, "_e");
    std::vector<Constraint> reach = r_prime.constraints;
    for (std::size_t k = 0; k < entry->args.size(); ++k) {
        auto e = equate(entry->args[k], r2.head.args[k]);
        reach.insert(reach.end(), e.begin(), e.end());
    }
    reach.insert(reach.end(), r2.constraints.begin(), r2.constraints.end());
    auto t2 = instantiate(t, r2.head);
    reach.insert(reach.end(), t2.begin(), t2.end());
    switch (satisfiable(reach, opts).verdict) {
    case Verdict::Unsat: return refuted("entry clause cannot reach the template");
    case Verdict::Unknown: return unknown("solver could not decide reachability");
    case Verdict::Sat: break;
    }
    return recurrent(r, *call, t, opts);
}

/// Syntax-directed candidates: true, equalities, inequalities, then
/// pairwise conjunctions up to the cap.
inline std::vector<Template> template_family(const Clause& r, const Program& program, std::size_t conjunction_cap) {
    int regs = detail::nonterm::register_count(r.head);
    VarSet used;
    for (const auto& c : r.constraints) {
        collect_vars(c, used);
    }
    std::vector<Term> vs;
    for (int k = 0; k < regs; ++k) {
        const Term& a = r.head.args[static_cast<std::size_t>(k)];
        if (a->kind == TermKind::Var && used.count(a->name)) {
            vs.push_back(term::ivar("V" + std::to_string(k)));
        }
    }
    auto consts = detail::nonterm::program_constants(program);
    std::vector<Constraint> eqs, ineqs;
    for (std::size_t a = 0; a < vs.size(); ++a) {
        for (std::size_t b = a + 1; b < vs.size(); ++b) {
            eqs.push_back(eq(vs[a], vs[b]));
        }
    }
    for (const auto& v : vs) {
        for (Int c : consts) {
            eqs.push_back(eq(v, term::cst(c)));
        }
    }
    for (std::size_t a = 0; a < vs.size(); ++a) {
        for (std::size_t b = a + 1; b < vs.size(); ++b) {
            ineqs.push_back(lt(vs[a], vs[b]));
            ineqs.push_back(lt(vs[b], vs[a]));
        }
    }
    for (const auto& v : vs) {
        ineqs.push_back(gt(v, term::cst(0)));
    }
    std::vector<Template> out{Template{}};
    std::vector<Constraint> singles = eqs;
    singles.insert(singles.end(), ineqs.begin(), ineqs.end());
    for (const auto& c : singles) {
        out.push_back(Template{{c}});
    }
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < singles.size() && pairs < conjunction_cap; ++a) {
        for (std::size_t b = a + 1; b < singles.size() && pairs < conjunction_cap; ++b, ++pairs) {
            out.push_back(Template{{singles[a], singles[b]}});
        }
    }
    return out;
}

struct WitnessSearch {
    std::optional<Witness> witness;
    std::size_t checks = 0;
    std::size_t unknowns = 0;
};

/// First verified witness in the order: entry point, entry clause, recursive
/// clause, template. An entry point may serve as its own loop head.
inline WitnessSearch find_witness(const Program& program, const std::vector<Clause>& clauses,
                                  const std::set<Point>& entries, const NontermOptions& options = {}) {
    WitnessSearch out;
    std::map<Point, std::vector<const Clause*>> loops;
    for (const auto& c : clauses) {
        auto call = detail::unfold::call_of(c);
        if (c.body.size() == 1 && call && call->point == c.head.point) {
            loops[c.head.point].push_back(&c);
        }
    }
    for (Point e : entries) {
        for (const auto& rp : clauses) {
            auto call = detail::unfold::call_of(rp);
            if (rp.head.point != e || rp.body.size() != 1 || !call || !loops.count(call->point)) {
                continue;
            }
            for (const Clause* r : loops[call->point]) {
                for (const auto& t : template_family(*r, program, options.conjunction_cap)) {
                    ++out.checks;
                    auto res = check_witness(*r, rp, t, options.solver);
                    if (res.verdict == WitnessCheck::Verified) {
                        out.witness = Witness{*r, rp, t, e};
                        return out;
                    }
                    out.unknowns += res.verdict == WitnessCheck::Unknown;
                }
            }
        }
    }
    return out;
}

inline std::set<Point> method_entries(const Program& program) {
    std::set<Point> out;
    for (const auto* m : program.methods()) {
        out.insert(m->entry);
    }
    return out;
}

struct AnalyzeOptions {
    int depth = 12;
    std::optional<Point> entry;
    NontermOptions nonterm;
    std::size_t clause_cap = 50000;
};

struct Report {
    std::string verdict = "unknown"; // diverges | unknown
    std::optional<Point> entry_point;
    std::optional<Witness> witness;
    int depth = 0;
    int rounds = 0;
    std::size_t clauses = 0;
    std::size_t checks = 0;
    std::map<std::string, double> timings; // seconds
    std::string reason;
};

inline Report analyze(const Program& program, const AnalyzeOptions& options = {}) {
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
    Report rep;
    rep.depth = options.depth;
    rep.entry_point = options.entry;
    if (options.entry && !program.method_at(*options.entry)) {
        throw Error("no program point " + std::to_string(*options.entry));
    }

    auto t0 = clock::now();
    auto clauses = compile_program(program);
    rep.timings["compile"] = seconds(t0);

    t0 = clock::now();
    UnfoldOptions uo;
    uo.max_depth = options.depth;
    uo.solver = options.nonterm.solver;
    uo.clause_cap = options.clause_cap;
    auto unfolding = binary_unfold(program, clauses, uo);
    rep.timings["unfold"] = seconds(t0);
    rep.rounds = unfolding.depth;
    rep.clauses = unfolding.clauses.size();

    t0 = clock::now();
    NontermOptions no = options.nonterm;
    if (no.solver.layouts.empty()) {
        no.solver.layouts = layouts_of(program);
    }
    auto entries = options.entry ? std::set<Point>{*options.entry} : method_entries(program);
    auto found = find_witness(program, unfolding.clauses, entries, no);
    rep.timings["search"] = seconds(t0);
    rep.checks = found.checks;

    if (found.witness) {
        rep.verdict = "diverges";
        rep.entry_point = found.witness->entry;
        std::string p = "p" + std::to_string(found.witness->entry);
        rep.reason = p + " has an infinite computation, so the program has an infinite execution from point " +
                     std::to_string(found.witness->entry);
        rep.witness = std::move(found.witness);
    } else if (!unfolding.complete || found.unknowns > 0) {
        rep.reason = "resource cap";
    } else {
        rep.reason = "no witness in the template family";
    }
    return rep;
}

inline nlohmann::json to_json(const Report& rep) {
    nlohmann::json j;
    j["verdict"] = rep.verdict;
    j["entry_point"] = rep.entry_point ? nlohmann::json(*rep.entry_point) : nlohmann::json(nullptr);
    if (rep.witness) {
        j["witness"] = {{"r", pretty(rep.witness->r)},
                        {"r_prime", pretty(rep.witness->r_prime)},
                        {"template", rep.witness->tmpl.to_string()}};
    } else {
        j["witness"] = nullptr;
    }
    j["depths"] = {{"requested", rep.depth}, {"computed", rep.rounds}};
    j["clauses"] = rep.clauses;
    j["checks"] = rep.checks;
    j["timings"] = rep.timings;
    j["reason"] = rep.reason;
    return j;
}

inline std::string format_report(const Report& rep) {
    std::ostringstream out;
    out << "verdict: " << rep.verdict << "\n";
    if (rep.entry_point) {
        out << "entry point: " << *rep.entry_point << "\n";
    }
    if (rep.witness) {
        out << "template: " << rep.witness->tmpl.to_string() << "\n";
        out << "r:  " << pretty(rep.witness->r) << "\n";
        out << "r': " << pretty(rep.witness->r_prime) << "\n";
    }
    out << "reason: " << rep.reason << "\n";
    out << "depth " << rep.depth << ", " << rep.clauses << " binary clauses, " << rep.checks << " checks\n";
    return out.str();
}

} // namespace dalnot
