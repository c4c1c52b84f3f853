#pragma once

// Binary unfoldings of a compiled program and a leftmost derivation engine
// for ground queries. Both resolve lookup atoms natively, from the class name
// stored in slot 0 of the receiver.

#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "compiler.hpp"
#include "interp.hpp"
#include "solver.hpp"

namespace dalnot {

enum class LookupOutcome { Succeeds, Fails, Undetermined };

namespace detail::unfold {

// objects component of a memory term, looking through M = [A,I] when M is a variable
inline std::optional<Term> objects_of(const Term& mem, const std::vector<Constraint>& cs) {
    if (mem->kind == TermKind::Pair) {
        return mem->args[0];
    }
    for (const auto& c : cs) {
        if (c.rel != Rel::Eq) {
            continue;
        }
        if (term_equal(c.lhs, mem) && c.rhs->kind == TermKind::Pair) {
            return c.rhs->args[0];
        }
        if (term_equal(c.rhs, mem) && c.lhs->kind == TermKind::Pair) {
            return c.lhs->args[0];
        }
    }
    return std::nullopt;
}

} // namespace detail::unfold

/// Decides a lookup atom under `cs`: the receiver's class must be entailed.
inline LookupOutcome resolve_lookup(const std::vector<Constraint>& cs, const Atom& lookup, const Program& program,
                                    const SolverOptions& options) {
    auto objs = detail::unfold::objects_of(lookup.args[0], cs);
    if (!objs) {
        return LookupOutcome::Undetermined;
    }
    Term cls = term::read(*objs, lookup.args[1], term::cst(0));
    Term probe = term::var("_cls", Sort::Elem);
    auto with = cs;
    with.push_back(eq(probe, cls));
    auto r = satisfiable(with, options);
    if (r.verdict == Verdict::Unsat) {
        return LookupOutcome::Fails;
    }
    if (r.verdict != Verdict::Sat || !r.model) {
        return LookupOutcome::Undetermined;
    }
    const auto& v = r.model->get<ElemVal>("_cls");
    if (v.kind != ElemVal::Kind::Sym || !program.find_class(v.name)) {
        return LookupOutcome::Undetermined;
    }
    if (entails(cs, eq(cls, term::symbol(v.name)), options) != Tri::True) {
        return LookupOutcome::Undetermined;
    }
    const MethodDef* target = program.lookup(v.name, lookup_signature(lookup));
    return target && target->entry == lookup.args[3]->value ? LookupOutcome::Succeeds : LookupOutcome::Fails;
}

namespace detail::unfold {

// variables in order of first occurrence
inline void ordered_vars(const Term& t, std::vector<std::pair<std::string, Sort>>& out, std::set<std::string>& seen) {
    if (t->kind == TermKind::Var) {
        if (seen.insert(t->name).second) {
            out.emplace_back(t->name, t->sort);
        }
        return;
    }
    if (t->kind == TermKind::Linear) {
        for (const auto& [v, c] : t->coeffs) {
            if (seen.insert(v).second) {
                out.emplace_back(v, Sort::Int);
            }
        }
        return;
    }
    for (const auto& a : t->args) {
        ordered_vars(a, out, seen);
    }
}

/// Most general unifier for the head/call argument shapes the compiler
/// produces. Variables of `callee` are bound first; two non-variables
/// that cannot be decomposed become an equality.
inline void unify(const Term& callee, const Term& caller, Subst& s, std::vector<Constraint>& extra) {
    Term a = substitute(callee, s), b = substitute(caller, s);
    if (term_equal(a, b)) {
        return;
    }
    auto bind = [&](const std::string& v, const Term& t) {
        Subst one{{v, t}};
        for (auto& [k, val] : s) {
            val = substitute(val, one);
        }
        s[v] = t;
    };
    if (a->kind == TermKind::Var && !occurs(a->name, b)) {
        bind(a->name, b);
    } else if (b->kind == TermKind::Var && !occurs(b->name, a)) {
        bind(b->name, a);
    } else if (a->kind == TermKind::Pair && b->kind == TermKind::Pair) {
        unify(a->args[0], b->args[0], s, extra);
        unify(a->args[1], b->args[1], s, extra);
    } else {
        extra.push_back(eq(a, b));
    }
}

inline std::set<std::string> atom_vars(const Atom& a) {
    VarSet vs;
    collect_vars(a, vs);
    std::set<std::string> out;
    for (const auto& [n, s] : vs) {
        out.insert(n);
    }
    return out;
}

// index components of memory pairs in body atoms stay named
inline void pair_indexes(const Term& t, std::set<std::string>& out) {
    if (t->kind == TermKind::Pair && t->args[1]->kind == TermKind::Var) {
        out.insert(t->args[1]->name);
    }
}

inline bool ground_int(const Term& t) { return t->kind == TermKind::Const; }

/// Substitutes away existential variables defined by equalities, drops
/// trivial and duplicate constraints. nullopt when a ground constraint is false.
inline std::optional<Clause> simplify(Clause c) {
    std::set<std::string> fixed = atom_vars(c.head);
    for (const auto& b : c.body) {
        for (const auto& t : b.args) {
            pair_indexes(t, fixed);
        }
    }
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<Constraint> kept;
        for (std::size_t k = 0; k < c.constraints.size() && !changed; ++k) {
            const Constraint& x = c.constraints[k];
            if (x.lhs->sort == Sort::Int) {
                LinearForm d = term::to_linear(term::sub(x.lhs, x.rhs));
                if (d.coeffs.empty()) {
                    Int v = d.constant;
                    bool holds = false;
                    switch (x.rel) {
                    case Rel::Eq: holds = v == 0; break;
                    case Rel::Ne: holds = v != 0; break;
                    case Rel::Lt: holds = v < 0; break;
                    case Rel::Le: holds = v <= 0; break;
                    case Rel::Gt: holds = v > 0; break;
                    case Rel::Ge: holds = v >= 0; break;
                    }
                    if (!holds) {
                        return std::nullopt;
                    }
                    c.constraints.erase(c.constraints.begin() + static_cast<long>(k));
                    changed = true;
                    break;
                }
                if (x.rel == Rel::Eq) {
                    for (const auto& [v, coef] : d.coeffs) {
                        if ((coef == 1 || coef == -1) && !fixed.count(v)) {
                            // v = -(d - coef*v)/coef
                            LinearForm rest = d;
                            rest.coeffs.erase(v);
                            rest *= -coef;
                            Subst s{{v, term::from_linear(rest)}};
                            c.constraints.erase(c.constraints.begin() + static_cast<long>(k));
                            c = substitute(c, s);
                            changed = true;
                            break;
                        }
                    }
                }
                continue;
            }
            if (x.rel != Rel::Eq) {
                continue;
            }
            if (term_equal(x.lhs, x.rhs)) {
                c.constraints.erase(c.constraints.begin() + static_cast<long>(k));
                changed = true;
                break;
            }
            // var = var for arrays and elements, var = anything for memory pairs
            for (const auto& [v, t] : {std::pair{x.lhs, x.rhs}, std::pair{x.rhs, x.lhs}}) {
                if (v->kind != TermKind::Var || fixed.count(v->name) || occurs(v->name, t)) {
                    continue;
                }
                if (v->sort != Sort::MemPair && t->kind != TermKind::Var) {
                    continue;
                }
                Subst s{{v->name, t}};
                c.constraints.erase(c.constraints.begin() + static_cast<long>(k));
                c = substitute(c, s);
                changed = true;
                break;
            }
        }
        if (changed) {
            continue;
        }
        // pair equalities split into components
        for (std::size_t k = 0; k < c.constraints.size(); ++k) {
            const Constraint& x = c.constraints[k];
            if (x.rel == Rel::Eq && x.lhs->kind == TermKind::Pair && x.rhs->kind == TermKind::Pair) {
                Constraint a = eq(x.lhs->args[0], x.rhs->args[0]), b = eq(x.lhs->args[1], x.rhs->args[1]);
                c.constraints.erase(c.constraints.begin() + static_cast<long>(k));
                c.constraints.push_back(a);
                c.constraints.push_back(b);
                changed = true;
                break;
            }
        }
    }
    c.constraints = ::dalnot::detail::dedupe(c.constraints);
    return c;
}

inline std::string prefix_of(Sort s) {
    switch (s) {
    case Sort::Int: return "X";
    case Sort::Elem: return "E";
    case Sort::Obj: return "O";
    case Sort::Mem: return "A";
    case Sort::MemPair: return "M";
    }
    return "U";
}

/// Renames a clause deterministically: head registers V<k>, head memory
/// M or [A,I], head output Mp, body registers V<k>p, the rest by sort and
/// order of first occurrence. Constraints come out sorted.
inline Clause canonical(const Clause& c) {
    std::map<std::string, std::string> name;
    std::set<std::string> used;
    std::map<std::string, int> counters;
    auto give = [&](const std::string& v, const std::string& n) {
        if (!name.count(v) && !used.count(n)) {
            name[v] = n;
            used.insert(n);
        }
    };
    auto fresh = [&](const std::string& v, Sort s) {
        if (name.count(v)) {
            return;
        }
        std::string p = prefix_of(s), n;
        do {
            n = p + std::to_string(++counters[p]);
        } while (used.count(n));
        give(v, n);
    };
    const auto& h = c.head.args;
    std::size_t nregs = h.size() >= 2 ? h.size() - 2 : 0;
    for (std::size_t k = 0; k < nregs; ++k) {
        if (h[k]->kind == TermKind::Var) {
            give(h[k]->name, "V" + std::to_string(k));
        }
    }
    if (nregs + 2 == h.size()) {
        const Term& in = h[nregs];
        if (in->kind == TermKind::Var) {
            give(in->name, "M");
        } else if (in->kind == TermKind::Pair) {
            if (in->args[0]->kind == TermKind::Var) {
                give(in->args[0]->name, "A");
            }
            if (in->args[1]->kind == TermKind::Var) {
                give(in->args[1]->name, "I");
            }
        }
        if (h[nregs + 1]->kind == TermKind::Var) {
            give(h[nregs + 1]->name, "Mp");
        }
    }
    for (const auto& b : c.body) {
        if (b.is_lookup()) {
            continue;
        }
        for (std::size_t k = 0; k + 2 < b.args.size(); ++k) {
            if (b.args[k]->kind == TermKind::Var) {
                give(b.args[k]->name, "V" + std::to_string(k) + "p");
            }
        }
        const Term& in = b.args[b.args.size() - 2];
        if (in->kind == TermKind::Pair) {
            if (in->args[0]->kind == TermKind::Var) {
                fresh(in->args[0]->name, Sort::Mem);
            }
            if (in->args[1]->kind == TermKind::Var && !name.count(in->args[1]->name)) {
                std::string n;
                do {
                    n = "I" + std::to_string(++counters["I"]);
                } while (used.count(n));
                give(in->args[1]->name, n);
            }
        }
    }
    std::vector<std::pair<std::string, Sort>> order;
    std::set<std::string> seen;
    for (const auto& t : c.head.args) {
        ordered_vars(t, order, seen);
    }
    for (const auto& b : c.body) {
        for (const auto& t : b.args) {
            ordered_vars(t, order, seen);
        }
    }
    for (const auto& [v, s] : order) {
        fresh(v, s);
    }
    // remaining variables, ordered by the shape of the constraints they occur in
    auto partial = [&](const Constraint& k) {
        VarSet vs;
        collect_vars(k, vs);
        Subst s;
        for (const auto& [v, sort] : vs) {
            s[v] = term::var(name.count(v) ? name[v] : "_", sort);
        }
        return to_string(substitute(k, s));
    };
    std::vector<std::pair<std::string, std::size_t>> keyed;
    for (std::size_t k = 0; k < c.constraints.size(); ++k) {
        keyed.emplace_back(partial(c.constraints[k]), k);
    }
    std::sort(keyed.begin(), keyed.end());
    for (const auto& [key, k] : keyed) {
        std::vector<std::pair<std::string, Sort>> vs;
        ordered_vars(c.constraints[k].lhs, vs, seen);
        ordered_vars(c.constraints[k].rhs, vs, seen);
        for (const auto& [v, s] : vs) {
            fresh(v, s);
        }
    }
    VarSet all = clause_vars(c);
    Subst s;
    for (const auto& [v, sort] : all) {
        fresh(v, sort);
        s[v] = term::var(name[v], sort);
    }
    Clause out = substitute(c, s);
    std::sort(out.constraints.begin(), out.constraints.end(),
              [](const Constraint& a, const Constraint& b) { return to_string(a) < to_string(b); });
    return out;
}

inline std::optional<Atom> call_of(const Clause& c) {
    for (const auto& b : c.body) {
        if (!b.is_lookup()) {
            return b;
        }
    }
    return std::nullopt;
}

} // namespace detail::unfold

struct UnfoldOptions {
    int max_depth = 12;
    SolverOptions solver;
    std::size_t clause_cap = 50000; // per round, beyond it the set is flagged incomplete
};

struct BinaryUnfolding {
    std::vector<Clause> clauses;       // canonical, without pending lookups
    std::vector<int> rounds;           // round in which each clause first appeared
    bool complete = true;
    int depth = 0;                     // rounds actually computed
    std::vector<std::string> diagnostics;
};

namespace detail::unfold {

class Unfolder {
  public:
    Unfolder(const Program& program, const std::vector<Clause>& clauses, const UnfoldOptions& options)
        : program_(program), clauses_(clauses), options_(options) {}

    BinaryUnfolding run() {
        BinaryUnfolding out;
        for (int d = 1; d <= options_.max_depth; ++d) {
            std::size_t before = set_.size();
            round(d);
            out.depth = d;
            if (set_.size() == before) {
                break; // fixpoint
            }
        }
        for (const auto& key : order_) {
            const Entry& e = set_.at(key);
            bool pending = std::any_of(e.clause.body.begin(), e.clause.body.end(), [](const Atom& a) { return a.is_lookup(); });
            if (!pending) {
                out.clauses.push_back(e.clause);
                out.rounds.push_back(e.round);
            }
        }
        // deterministic presentation: by head, then body, then text
        std::vector<std::size_t> idx(out.clauses.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            idx[k] = k;
        }
        auto rank = [&](std::size_t k) {
            const Clause& c = out.clauses[k];
            auto b = call_of(c);
            return std::tuple{c.head.point, b ? b->point : -1, pretty(c)};
        };
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });
        BinaryUnfolding sorted;
        for (std::size_t k : idx) {
            sorted.clauses.push_back(out.clauses[k]);
            sorted.rounds.push_back(out.rounds[k]);
        }
        sorted.complete = complete_;
        sorted.depth = out.depth;
        sorted.diagnostics = diagnostics_;
        return sorted;
    }

  private:
    struct Entry {
        Clause clause;
        int round;
    };
    struct State {
        Clause partial; // body: pending lookups
        std::vector<Atom> rest;
    };

    std::string fresh() { return "_" + std::to_string(++counter_); }

    // simplify, check, settle lookups; nullopt when the clause is dropped.
    // The last `tail` body atoms are still to be solved: they take part in
    // the substitutions but their lookups are left alone.
    std::optional<Clause> settle(Clause c, std::size_t tail = 0) {
        auto s = simplify(std::move(c));
        if (!s) {
            return std::nullopt;
        }
        if (!sat(*s)) {
            return std::nullopt;
        }
        std::size_t head_part = s->body.size() - tail;
        std::vector<Atom> body;
        for (std::size_t k = 0; k < s->body.size(); ++k) {
            const Atom& a = s->body[k];
            if (k >= head_part || !a.is_lookup()) {
                body.push_back(a);
                continue;
            }
            switch (resolve_lookup(s->constraints, a, program_, options_.solver)) {
            case LookupOutcome::Succeeds: break;
            case LookupOutcome::Fails: return std::nullopt;
            case LookupOutcome::Undetermined: body.push_back(a); break;
            }
        }
        if (tail == 0) {
            // lookups first, then the call
            std::stable_partition(body.begin(), body.end(), [](const Atom& a) { return a.is_lookup(); });
        }
        s->body = std::move(body);
        return s;
    }

    bool sat(const Clause& c) {
        std::string key = pretty(canonical(Clause{c.head, c.constraints, {}}));
        auto it = sat_cache_.find(key);
        if (it != sat_cache_.end()) {
            return it->second;
        }
        auto r = satisfiable(c.constraints, options_.solver);
        if (r.verdict == Verdict::Unknown) {
            complete_ = false;
            if (diagnostics_.size() < 20) {
                diagnostics_.push_back("dropped a clause the solver could not decide: " + r.reason);
            }
        }
        bool ok = r.verdict == Verdict::Sat;
        sat_cache_[key] = ok;
        return ok;
    }

    void emit(Clause c, int d, std::map<std::string, Entry>& next, std::vector<std::string>& next_order) {
        if (next.size() >= options_.clause_cap) {
            if (complete_) {
                diagnostics_.push_back("clause cap reached in round " + std::to_string(d));
            }
            complete_ = false;
            return;
        }
        auto s = settle(std::move(c));
        if (!s) {
            return;
        }
        Clause k = canonical(*s);
        std::string key = pretty(k);
        if (next.count(key)) {
            return;
        }
        auto old = set_.find(key);
        next.emplace(key, Entry{k, old == set_.end() ? d : old->second.round});
        next_order.push_back(key);
    }

    void round(int d) {
        std::map<Point, std::vector<const Clause*>> by_head;
        for (const auto& key : order_) {
            const Clause& c = set_.at(key).clause;
            by_head[c.head.point].push_back(&c);
        }
        std::map<std::string, Entry> next;
        std::vector<std::string> next_order;
        for (const Clause& original : clauses_) {
            Clause p = rename_apart(original, fresh());
            std::deque<State> states{State{Clause{p.head, p.constraints, {}}, p.body}};
            while (!states.empty()) {
                State st = std::move(states.front());
                states.pop_front();
                if (st.rest.empty()) {
                    emit(st.partial, d, next, next_order);
                    continue;
                }
                Atom b = st.rest.front();
                std::vector<Atom> tail(st.rest.begin() + 1, st.rest.end());
                if (b.is_lookup()) {
                    switch (resolve_lookup(st.partial.constraints, b, program_, options_.solver)) {
                    case LookupOutcome::Succeeds: states.push_back(State{st.partial, tail}); break;
                    case LookupOutcome::Fails: break;
                    case LookupOutcome::Undetermined:
                        st.partial.body.push_back(b);
                        states.push_back(State{st.partial, tail});
                        break;
                    }
                    continue;
                }
                Clause call = st.partial;
                call.body.push_back(b);
                emit(call, d, next, next_order);
                auto found = by_head.find(b.point);
                if (found == by_head.end()) {
                    continue;
                }
                for (const Clause* e0 : found->second) {
                    Clause e = rename_apart(*e0, fresh());
                    Subst s;
                    std::vector<Constraint> extra;
                    for (std::size_t k = 0; k < b.args.size(); ++k) {
                        unify(e.head.args[k], b.args[k], s, extra);
                    }
                    Clause merged = substitute(st.partial, s);
                    for (const auto& c : e.constraints) {
                        merged.constraints.push_back(substitute(c, s));
                    }
                    for (const auto& c : extra) {
                        merged.constraints.push_back(substitute(c, s));
                    }
                    std::optional<Atom> callee_call;
                    for (const auto& a : e.body) {
                        if (a.is_lookup()) {
                            merged.body.push_back(substitute(a, s));
                        } else {
                            callee_call = substitute(a, s);
                        }
                    }
                    if (callee_call) {
                        merged.body.push_back(*callee_call);
                        emit(merged, d, next, next_order);
                        continue;
                    }
                    // the callee is solved: carry on with the next atom
                    for (const auto& a : tail) {
                        merged.body.push_back(substitute(a, s));
                    }
                    auto settled = settle(merged, tail.size());
                    if (!settled) {
                        continue;
                    }
                    std::vector<Atom> rest(settled->body.end() - static_cast<long>(tail.size()), settled->body.end());
                    settled->body.resize(settled->body.size() - tail.size());
                    states.push_back(State{*settled, rest});
                }
            }
        }
        for (const auto& key : next_order) {
            if (!set_.count(key)) {
                set_.emplace(key, next.at(key));
                order_.push_back(key);
            }
        }
    }

    const Program& program_;
    const std::vector<Clause>& clauses_;
    UnfoldOptions options_;
    std::map<std::string, Entry> set_;
    std::vector<std::string> order_;
    std::map<std::string, bool> sat_cache_;
    std::vector<std::string> diagnostics_;
    bool complete_ = true;
    long counter_ = 0;
};

} // namespace detail::unfold

/// Binary unfoldings of `clauses` up to `options.max_depth` composition rounds.
inline BinaryUnfolding binary_unfold(const Program& program, const std::vector<Clause>& clauses,
                                     UnfoldOptions options = {}) {
    if (options.max_depth < 1) {
        throw Error("unfolding depth must be at least 1");
    }
    if (options.solver.layouts.empty()) {
        options.solver.layouts = layouts_of(program);
    }
    return detail::unfold::Unfolder(program, clauses, options).run();
}

// ---------------------------------------------------------------------------
// Derivations

enum class DeriveStatus { Success, Failure, BudgetExhausted };

inline const char* to_string(DeriveStatus s) {
    switch (s) {
    case DeriveStatus::Success: return "success";
    case DeriveStatus::Failure: return "failure";
    case DeriveStatus::BudgetExhausted: return "budget-exhausted";
    }
    return "?";
}

struct DeriveResult {
    std::vector<Point> trace;
    DeriveStatus status = DeriveStatus::Failure;
    std::string diagnostic;
};

namespace detail::unfold {

class GroundTerms {
  public:
    Term of(const Value& v) {
        return std::visit([&](const auto& x) { return convert(x); }, v);
    }

  private:
    Term convert(Int v) { return term::cst(v); }
    Term convert(const ElemVal& e) {
        switch (e.kind) {
        case ElemVal::Kind::Sym: return term::symbol(e.name);
        case ElemVal::Kind::Fun: return term::functor(e.name, term::cst(e.value));
        default: return term::var(fresh("E"), Sort::Elem);
        }
    }
    // cells holding no denotable value are left to the free base
    Term convert(const ObjVal& o) {
        Term t = term::var(fresh("O"), Sort::Obj);
        for (const auto& [k, e] : o.cells) {
            if (e.kind != ElemVal::Kind::Opaque) {
                t = term::write(t, term::cst(k), convert(e));
            }
        }
        return t;
    }
    Term convert(const MemVal& m) {
        Term t = term::var(fresh("A"), Sort::Mem);
        for (const auto& [k, o] : m.cells) {
            if (!o.cells.empty()) {
                t = term::write(t, term::cst(k), convert(o));
            }
        }
        return t;
    }
    Term convert(const MemPairVal& p) { return term::pair(convert(p.objects), term::cst(p.next)); }

    std::string fresh(const char* p) { return std::string("_g") + p + std::to_string(++n_); }
    long n_ = 0;
};

} // namespace detail::unfold

/// Memory term for a concrete heap: location k+1 holds the k-th object.
inline Term heap_term(const Program& program, const Heap& heap) {
    MemVal m;
    for (std::size_t k = 0; k < heap.size(); ++k) {
        ObjVal o;
        o = o.store(0, ElemVal::sym(heap[k].cls));
        auto layout = program.flatten_layout(heap[k].cls);
        for (std::size_t f = 0; f < layout.size(); ++f) {
            o = o.store(static_cast<Int>(f + 1), ElemVal::fun(layout[f], heap[k].fields.at(layout[f])));
        }
        m = m.store(static_cast<Int>(k + 1), o);
    }
    detail::unfold::GroundTerms g;
    return g.of(MemPairVal{m, static_cast<Int>(heap.size()) + 1});
}

/// The query p_q(regs, [a, i], Mq) for a concrete state.
inline Atom ground_query(const Program& program, Point q, const std::vector<Int>& regs, const Heap& heap) {
    const MethodDef* m = program.method_at(q);
    if (!m) {
        throw Error("no program point " + std::to_string(q));
    }
    if (static_cast<int>(regs.size()) != m->registers) {
        throw Error("point " + std::to_string(q) + " needs " + std::to_string(m->registers) + " registers");
    }
    std::vector<Term> args;
    for (Int v : regs) {
        args.push_back(term::cst(v));
    }
    args.push_back(heap_term(program, heap));
    args.push_back(term::var("Mq", Sort::MemPair));
    return point_atom(q, std::move(args));
}

/// Leftmost derivation from a ground query, at most `budget` resolved
/// predicate atoms. Each step grounds the variables it constrains with
/// the solver's model, so the store never grows.
inline DeriveResult derive(const Program& program, const std::vector<Clause>& clauses, const Atom& query, int budget,
                           SolverOptions options = {}) {
    if (budget < 1) {
        throw Error("derivation budget must be at least 1");
    }
    if (options.layouts.empty()) {
        options.layouts = layouts_of(program);
    }
    std::map<Point, std::vector<const Clause*>> by_head;
    for (const auto& c : clauses) {
        by_head[c.head.point].push_back(&c);
    }
    detail::unfold::GroundTerms ground;
    DeriveResult out;
    std::deque<Atom> goals{query};
    long step = 0;
    while (!goals.empty()) {
        if (static_cast<int>(out.trace.size()) >= budget) {
            out.status = DeriveStatus::BudgetExhausted;
            return out;
        }
        Atom g = goals.front();
        goals.pop_front();
        bool resolved = false;
        auto found = by_head.find(g.point);
        for (const Clause* c0 : found == by_head.end() ? std::vector<const Clause*>{} : found->second) {
            Clause c = rename_apart(*c0, "_s" + std::to_string(++step));
            Subst s;
            std::vector<Constraint> extra;
            for (std::size_t k = 0; k < g.args.size(); ++k) {
                detail::unfold::unify(c.head.args[k], g.args[k], s, extra);
            }
            std::vector<Constraint> cs;
            for (const auto& x : c.constraints) {
                cs.push_back(substitute(x, s));
            }
            for (const auto& x : extra) {
                cs.push_back(substitute(x, s));
            }
            auto r = satisfiable(cs, options);
            if (r.verdict == Verdict::Unknown) {
                out.diagnostic = "solver could not decide a step at point " + std::to_string(g.point) + ": " + r.reason;
                out.status = DeriveStatus::Failure;
                return out;
            }
            if (r.verdict != Verdict::Sat) {
                continue;
            }
            bool lookups_ok = true;
            std::vector<Atom> body;
            for (const auto& a : c.body) {
                Atom b = substitute(a, s);
                if (b.is_lookup()) {
                    auto o = resolve_lookup(cs, b, program, options);
                    if (o == LookupOutcome::Undetermined) {
                        out.diagnostic = "receiver class undetermined at point " + std::to_string(g.point);
                        out.status = DeriveStatus::Failure;
                        return out;
                    }
                    if (o == LookupOutcome::Fails) {
                        lookups_ok = false;
                        break;
                    }
                    continue;
                }
                body.push_back(b);
            }
            if (!lookups_ok) {
                continue;
            }
            // ground every variable the step constrains
            VarSet vs;
            for (const auto& x : cs) {
                collect_vars(x, vs);
            }
            Subst values;
            for (const auto& [v, sort] : vs) {
                auto it = r.model->values.find(v);
                if (it != r.model->values.end()) {
                    values[v] = ground.of(it->second);
                }
            }
            for (auto& a : body) {
                a = substitute(a, values);
            }
            for (auto& a : goals) {
                a = substitute(a, values);
            }
            goals.insert(goals.begin(), body.begin(), body.end());
            out.trace.push_back(g.point);
            resolved = true;
            break;
        }
        if (!resolved) {
            out.status = DeriveStatus::Failure;
            return out;
        }
    }
    out.status = DeriveStatus::Success;
    return out;
}

} // namespace dalnot
