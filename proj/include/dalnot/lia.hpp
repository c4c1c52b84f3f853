#pragma once

// Conjunctive linear integer arithmetic by Fourier-Motzkin elimination.
//
// Equalities with a unit coefficient are solved and substituted first. An
// elimination is exact over the integers when every lower bound or every
// upper bound of the eliminated variable has coefficient 1; Unsat from the
// real shadow is always sound, and a model is only reported after integer
// back-substitution succeeds, so inexact steps can at worst yield Unknown.
// Disequalities are handled lazily by splitting a violated one into < and >.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "program.hpp"

namespace dalnot {

enum class Verdict { Sat, Unsat, Unknown };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Sat: return "sat";
    case Verdict::Unsat: return "unsat";
    case Verdict::Unknown: return "unknown";
    }
    return "?";
}

namespace lia {

/// sum(coeff * x_var) + constant, terms sorted by variable, no zero coefficient.
struct Expr {
    std::vector<std::pair<int, Int>> terms;
    Int constant = 0;

    bool operator==(const Expr&) const = default;
    bool operator<(const Expr& o) const {
        return std::tie(terms, constant) < std::tie(o.terms, o.constant);
    }

    [[nodiscard]] Int coeff(int v) const {
        for (const auto& [x, c] : terms) {
            if (x == v) {
                return c;
            }
        }
        return 0;
    }
};

enum class Kind { Le, Eq, Ne }; // expr <= 0, expr = 0, expr != 0

struct Con {
    Expr expr;
    Kind kind;
};

struct Options {
    std::size_t split_cap = 256;       // disequality splits before giving up
    std::size_t constraint_cap = 4000; // live constraints during elimination
};

struct Result {
    Verdict verdict;
    std::vector<Int> model; // indexed by variable, valid when Sat
    std::string reason;
};

class Overflow : public Error {
  public:
    Overflow() : Error("integer overflow in linear arithmetic") {}
};

namespace detail {

inline Int mul(Int a, Int b) {
    Int r;
    if (__builtin_mul_overflow(a, b, &r)) {
        throw Overflow();
    }
    return r;
}

inline Int add(Int a, Int b) {
    Int r;
    if (__builtin_add_overflow(a, b, &r)) {
        throw Overflow();
    }
    return r;
}

inline Int floor_div(Int a, Int b) {
    Int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

inline Int ceil_div(Int a, Int b) { return -floor_div(-a, b); }

/// a*x + b*y as expressions
inline Expr combine(const Expr& x, Int a, const Expr& y, Int b) {
    Expr out;
    out.constant = add(mul(a, x.constant), mul(b, y.constant));
    std::size_t i = 0, j = 0;
    while (i < x.terms.size() || j < y.terms.size()) {
        if (j == y.terms.size() || (i < x.terms.size() && x.terms[i].first < y.terms[j].first)) {
            out.terms.emplace_back(x.terms[i].first, mul(a, x.terms[i].second));
            ++i;
        } else if (i == x.terms.size() || y.terms[j].first < x.terms[i].first) {
            out.terms.emplace_back(y.terms[j].first, mul(b, y.terms[j].second));
            ++j;
        } else {
            Int c = add(mul(a, x.terms[i].second), mul(b, y.terms[j].second));
            if (c != 0) {
                out.terms.emplace_back(x.terms[i].first, c);
            }
            ++i;
            ++j;
        }
    }
    std::erase_if(out.terms, [](const auto& t) { return t.second == 0; });
    return out;
}

/// Replaces variable v in e by `def` (an expression for v).
inline Expr substitute(const Expr& e, int v, const Expr& def) {
    Int c = e.coeff(v);
    if (c == 0) {
        return e;
    }
    Expr rest = e;
    std::erase_if(rest.terms, [&](const auto& t) { return t.first == v; });
    return combine(rest, 1, def, c);
}

inline Int gcd_of(const Expr& e) {
    Int g = 0;
    for (const auto& [v, c] : e.terms) {
        g = std::gcd(g, c < 0 ? -c : c);
    }
    return g;
}

/// Divides by the coefficient gcd; tightens <=; returns false if trivially unsat.
inline bool normalize(Con& c) {
    Int g = gcd_of(c.expr);
    if (g == 0) {
        Int k = c.expr.constant;
        return c.kind == Kind::Le ? k <= 0 : c.kind == Kind::Eq ? k == 0 : k != 0;
    }
    if (g > 1) {
        if (c.kind == Kind::Eq || c.kind == Kind::Ne) {
            if (c.expr.constant % g != 0) {
                return c.kind == Kind::Ne; // an Ne that can never be violated stays harmless
            }
            c.expr.constant /= g;
        } else {
            // sum g*a_i x_i + k <= 0  <=>  sum a_i x_i <= floor(-k / g)
            c.expr.constant = -floor_div(-c.expr.constant, g);
        }
        for (auto& t : c.expr.terms) {
            t.second /= g;
        }
    }
    return true;
}

inline bool trivial(const Con& c) { return c.expr.terms.empty(); }

inline Int eval(const Expr& e, const std::vector<Int>& model) {
    Int s = e.constant;
    for (const auto& [v, c] : e.terms) {
        s = add(s, mul(c, model[static_cast<std::size_t>(v)]));
    }
    return s;
}

struct Elimination {
    int var;
    std::vector<Expr> bounds; // each means expr <= 0, mentioning var
    bool exact;
};

struct Definition {
    int var;
    Expr def; // var = def
};

class Solver {
  public:
    Solver(int nvars, const Options& options) : nvars_(nvars), options_(options) {}

    Result solve(std::vector<Con> cons) {
        try {
            return solve_rec(std::move(cons));
        } catch (const Overflow&) {
            return Result{Verdict::Unknown, {}, "integer overflow"};
        }
    }

  private:
    Result solve_rec(std::vector<Con> cons) {
        std::vector<Con> nes;
        std::vector<Con> rest;
        for (auto& c : cons) {
            if (!normalize(c)) {
                return Result{Verdict::Unsat, {}, ""};
            }
            if (trivial(c)) {
                continue;
            }
            (c.kind == Kind::Ne ? nes : rest).push_back(std::move(c));
        }
        auto r = solve_without_ne(rest);
        if (r.verdict != Verdict::Sat) {
            return r;
        }
        for (const auto& ne : nes) {
            if (eval(ne.expr, r.model) != 0) {
                continue;
            }
            if (++splits_ > options_.split_cap) {
                return Result{Verdict::Unknown, {}, "disequality split cap reached"};
            }
            // expr != 0  <=>  expr <= -1  or  -expr <= -1
            bool unknown = false;
            for (Int sign : {1, -1}) {
                std::vector<Con> branch = cons_without(nes, &ne);
                branch.insert(branch.end(), rest.begin(), rest.end());
                Expr e = combine(ne.expr, sign, Expr{}, 0);
                e.constant = add(e.constant, 1);
                branch.push_back(Con{e, Kind::Le});
                auto br = solve_rec(std::move(branch));
                if (br.verdict == Verdict::Sat) {
                    return br;
                }
                unknown = unknown || br.verdict == Verdict::Unknown;
            }
            return Result{unknown ? Verdict::Unknown : Verdict::Unsat, {}, unknown ? "inexact elimination" : ""};
        }
        return r;
    }

    static std::vector<Con> cons_without(const std::vector<Con>& nes, const Con* skip) {
        std::vector<Con> out;
        for (const auto& c : nes) {
            if (&c != skip) {
                out.push_back(c);
            }
        }
        return out;
    }

    Result solve_without_ne(std::vector<Con> cons) {
        std::vector<Definition> defs;
        // unit-coefficient equalities become substitutions
        for (;;) {
            auto it = std::find_if(cons.begin(), cons.end(), [](const Con& c) {
                return c.kind == Kind::Eq && std::any_of(c.expr.terms.begin(), c.expr.terms.end(), [](const auto& t) {
                           return t.second == 1 || t.second == -1;
                       });
            });
            if (it == cons.end()) {
                break;
            }
            Con eqc = *it;
            cons.erase(it);
            auto unit = *std::find_if(eqc.expr.terms.begin(), eqc.expr.terms.end(),
                                      [](const auto& t) { return t.second == 1 || t.second == -1; });
            // c*v + rest = 0  =>  v = -rest / c
            Expr rest = eqc.expr;
            std::erase_if(rest.terms, [&](const auto& t) { return t.first == unit.first; });
            Expr def = combine(rest, -unit.second, Expr{}, 0);
            for (auto& c : cons) {
                c.expr = substitute(c.expr, unit.first, def);
                if (!normalize(c)) {
                    return Result{Verdict::Unsat, {}, ""};
                }
            }
            std::erase_if(cons, trivial);
            for (auto& d : defs) {
                d.def = substitute(d.def, unit.first, def);
            }
            defs.push_back(Definition{unit.first, def});
        }
        // remaining equalities as two inequalities
        std::vector<Expr> les;
        for (const auto& c : cons) {
            les.push_back(c.expr);
            if (c.kind == Kind::Eq) {
                les.push_back(combine(c.expr, -1, Expr{}, 0));
            }
        }
        std::vector<Elimination> elims;
        bool exact = true;
        for (;;) {
            dedupe(les);
            if (les.size() > options_.constraint_cap) {
                return Result{Verdict::Unknown, {}, "constraint cap reached"};
            }
            std::set<int> vars;
            for (const auto& e : les) {
                for (const auto& t : e.terms) {
                    vars.insert(t.first);
                }
            }
            if (vars.empty()) {
                break;
            }
            int best = -1;
            bool best_exact = false;
            std::size_t best_cost = 0;
            for (int v : vars) {
                std::size_t lo = 0, hi = 0;
                bool lo_unit = true, hi_unit = true;
                for (const auto& e : les) {
                    Int c = e.coeff(v);
                    if (c < 0) {
                        ++lo;
                        lo_unit = lo_unit && c == -1;
                    } else if (c > 0) {
                        ++hi;
                        hi_unit = hi_unit && c == 1;
                    }
                }
                bool ex = lo_unit || hi_unit;
                std::size_t cost = lo * hi;
                if (best < 0 || (ex && !best_exact) || (ex == best_exact && cost < best_cost)) {
                    best = v;
                    best_exact = ex;
                    best_cost = cost;
                }
            }
            exact = exact && best_exact;
            Elimination el{best, {}, best_exact};
            std::vector<Expr> lower, upper, keep;
            for (auto& e : les) {
                Int c = e.coeff(best);
                if (c == 0) {
                    keep.push_back(std::move(e));
                } else {
                    el.bounds.push_back(e);
                    (c < 0 ? lower : upper).push_back(std::move(e));
                }
            }
            for (const auto& l : lower) {
                for (const auto& u : upper) {
                    Int a = -l.coeff(best); // a*v >= ...
                    Int b = u.coeff(best);  // b*v <= ...
                    Con c{combine(l, b, u, a), Kind::Le};
                    if (!normalize(c)) {
                        return Result{Verdict::Unsat, {}, ""};
                    }
                    if (!trivial(c)) {
                        keep.push_back(std::move(c.expr));
                    }
                }
            }
            elims.push_back(std::move(el));
            les = std::move(keep);
        }
        for (const auto& e : les) {
            if (e.constant > 0) {
                return Result{Verdict::Unsat, {}, ""};
            }
        }
        std::vector<Int> model(static_cast<std::size_t>(nvars_), 0);
        for (auto it = elims.rbegin(); it != elims.rend(); ++it) {
            std::optional<Int> lo, hi;
            for (const auto& e : it->bounds) {
                Int c = e.coeff(it->var);
                Expr rest = e;
                std::erase_if(rest.terms, [&](const auto& t) { return t.first == it->var; });
                Int r = eval(rest, model); // c*v + r <= 0
                if (c > 0) {
                    Int h = floor_div(-r, c);
                    hi = hi ? std::min(*hi, h) : h;
                } else {
                    Int l = ceil_div(r, -c);
                    lo = lo ? std::max(*lo, l) : l;
                }
            }
            if (lo && hi && *lo > *hi) {
                return Result{Verdict::Unknown, {}, "inexact elimination"};
            }
            Int v = 0;
            if (lo && *lo > 0) {
                v = *lo;
            } else if (hi && *hi < 0) {
                v = *hi;
            }
            model[static_cast<std::size_t>(it->var)] = v;
        }
        for (auto it = defs.rbegin(); it != defs.rend(); ++it) {
            model[static_cast<std::size_t>(it->var)] = eval(it->def, model);
        }
        (void)exact;
        return Result{Verdict::Sat, std::move(model), ""};
    }

    static void dedupe(std::vector<Expr>& les) {
        // keep only the tightest constant per coefficient vector
        std::map<std::vector<std::pair<int, Int>>, Int> best;
        for (const auto& e : les) {
            auto [it, inserted] = best.emplace(e.terms, e.constant);
            if (!inserted) {
                it->second = std::max(it->second, e.constant);
            }
        }
        les.clear();
        for (const auto& [terms, k] : best) {
            les.push_back(Expr{terms, k});
        }
    }

    int nvars_;
    Options options_;
    std::size_t splits_ = 0;
};

} // namespace detail

inline Result solve(int nvars, std::vector<Con> cons, const Options& options = {}) {
    return detail::Solver(nvars, options).solve(std::move(cons));
}

/// Builder helpers.
inline Expr var_expr(int v, Int c = 1) { return Expr{{{v, c}}, 0}; }
inline Expr const_expr(Int k) { return Expr{{}, k}; }
inline Expr plus(const Expr& a, const Expr& b) { return detail::combine(a, 1, b, 1); }
inline Expr minus(const Expr& a, const Expr& b) { return detail::combine(a, 1, b, -1); }

/// Projection of a conjunction of <= / = constraints onto variables `keep`
/// by exact eliminations only. Returns nullopt if some elimination would be
/// inexact or the constraint cap is hit; an unsat input projects to {1 <= 0}.
inline std::optional<std::vector<Con>> project(std::vector<Con> cons, const std::set<int>& keep,
                                               std::size_t cap = 4000) {
    try {
        for (auto& c : cons) {
            if (c.kind == Kind::Ne) {
                return std::nullopt;
            }
            if (!detail::normalize(c)) {
                return std::vector<Con>{Con{const_expr(1), Kind::Le}};
            }
        }
        std::erase_if(cons, detail::trivial);
        auto drop = [&](int v) { return !keep.count(v); };
        for (;;) {
            int victim = -1;
            for (const auto& c : cons) {
                for (const auto& t : c.expr.terms) {
                    if (drop(t.first)) {
                        victim = t.first;
                        break;
                    }
                }
                if (victim >= 0) {
                    break;
                }
            }
            if (victim < 0) {
                return cons;
            }
            // prefer an equality with unit coefficient on the victim
            auto eq = std::find_if(cons.begin(), cons.end(), [&](const Con& c) {
                Int k = c.expr.coeff(victim);
                return c.kind == Kind::Eq && (k == 1 || k == -1);
            });
            std::vector<Con> next;
            if (eq != cons.end()) {
                Int k = eq->expr.coeff(victim);
                Expr rest = eq->expr;
                std::erase_if(rest.terms, [&](const auto& t) { return t.first == victim; });
                Expr def = detail::combine(rest, -k, Expr{}, 0);
                for (const auto& c : cons) {
                    if (&c == &*eq) {
                        continue;
                    }
                    Con s{detail::substitute(c.expr, victim, def), c.kind};
                    if (!detail::normalize(s)) {
                        return std::vector<Con>{Con{const_expr(1), Kind::Le}};
                    }
                    if (!detail::trivial(s)) {
                        next.push_back(std::move(s));
                    }
                }
            } else {
                std::vector<Expr> lower, upper;
                bool lo_unit = true, hi_unit = true;
                for (const auto& c : cons) {
                    Int k = c.expr.coeff(victim);
                    if (k == 0) {
                        next.push_back(c);
                        continue;
                    }
                    if (c.kind == Kind::Eq) {
                        return std::nullopt; // non-unit equality: not exact
                    }
                    if (k < 0) {
                        lower.push_back(c.expr);
                        lo_unit = lo_unit && k == -1;
                    } else {
                        upper.push_back(c.expr);
                        hi_unit = hi_unit && k == 1;
                    }
                }
                if (!lo_unit && !hi_unit) {
                    return std::nullopt;
                }
                for (const auto& l : lower) {
                    for (const auto& u : upper) {
                        Con c{detail::combine(l, u.coeff(victim), u, -l.coeff(victim)), Kind::Le};
                        if (!detail::normalize(c)) {
                            return std::vector<Con>{Con{const_expr(1), Kind::Le}};
                        }
                        if (!detail::trivial(c)) {
                            next.push_back(std::move(c));
                        }
                    }
                }
            }
            if (next.size() > cap) {
                return std::nullopt;
            }
            cons = std::move(next);
        }
    } catch (const Overflow&) {
        return std::nullopt;
    }
}

} // namespace lia
} // namespace dalnot
