#pragma once

// Constraint logic program IR over integers, objects (arrays of tagged terms)
// and memories (arrays of objects).
//
// Sorts:
//   Int      integers, also memory locations and object slot indexes
//   Elem     object slot contents: a class name 'w' or a field term f(i)
//   Obj      arrays Int -> Elem
//   Mem      arrays Int -> Obj
//   MemPair  a memory [A, I]: object array plus next free location
//
// Terms are immutable and shared. Integer terms are kept in a normal form:
// a linear combination with no variable collapses to Const, a lone variable
// with coefficient 1 and no constant collapses to Var.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "program.hpp"

namespace dalnot {

enum class Sort { Int, Elem, Obj, Mem, MemPair };

inline const char* to_string(Sort s) {
    switch (s) {
    case Sort::Int: return "Int";
    case Sort::Elem: return "Elem";
    case Sort::Obj: return "Obj";
    case Sort::Mem: return "Mem";
    case Sort::MemPair: return "MemPair";
    }
    return "?";
}

/// Sort of the elements stored in an array of sort `s`.
inline std::optional<Sort> element_sort(Sort s) {
    if (s == Sort::Mem) {
        return Sort::Obj;
    }
    if (s == Sort::Obj) {
        return Sort::Elem;
    }
    return std::nullopt;
}

inline std::optional<Sort> container_sort(Sort s) {
    if (s == Sort::Obj) {
        return Sort::Mem;
    }
    if (s == Sort::Elem) {
        return Sort::Obj;
    }
    return std::nullopt;
}

class SortError : public Error {
  public:
    using Error::Error;
};

enum class TermKind { Var, Const, Linear, Functor, Symbol, Read, Write, Pair };

struct TermNode;
using Term = std::shared_ptr<const TermNode>;

struct TermNode {
    TermKind kind;
    Sort sort;
    std::string name;                               // Var / Functor / Symbol
    Int value = 0;                                  // Const, or the constant of a Linear
    std::vector<std::pair<std::string, Int>> coeffs; // Linear, sorted by name, non-zero
    std::vector<Term> args;                          // Functor [arg]; Read [array, idx...]; Write [array, idx, elem]; Pair [A, I]
};

/// Linear form sum(coeff * var) + constant over integer variables.
struct LinearForm {
    std::map<std::string, Int> coeffs;
    Int constant = 0;

    LinearForm& operator+=(const LinearForm& o) {
        for (const auto& [v, c] : o.coeffs) {
            if ((coeffs[v] += c) == 0) {
                coeffs.erase(v);
            }
        }
        constant += o.constant;
        return *this;
    }
    LinearForm& operator*=(Int k) {
        if (k == 0) {
            coeffs.clear();
        }
        for (auto& [v, c] : coeffs) {
            c *= k;
        }
        constant *= k;
        return *this;
    }
    bool operator==(const LinearForm&) const = default;
};

namespace term {

inline Term var(std::string name, Sort sort) {
    return std::make_shared<const TermNode>(TermNode{TermKind::Var, sort, std::move(name), 0, {}, {}});
}
inline Term ivar(std::string name) { return var(std::move(name), Sort::Int); }
inline Term cst(Int value) { return std::make_shared<const TermNode>(TermNode{TermKind::Const, Sort::Int, {}, value, {}, {}}); }

inline Term from_linear(const LinearForm& f) {
    if (f.coeffs.empty()) {
        return cst(f.constant);
    }
    if (f.coeffs.size() == 1 && f.constant == 0 && f.coeffs.begin()->second == 1) {
        return ivar(f.coeffs.begin()->first);
    }
    TermNode n{TermKind::Linear, Sort::Int, {}, f.constant, {}, {}};
    n.coeffs.assign(f.coeffs.begin(), f.coeffs.end());
    return std::make_shared<const TermNode>(std::move(n));
}

inline LinearForm to_linear(const Term& t) {
    LinearForm f;
    switch (t->kind) {
    case TermKind::Var:
        if (t->sort != Sort::Int) {
            throw SortError("non-integer variable " + t->name + " in arithmetic");
        }
        f.coeffs[t->name] = 1;
        break;
    case TermKind::Const: f.constant = t->value; break;
    case TermKind::Linear:
        f.coeffs.insert(t->coeffs.begin(), t->coeffs.end());
        f.constant = t->value;
        break;
    default: throw SortError("non-integer term in arithmetic");
    }
    return f;
}

inline Term add(const Term& a, const Term& b) {
    LinearForm f = to_linear(a);
    f += to_linear(b);
    return from_linear(f);
}
inline Term plus(const Term& a, Int k) { return add(a, cst(k)); }
inline Term scale(const Term& a, Int k) {
    LinearForm f = to_linear(a);
    f *= k;
    return from_linear(f);
}
inline Term sub(const Term& a, const Term& b) { return add(a, scale(b, -1)); }

inline Term functor(std::string name, const Term& arg) {
    if (arg->sort != Sort::Int) {
        throw SortError("functor argument must be an integer term");
    }
    return std::make_shared<const TermNode>(TermNode{TermKind::Functor, Sort::Elem, std::move(name), 0, {}, {arg}});
}

/// Quoted constant: a class name, or a method reference inside lookup atoms.
inline Term symbol(std::string text) {
    return std::make_shared<const TermNode>(TermNode{TermKind::Symbol, Sort::Elem, std::move(text), 0, {}, {}});
}

inline Term read(const Term& array, const Term& index) {
    if (index->sort != Sort::Int) {
        throw SortError("array index must be an integer term");
    }
    // read(read(A, i), j) is kept as the two-index read(A, i, j)
    if (array->kind == TermKind::Read && array->sort == Sort::Obj && array->args.size() == 2) {
        return std::make_shared<const TermNode>(
            TermNode{TermKind::Read, Sort::Elem, {}, 0, {}, {array->args[0], array->args[1], index}});
    }
    auto es = element_sort(array->sort);
    if (!es) {
        throw SortError(std::string("read from non-array of sort ") + to_string(array->sort));
    }
    return std::make_shared<const TermNode>(TermNode{TermKind::Read, *es, {}, 0, {}, {array, index}});
}

inline Term read(const Term& array, const Term& i, const Term& j) { return read(read(array, i), j); }

inline Term write(const Term& array, const Term& index, const Term& element) {
    auto es = element_sort(array->sort);
    if (!es || element->sort != *es || index->sort != Sort::Int) {
        throw SortError("ill-sorted array write");
    }
    return std::make_shared<const TermNode>(TermNode{TermKind::Write, array->sort, {}, 0, {}, {array, index, element}});
}

inline Term pair(const Term& objects, const Term& next) {
    if (objects->sort != Sort::Mem || next->sort != Sort::Int) {
        throw SortError("memory pair must be [Mem, Int]");
    }
    return std::make_shared<const TermNode>(TermNode{TermKind::Pair, Sort::MemPair, {}, 0, {}, {objects, next}});
}

} // namespace term

inline bool is_var(const Term& t) { return t->kind == TermKind::Var; }

inline bool term_equal(const Term& a, const Term& b) {
    if (a == b) {
        return true;
    }
    if (a->kind != b->kind || a->sort != b->sort || a->name != b->name || a->value != b->value ||
        a->coeffs != b->coeffs || a->args.size() != b->args.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a->args.size(); ++k) {
        if (!term_equal(a->args[k], b->args[k])) {
            return false;
        }
    }
    return true;
}

inline void print_term(std::ostream& out, const Term& t) {
    switch (t->kind) {
    case TermKind::Var: out << t->name; break;
    case TermKind::Const: out << t->value; break;
    case TermKind::Linear: {
        bool first = true;
        for (const auto& [v, c] : t->coeffs) {
            Int mag = c < 0 ? -c : c;
            if (first) {
                out << (c < 0 ? "-" : "");
            } else {
                out << (c < 0 ? " - " : " + ");
            }
            if (mag != 1) {
                out << mag << "*";
            }
            out << v;
            first = false;
        }
        if (t->value != 0) {
            out << (t->value < 0 ? " - " : " + ") << (t->value < 0 ? -t->value : t->value);
        }
        break;
    }
    case TermKind::Functor:
        out << t->name << "(";
        print_term(out, t->args[0]);
        out << ")";
        break;
    case TermKind::Symbol: out << "'" << t->name << "'"; break;
    case TermKind::Read:
    case TermKind::Write:
        out << (t->kind == TermKind::Read ? "read(" : "write(");
        for (std::size_t k = 0; k < t->args.size(); ++k) {
            out << (k ? "," : "");
            print_term(out, t->args[k]);
        }
        out << ")";
        break;
    case TermKind::Pair:
        out << "[";
        print_term(out, t->args[0]);
        out << ",";
        print_term(out, t->args[1]);
        out << "]";
        break;
    }
}

inline std::string to_string(const Term& t) {
    std::ostringstream out;
    print_term(out, t);
    return out.str();
}

enum class Rel { Eq, Ne, Lt, Le, Gt, Ge };

inline const char* to_string(Rel r) {
    switch (r) {
    case Rel::Eq: return "=";
    case Rel::Ne: return "!=";
    case Rel::Lt: return "<";
    case Rel::Le: return "<=";
    case Rel::Gt: return ">";
    case Rel::Ge: return ">=";
    }
    return "?";
}

inline Rel negate(Rel r) {
    switch (r) {
    case Rel::Eq: return Rel::Ne;
    case Rel::Ne: return Rel::Eq;
    case Rel::Lt: return Rel::Ge;
    case Rel::Le: return Rel::Gt;
    case Rel::Gt: return Rel::Le;
    case Rel::Ge: return Rel::Lt;
    }
    return r;
}

struct Constraint {
    Term lhs;
    Rel rel;
    Term rhs;
};

inline Constraint make_constraint(Term lhs, Rel rel, Term rhs) {
    if (lhs->sort != rhs->sort) {
        throw SortError("constraint between sorts " + std::string(to_string(lhs->sort)) + " and " + to_string(rhs->sort) +
                        ": " + to_string(lhs) + " " + to_string(rel) + " " + to_string(rhs));
    }
    if (rel != Rel::Eq && rel != Rel::Ne && lhs->sort != Sort::Int) {
        throw SortError(std::string("ordering relation on sort ") + to_string(lhs->sort));
    }
    return Constraint{std::move(lhs), rel, std::move(rhs)};
}

inline Constraint eq(Term a, Term b) { return make_constraint(std::move(a), Rel::Eq, std::move(b)); }
inline Constraint ne(Term a, Term b) { return make_constraint(std::move(a), Rel::Ne, std::move(b)); }
inline Constraint lt(Term a, Term b) { return make_constraint(std::move(a), Rel::Lt, std::move(b)); }
inline Constraint ge(Term a, Term b) { return make_constraint(std::move(a), Rel::Ge, std::move(b)); }
inline Constraint gt(Term a, Term b) { return make_constraint(std::move(a), Rel::Gt, std::move(b)); }

inline Constraint negate(const Constraint& c) { return Constraint{c.lhs, negate(c.rel), c.rhs}; }

inline bool constraint_equal(const Constraint& a, const Constraint& b) {
    return a.rel == b.rel && term_equal(a.lhs, b.lhs) && term_equal(a.rhs, b.rhs);
}

inline std::string to_string(const Constraint& c) {
    return to_string(c.lhs) + " " + to_string(c.rel) + " " + to_string(c.rhs);
}

struct Atom {
    enum class Kind { Point, Lookup } kind = Kind::Point;
    Point point = 0;         // for p_q atoms
    std::vector<Term> args;  // p_q: registers..., memory in, memory out; lookup: memory, receiver, 'method', entry point

    [[nodiscard]] bool is_lookup() const { return kind == Kind::Lookup; }
    [[nodiscard]] std::string predicate() const { return is_lookup() ? "lookup" : "p" + std::to_string(point); }
};

inline Atom point_atom(Point q, std::vector<Term> args) { return Atom{Atom::Kind::Point, q, std::move(args)}; }

inline Atom lookup_atom(Term memory, Term receiver, const MethodRef& method, Point entry) {
    return Atom{Atom::Kind::Lookup, 0, {std::move(memory), std::move(receiver), term::symbol(method.str()), term::cst(entry)}};
}

/// Signature encoded in a lookup atom's third argument ('Class.name/argc').
inline Signature lookup_signature(const Atom& a) {
    const std::string& text = a.args[2]->name;
    auto slash = text.rfind('/');
    auto dot = text.rfind('.', slash);
    return Signature{text.substr(dot + 1, slash - dot - 1), std::stoi(text.substr(slash + 1)), true};
}

inline std::string to_string(const Atom& a) {
    std::ostringstream out;
    out << a.predicate() << "(";
    for (std::size_t k = 0; k < a.args.size(); ++k) {
        out << (k ? "," : "");
        print_term(out, a.args[k]);
    }
    out << ")";
    return out.str();
}

struct Clause {
    Atom head;
    std::vector<Constraint> constraints;
    std::vector<Atom> body;

    /// Body atoms that are program points (lookups excluded).
    [[nodiscard]] std::vector<const Atom*> calls() const {
        std::vector<const Atom*> out;
        for (const auto& a : body) {
            if (!a.is_lookup()) {
                out.push_back(&a);
            }
        }
        return out;
    }
};

/// `head :- {c1, c2}, atom1, atom2.`
inline std::string pretty(const Clause& c) {
    std::ostringstream out;
    out << to_string(c.head) << " :- {";
    for (std::size_t k = 0; k < c.constraints.size(); ++k) {
        out << (k ? ", " : "") << to_string(c.constraints[k]);
    }
    out << "}";
    for (const auto& a : c.body) {
        out << ", " << to_string(a);
    }
    out << ".";
    return out.str();
}

// Register variable naming: V<k> before an instruction, V<k>p after it.
inline Term reg_in(int k) { return term::ivar("V" + std::to_string(k)); }
inline Term reg_out(int k) { return term::ivar("V" + std::to_string(k) + "p"); }

inline std::vector<Term> regs_in(int r) {
    std::vector<Term> out;
    for (int k = 0; k < r; ++k) {
        out.push_back(reg_in(k));
    }
    return out;
}

inline std::vector<Term> regs_out(int r) {
    std::vector<Term> out;
    for (int k = 0; k < r; ++k) {
        out.push_back(reg_out(k));
    }
    return out;
}

/// {V'_k = V_k | 0 <= k < r}
inline std::vector<Constraint> id_seq(int r) {
    std::vector<Constraint> out;
    for (int k = 0; k < r; ++k) {
        out.push_back(eq(reg_out(k), reg_in(k)));
    }
    return out;
}

/// id_seq(r) without V'_d = V_d.
inline std::vector<Constraint> id_except(int r, int d) {
    if (d < 0 || d >= r) {
        throw Error("register index " + std::to_string(d) + " out of range for " + std::to_string(r) + " registers");
    }
    std::vector<Constraint> out;
    for (int k = 0; k < r; ++k) {
        if (k != d) {
            out.push_back(eq(reg_out(k), reg_in(k)));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Variables and substitution

using VarSet = std::map<std::string, Sort>;

inline void collect_vars(const Term& t, VarSet& out) {
    switch (t->kind) {
    case TermKind::Var: out.emplace(t->name, t->sort); break;
    case TermKind::Linear:
        for (const auto& [v, c] : t->coeffs) {
            out.emplace(v, Sort::Int);
        }
        break;
    default:
        for (const auto& a : t->args) {
            collect_vars(a, out);
        }
    }
}

inline void collect_vars(const Constraint& c, VarSet& out) {
    collect_vars(c.lhs, out);
    collect_vars(c.rhs, out);
}

inline void collect_vars(const Atom& a, VarSet& out) {
    for (const auto& t : a.args) {
        collect_vars(t, out);
    }
}

inline VarSet clause_vars(const Clause& c) {
    VarSet out;
    collect_vars(c.head, out);
    for (const auto& k : c.constraints) {
        collect_vars(k, out);
    }
    for (const auto& a : c.body) {
        collect_vars(a, out);
    }
    return out;
}

inline bool occurs(const std::string& name, const Term& t) {
    VarSet vs;
    collect_vars(t, vs);
    return vs.count(name) > 0;
}

using Subst = std::map<std::string, Term>;

inline Term substitute(const Term& t, const Subst& s) {
    switch (t->kind) {
    case TermKind::Var: {
        auto it = s.find(t->name);
        return it == s.end() ? t : it->second;
    }
    case TermKind::Const:
    case TermKind::Symbol: return t;
    case TermKind::Linear: {
        bool touched = std::any_of(t->coeffs.begin(), t->coeffs.end(), [&](const auto& p) { return s.count(p.first); });
        if (!touched) {
            return t;
        }
        LinearForm f;
        f.constant = t->value;
        for (const auto& [v, c] : t->coeffs) {
            auto it = s.find(v);
            LinearForm part = it == s.end() ? term::to_linear(term::ivar(v)) : term::to_linear(it->second);
            part *= c;
            f += part;
        }
        return term::from_linear(f);
    }
    case TermKind::Functor: return term::functor(t->name, substitute(t->args[0], s));
    case TermKind::Read: {
        Term r = term::read(substitute(t->args[0], s), substitute(t->args[1], s));
        return t->args.size() == 3 ? term::read(r, substitute(t->args[2], s)) : r;
    }
    case TermKind::Write:
        return term::write(substitute(t->args[0], s), substitute(t->args[1], s), substitute(t->args[2], s));
    case TermKind::Pair: return term::pair(substitute(t->args[0], s), substitute(t->args[1], s));
    }
    return t;
}

inline Constraint substitute(const Constraint& c, const Subst& s) {
    return make_constraint(substitute(c.lhs, s), c.rel, substitute(c.rhs, s));
}

inline Atom substitute(const Atom& a, const Subst& s) {
    Atom out{a.kind, a.point, {}};
    for (const auto& t : a.args) {
        out.args.push_back(substitute(t, s));
    }
    return out;
}

inline Clause substitute(const Clause& c, const Subst& s) {
    Clause out{substitute(c.head, s), {}, {}};
    for (const auto& k : c.constraints) {
        out.constraints.push_back(substitute(k, s));
    }
    for (const auto& a : c.body) {
        out.body.push_back(substitute(a, s));
    }
    return out;
}

/// Renames every variable of `c` by appending `suffix`.
inline Clause rename_apart(const Clause& c, const std::string& suffix) {
    Subst s;
    for (const auto& [name, sort] : clause_vars(c)) {
        s[name] = term::var(name + suffix, sort);
    }
    return substitute(c, s);
}

// ---------------------------------------------------------------------------
// Textual format

namespace detail {

struct RawTerm {
    enum class Kind { Var, Int, Sum, Functor, Symbol, Read, Write, Pair } kind;
    std::string name;
    Int value = 0;
    std::vector<std::pair<Int, RawTerm>> summands; // Sum: coefficient * term
    std::vector<RawTerm> args;
};

struct RawConstraint {
    RawTerm lhs;
    Rel rel;
    RawTerm rhs;
};

struct RawAtom {
    std::string predicate;
    std::vector<RawTerm> args;
};

struct RawClause {
    RawAtom head;
    std::vector<RawConstraint> constraints;
    std::vector<RawAtom> body;
};

class ClpLexer {
  public:
    struct Tok {
        enum class Kind { Ident, Var, Int, Quoted, Punct, End } kind;
        std::string text;
        Int value = 0;
        int line;
        int column;
    };

    explicit ClpLexer(std::string_view text) : text_(text) {}

    std::vector<Tok> tokenize() {
        std::vector<Tok> out;
        for (;;) {
            while (pos_ < text_.size() && (std::isspace(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '%')) {
                if (text_[pos_] == '%') {
                    while (pos_ < text_.size() && text_[pos_] != '\n') {
                        adv();
                    }
                } else {
                    adv();
                }
            }
            int line = line_, col = col_;
            if (pos_ >= text_.size()) {
                out.push_back({Tok::Kind::End, "", 0, line, col});
                return out;
            }
            char c = text_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string digits;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                    digits += text_[pos_];
                    adv();
                }
                out.push_back({Tok::Kind::Int, digits, std::stoll(digits), line, col});
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string id;
                while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                    id += text_[pos_];
                    adv();
                }
                bool upper = std::isupper(static_cast<unsigned char>(id[0])) || id[0] == '_';
                out.push_back({upper ? Tok::Kind::Var : Tok::Kind::Ident, id, 0, line, col});
            } else if (c == '\'') {
                adv();
                std::string q;
                while (pos_ < text_.size() && text_[pos_] != '\'') {
                    q += text_[pos_];
                    adv();
                }
                if (pos_ >= text_.size()) {
                    throw ParseError("unterminated quoted name", line, col);
                }
                adv();
                out.push_back({Tok::Kind::Quoted, q, 0, line, col});
            } else {
                static const char* const two[] = {":-", "!=", "<=", ">="};
                std::string p(1, c);
                for (const char* t : two) {
                    if (text_.substr(pos_, 2) == t) {
                        p = t;
                    }
                }
                if (std::string_view("()[]{},.=<>+-*").find(c) == std::string_view::npos && p.size() == 1) {
                    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
                }
                for (std::size_t k = 0; k < p.size(); ++k) {
                    adv();
                }
                out.push_back({Tok::Kind::Punct, p, 0, line, col});
            }
        }
    }

  private:
    void adv() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class ClpParser {
    using Tok = ClpLexer::Tok;

  public:
    explicit ClpParser(std::string_view text) : toks_(ClpLexer(text).tokenize()) {}

    [[nodiscard]] bool at_end() const { return toks_[pos_].kind == Tok::Kind::End; }

    RawClause clause() {
        RawClause c;
        c.head = atom();
        expect(":-");
        expect("{");
        if (!accept("}")) {
            do {
                c.constraints.push_back(constraint());
            } while (accept(","));
            expect("}");
        }
        while (accept(",")) {
            c.body.push_back(atom());
        }
        expect(".");
        return c;
    }

  private:
    const Tok& peek() const { return toks_[pos_]; }
    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(what + (peek().kind == Tok::Kind::End ? " at end of input" : " near '" + peek().text + "'"),
                         peek().line, peek().column);
    }
    bool is_punct(std::string_view p) const { return peek().kind == Tok::Kind::Punct && peek().text == p; }
    bool accept(std::string_view p) {
        if (is_punct(p)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(std::string_view p) {
        if (!accept(p)) {
            fail("expected '" + std::string(p) + "'");
        }
    }

    RawAtom atom() {
        if (peek().kind != Tok::Kind::Ident) {
            fail("expected predicate");
        }
        RawAtom a{peek().text, {}};
        ++pos_;
        expect("(");
        if (!accept(")")) {
            do {
                a.args.push_back(sum());
            } while (accept(","));
            expect(")");
        }
        return a;
    }

    RawConstraint constraint() {
        RawTerm l = sum();
        static const std::pair<const char*, Rel> rels[] = {{"=", Rel::Eq},  {"!=", Rel::Ne}, {"<", Rel::Lt},
                                                           {"<=", Rel::Le}, {">", Rel::Gt},  {">=", Rel::Ge}};
        for (const auto& [text, rel] : rels) {
            if (accept(text)) {
                return RawConstraint{std::move(l), rel, sum()};
            }
        }
        fail("expected relation");
    }

    RawTerm sum() {
        RawTerm s{RawTerm::Kind::Sum, {}, 0, {}, {}};
        Int sign = 1;
        if (accept("-")) {
            sign = -1;
        }
        s.summands.push_back(product(sign));
        for (;;) {
            if (accept("+")) {
                s.summands.push_back(product(1));
            } else if (accept("-")) {
                s.summands.push_back(product(-1));
            } else {
                break;
            }
        }
        if (s.summands.size() == 1 && s.summands[0].first == 1) {
            return std::move(s.summands[0].second);
        }
        return s;
    }

    std::pair<Int, RawTerm> product(Int sign) {
        if (peek().kind == Tok::Kind::Int && toks_[pos_ + 1].kind == Tok::Kind::Punct && toks_[pos_ + 1].text == "*") {
            Int k = peek().value;
            pos_ += 2;
            return {sign * k, primary()};
        }
        return {sign, primary()};
    }

    RawTerm primary() {
        const Tok& t = peek();
        if (t.kind == Tok::Kind::Int) {
            ++pos_;
            return RawTerm{RawTerm::Kind::Int, {}, t.value, {}, {}};
        }
        if (t.kind == Tok::Kind::Var) {
            ++pos_;
            return RawTerm{RawTerm::Kind::Var, t.text, 0, {}, {}};
        }
        if (t.kind == Tok::Kind::Quoted) {
            ++pos_;
            return RawTerm{RawTerm::Kind::Symbol, t.text, 0, {}, {}};
        }
        if (accept("[")) {
            RawTerm p{RawTerm::Kind::Pair, {}, 0, {}, {}};
            p.args.push_back(sum());
            expect(",");
            p.args.push_back(sum());
            expect("]");
            return p;
        }
        if (accept("(")) {
            RawTerm inner = sum();
            expect(")");
            return inner;
        }
        if (t.kind == Tok::Kind::Ident) {
            std::string name = t.text;
            ++pos_;
            expect("(");
            std::vector<RawTerm> args;
            do {
                args.push_back(sum());
            } while (accept(","));
            expect(")");
            if (name == "read") {
                if (args.size() < 2 || args.size() > 3) {
                    fail("read takes an array and one or two indexes");
                }
                return RawTerm{RawTerm::Kind::Read, {}, 0, {}, std::move(args)};
            }
            if (name == "write") {
                if (args.size() != 3) {
                    fail("write takes an array, an index and an element");
                }
                return RawTerm{RawTerm::Kind::Write, {}, 0, {}, std::move(args)};
            }
            if (args.size() != 1) {
                fail("field functors take exactly one argument");
            }
            return RawTerm{RawTerm::Kind::Functor, name, 0, {}, std::move(args)};
        }
        fail("expected term");
    }

    std::vector<Tok> toks_;
    std::size_t pos_ = 0;
};

/// Infers variable sorts from usage and builds typed terms.
class SortInference {
  public:
    explicit SortInference(VarSet known = {}) : sorts_(std::move(known)) {}

    Clause build(const RawClause& raw) {
        for (bool changed = true; changed;) {
            std::size_t before = sorts_.size();
            visit_atom(raw.head);
            for (const auto& c : raw.constraints) {
                visit_constraint(c);
            }
            for (const auto& a : raw.body) {
                visit_atom(a);
            }
            changed = sorts_.size() != before;
        }
        Clause out{make_atom(raw.head), {}, {}};
        for (const auto& c : raw.constraints) {
            out.constraints.push_back(make_constraint(make(c.lhs), c.rel, make(c.rhs)));
        }
        for (const auto& a : raw.body) {
            out.body.push_back(make_atom(a));
        }
        return out;
    }

    std::vector<Constraint> build(const std::vector<RawConstraint>& raw) {
        for (bool changed = true; changed;) {
            std::size_t before = sorts_.size();
            for (const auto& c : raw) {
                visit_constraint(c);
            }
            changed = sorts_.size() != before;
        }
        std::vector<Constraint> out;
        for (const auto& c : raw) {
            out.push_back(make_constraint(make(c.lhs), c.rel, make(c.rhs)));
        }
        return out;
    }

  private:
    void assign(const std::string& v, Sort s) {
        auto [it, inserted] = sorts_.emplace(v, s);
        if (!inserted && it->second != s) {
            throw SortError("variable " + v + " used as both " + to_string(it->second) + " and " + to_string(s));
        }
    }

    std::optional<Sort> visit(const RawTerm& t, std::optional<Sort> expect) {
        using K = RawTerm::Kind;
        switch (t.kind) {
        case K::Var: {
            if (expect) {
                assign(t.name, *expect);
            }
            auto it = sorts_.find(t.name);
            return it == sorts_.end() ? std::nullopt : std::optional<Sort>(it->second);
        }
        case K::Int: return Sort::Int;
        case K::Sum:
            for (const auto& [k, s] : t.summands) {
                visit(s, Sort::Int);
            }
            return Sort::Int;
        case K::Functor:
            visit(t.args[0], Sort::Int);
            return Sort::Elem;
        case K::Symbol: return Sort::Elem;
        case K::Pair:
            visit(t.args[0], Sort::Mem);
            visit(t.args[1], Sort::Int);
            return Sort::MemPair;
        case K::Read: {
            for (std::size_t k = 1; k < t.args.size(); ++k) {
                visit(t.args[k], Sort::Int);
            }
            if (t.args.size() == 3) {
                visit(t.args[0], Sort::Mem);
                return Sort::Elem;
            }
            std::optional<Sort> base = expect ? container_sort(*expect) : std::nullopt;
            auto s = visit(t.args[0], base);
            return s ? element_sort(*s) : std::nullopt;
        }
        case K::Write: {
            visit(t.args[1], Sort::Int);
            auto s = visit(t.args[0], expect);
            auto e = visit(t.args[2], s ? element_sort(*s) : std::nullopt);
            if (!s && e) {
                s = container_sort(*e);
                visit(t.args[0], s);
            }
            return s;
        }
        }
        return std::nullopt;
    }

    void visit_constraint(const RawConstraint& c) {
        if (c.rel != Rel::Eq && c.rel != Rel::Ne) {
            visit(c.lhs, Sort::Int);
            visit(c.rhs, Sort::Int);
            return;
        }
        auto l = visit(c.lhs, std::nullopt);
        auto r = visit(c.rhs, l);
        if (!l && r) {
            visit(c.lhs, r);
        }
    }

    void visit_atom(const RawAtom& a) {
        if (a.predicate == "lookup") {
            if (a.args.size() != 4) {
                throw SortError("lookup takes four arguments");
            }
            visit(a.args[0], Sort::MemPair);
            visit(a.args[1], Sort::Int);
            visit(a.args[3], Sort::Int);
            return;
        }
        if (a.args.size() < 2) {
            throw SortError("predicate " + a.predicate + " needs memory arguments");
        }
        for (std::size_t k = 0; k < a.args.size(); ++k) {
            visit(a.args[k], k + 2 >= a.args.size() ? Sort::MemPair : Sort::Int);
        }
    }

    Term make(const RawTerm& t) {
        using K = RawTerm::Kind;
        switch (t.kind) {
        case K::Var: {
            auto it = sorts_.find(t.name);
            return term::var(t.name, it == sorts_.end() ? Sort::Int : it->second);
        }
        case K::Int: return term::cst(t.value);
        case K::Sum: {
            LinearForm f;
            for (const auto& [k, s] : t.summands) {
                LinearForm part = term::to_linear(make(s));
                part *= k;
                f += part;
            }
            return term::from_linear(f);
        }
        case K::Functor: return term::functor(t.name, make(t.args[0]));
        case K::Symbol: return term::symbol(t.name);
        case K::Pair: return term::pair(make(t.args[0]), make(t.args[1]));
        case K::Read: {
            Term r = term::read(make(t.args[0]), make(t.args[1]));
            return t.args.size() == 3 ? term::read(r, make(t.args[2])) : r;
        }
        case K::Write: return term::write(make(t.args[0]), make(t.args[1]), make(t.args[2]));
        }
        throw SortError("bad term");
    }

    Atom make_atom(const RawAtom& a) {
        Atom out;
        if (a.predicate == "lookup") {
            out.kind = Atom::Kind::Lookup;
        } else {
            if (a.predicate.size() < 2 || a.predicate[0] != 'p') {
                throw SortError("predicates are p<point> or lookup, got " + a.predicate);
            }
            auto q = parse_int(std::string_view(a.predicate).substr(1));
            if (!q) {
                throw SortError("predicates are p<point> or lookup, got " + a.predicate);
            }
            out.point = static_cast<Point>(*q);
        }
        for (const auto& t : a.args) {
            out.args.push_back(make(t));
        }
        return out;
    }

    VarSet sorts_;
};

} // namespace detail

inline Clause parse_clause(std::string_view text) {
    detail::ClpParser p(text);
    detail::SortInference infer;
    Clause c = infer.build(p.clause());
    if (!p.at_end()) {
        throw ParseError("trailing input after clause", 0, 0);
    }
    return c;
}

/// One clause per `.`-terminated entry; `%` starts a comment.
inline std::vector<Clause> parse_clauses(std::string_view text) {
    detail::ClpParser p(text);
    std::vector<Clause> out;
    while (!p.at_end()) {
        detail::SortInference infer;
        out.push_back(infer.build(p.clause()));
    }
    return out;
}

/// Parses `{c1, c2, ...}` or a bare comma-separated list; `known` fixes sorts of
/// variables that usage alone cannot determine.
inline std::vector<Constraint> parse_constraints(std::string_view text, const VarSet& known = {}) {
    std::string wrapped = "q(M,M) :- {" + std::string(text) + "}.";
    if (auto open = text.find('{'); open != std::string_view::npos) {
        auto close = text.rfind('}');
        wrapped = "q(M,M) :- {" + std::string(text.substr(open + 1, close - open - 1)) + "}.";
    }
    detail::ClpParser p(wrapped);
    auto raw = p.clause();
    detail::SortInference infer(known);
    return infer.build(raw.constraints);
}

// ---------------------------------------------------------------------------
// Clause isomorphism: bijective variable renaming plus constraint-set equality
// modulo symmetry of = and != and mirroring of < / >.

struct Renaming {
    std::map<std::string, std::string> forward;
    std::map<std::string, std::string> backward;

    bool bind(const std::string& a, const std::string& b) {
        auto f = forward.find(a);
        auto r = backward.find(b);
        if (f != forward.end() || r != backward.end()) {
            return f != forward.end() && f->second == b && r != backward.end() && r->second == a;
        }
        forward.emplace(a, b);
        backward.emplace(b, a);
        return true;
    }
};

namespace detail {

inline void match_terms(const Term& a, const Term& b, const Renaming& r, std::vector<Renaming>& out);

inline void match_seq(const std::vector<Term>& as, const std::vector<Term>& bs, std::size_t k, const Renaming& r,
                      std::vector<Renaming>& out) {
    if (k == as.size()) {
        out.push_back(r);
        return;
    }
    std::vector<Renaming> partial;
    match_terms(as[k], bs[k], r, partial);
    for (const auto& p : partial) {
        match_seq(as, bs, k + 1, p, out);
    }
}

inline void match_coeffs(const Term& a, const Term& b, std::size_t k, std::vector<bool>& used, const Renaming& r,
                         std::vector<Renaming>& out) {
    if (k == a->coeffs.size()) {
        out.push_back(r);
        return;
    }
    for (std::size_t j = 0; j < b->coeffs.size(); ++j) {
        if (used[j] || a->coeffs[k].second != b->coeffs[j].second) {
            continue;
        }
        Renaming next = r;
        if (!next.bind(a->coeffs[k].first, b->coeffs[j].first)) {
            continue;
        }
        used[j] = true;
        match_coeffs(a, b, k + 1, used, next, out);
        used[j] = false;
    }
}

inline void match_terms(const Term& a, const Term& b, const Renaming& r, std::vector<Renaming>& out) {
    if (a->kind != b->kind || a->sort != b->sort) {
        return;
    }
    switch (a->kind) {
    case TermKind::Var: {
        Renaming next = r;
        if (next.bind(a->name, b->name)) {
            out.push_back(std::move(next));
        }
        return;
    }
    case TermKind::Const:
        if (a->value == b->value) {
            out.push_back(r);
        }
        return;
    case TermKind::Symbol:
        if (a->name == b->name) {
            out.push_back(r);
        }
        return;
    case TermKind::Linear: {
        if (a->value != b->value || a->coeffs.size() != b->coeffs.size()) {
            return;
        }
        std::vector<bool> used(b->coeffs.size(), false);
        match_coeffs(a, b, 0, used, r, out);
        return;
    }
    case TermKind::Functor:
        if (a->name != b->name) {
            return;
        }
        [[fallthrough]];
    default:
        if (a->args.size() == b->args.size()) {
            match_seq(a->args, b->args, 0, r, out);
        }
    }
}

inline Constraint mirror(const Constraint& c) {
    switch (c.rel) {
    case Rel::Gt: return Constraint{c.rhs, Rel::Lt, c.lhs};
    case Rel::Ge: return Constraint{c.rhs, Rel::Le, c.lhs};
    default: return c;
    }
}

inline void match_constraints(const Constraint& a0, const Constraint& b0, const Renaming& r, std::vector<Renaming>& out) {
    Constraint a = mirror(a0);
    Constraint b = mirror(b0);
    if (a.rel != b.rel) {
        return;
    }
    match_seq({a.lhs, a.rhs}, {b.lhs, b.rhs}, 0, r, out);
    if (a.rel == Rel::Eq || a.rel == Rel::Ne) {
        match_seq({a.lhs, a.rhs}, {b.rhs, b.lhs}, 0, r, out);
    }
}

inline void match_atoms(const Atom& a, const Atom& b, const Renaming& r, std::vector<Renaming>& out) {
    if (a.kind != b.kind || a.point != b.point || a.args.size() != b.args.size()) {
        return;
    }
    match_seq(a.args, b.args, 0, r, out);
}

inline std::vector<Constraint> dedupe(const std::vector<Constraint>& cs) {
    std::vector<Constraint> out;
    for (const auto& c : cs) {
        Constraint m = mirror(c);
        bool dup = std::any_of(out.begin(), out.end(), [&](const Constraint& o) {
            Constraint mo = mirror(o);
            if (mo.rel != m.rel) {
                return false;
            }
            bool same = term_equal(mo.lhs, m.lhs) && term_equal(mo.rhs, m.rhs);
            bool swapped = (m.rel == Rel::Eq || m.rel == Rel::Ne) && term_equal(mo.lhs, m.rhs) && term_equal(mo.rhs, m.lhs);
            return same || swapped;
        });
        if (!dup) {
            out.push_back(c);
        }
    }
    return out;
}

/// Name-independent shape of a constraint, used to prune candidate pairings.
inline std::string shape(const Term& t) {
    switch (t->kind) {
    case TermKind::Var: return std::string("v") + to_string(t->sort);
    case TermKind::Const: return std::to_string(t->value);
    case TermKind::Symbol: return "'" + t->name + "'";
    case TermKind::Linear: {
        std::vector<Int> ks;
        for (const auto& p : t->coeffs) {
            ks.push_back(p.second);
        }
        std::sort(ks.begin(), ks.end());
        std::string s = "lin" + std::to_string(t->value);
        for (Int k : ks) {
            s += "," + std::to_string(k);
        }
        return s;
    }
    default: {
        std::string s = std::to_string(static_cast<int>(t->kind)) + t->name + "(";
        for (const auto& a : t->args) {
            s += shape(a) + ",";
        }
        return s + ")";
    }
    }
}

inline std::string shape(const Constraint& c0) {
    Constraint c = mirror(c0);
    std::string l = shape(c.lhs), r = shape(c.rhs);
    if ((c.rel == Rel::Eq || c.rel == Rel::Ne) && r < l) {
        std::swap(l, r);
    }
    return l + to_string(c.rel) + r;
}

inline bool match_constraint_sets(const std::vector<Constraint>& as, const std::vector<Constraint>& bs, std::size_t k,
                                  std::vector<bool>& used, const Renaming& r, Renaming& result) {
    if (k == as.size()) {
        result = r;
        return true;
    }
    const std::string sa = shape(as[k]);
    for (std::size_t j = 0; j < bs.size(); ++j) {
        if (used[j] || shape(bs[j]) != sa) {
            continue;
        }
        std::vector<Renaming> exts;
        match_constraints(as[k], bs[j], r, exts);
        used[j] = true;
        for (const auto& e : exts) {
            if (match_constraint_sets(as, bs, k + 1, used, e, result)) {
                used[j] = false;
                return true;
            }
        }
        used[j] = false;
    }
    return false;
}

} // namespace detail

/// Variable renaming mapping `a` onto `b`, if one exists. With `subset`, every
/// constraint of `a` must map to a distinct constraint of `b` but `b` may have more.
inline std::optional<Renaming> clause_isomorphism(const Clause& a, const Clause& b, bool subset = false) {
    if (a.body.size() != b.body.size()) {
        return std::nullopt;
    }
    auto ca = detail::dedupe(a.constraints);
    auto cb = detail::dedupe(b.constraints);
    if (!subset && ca.size() != cb.size()) {
        return std::nullopt;
    }
    std::vector<Renaming> frontier;
    detail::match_atoms(a.head, b.head, Renaming{}, frontier);
    for (std::size_t k = 0; k < a.body.size(); ++k) {
        std::vector<Renaming> next;
        for (const auto& r : frontier) {
            detail::match_atoms(a.body[k], b.body[k], r, next);
        }
        frontier = std::move(next);
    }
    // Variables binding early in many constraints go first.
    std::stable_sort(ca.begin(), ca.end(), [](const Constraint& x, const Constraint& y) {
        VarSet vx, vy;
        collect_vars(x, vx);
        collect_vars(y, vy);
        return vx.size() < vy.size();
    });
    for (const auto& r : frontier) {
        std::vector<bool> used(cb.size(), false);
        Renaming result;
        if (detail::match_constraint_sets(ca, cb, 0, used, r, result)) {
            return result;
        }
    }
    return std::nullopt;
}

inline bool isomorphic(const Clause& a, const Clause& b) { return clause_isomorphism(a, b).has_value(); }

} // namespace dalnot
