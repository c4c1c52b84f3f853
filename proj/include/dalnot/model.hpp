#pragma once

// Values of the constraint domain and a direct evaluator for terms and
// constraints under a valuation. Arrays are total: a finite map of explicit
// cells plus a fallback for every other index. Cells equal to the fallback
// are never stored, so structural equality is extensional equality.

#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>

#include "clp.hpp"

namespace dalnot {

struct ElemVal {
    enum class Kind { Sym, Fun, Opaque } kind = Kind::Opaque;
    std::string name; // Sym / Fun
    Int value = 0;    // Fun payload, or Opaque identity

    static ElemVal sym(std::string n) { return ElemVal{Kind::Sym, std::move(n), 0}; }
    static ElemVal fun(std::string n, Int v) { return ElemVal{Kind::Fun, std::move(n), v}; }
    static ElemVal opaque(Int id) { return ElemVal{Kind::Opaque, {}, id}; }

    auto operator<=>(const ElemVal&) const = default;
};

template <class V>
struct ArrayVal {
    std::map<Int, V> cells;
    V fallback{};

    [[nodiscard]] const V& at(Int k) const {
        auto it = cells.find(k);
        return it == cells.end() ? fallback : it->second;
    }

    [[nodiscard]] ArrayVal store(Int k, V v) const {
        ArrayVal out = *this;
        if (v == fallback) {
            out.cells.erase(k);
        } else {
            out.cells[k] = std::move(v);
        }
        return out;
    }

    bool operator==(const ArrayVal&) const = default;
};

using ObjVal = ArrayVal<ElemVal>;
using MemVal = ArrayVal<ObjVal>;

struct MemPairVal {
    MemVal objects;
    Int next = 1;
    bool operator==(const MemPairVal&) const = default;
};

using Value = std::variant<Int, ElemVal, ObjVal, MemVal, MemPairVal>;

struct Model {
    std::map<std::string, Value> values;

    [[nodiscard]] bool has(const std::string& v) const { return values.count(v) > 0; }
    template <class T>
    [[nodiscard]] const T& get(const std::string& v) const {
        return std::get<T>(values.at(v));
    }
};

class EvalError : public Error {
  public:
    using Error::Error;
};

inline void print_value(std::ostream& out, const ElemVal& e) {
    switch (e.kind) {
    case ElemVal::Kind::Sym: out << "'" << e.name << "'"; break;
    case ElemVal::Kind::Fun: out << e.name << "(" << e.value << ")"; break;
    case ElemVal::Kind::Opaque: out << "#" << e.value; break;
    }
}

template <class V>
void print_value(std::ostream& out, const ArrayVal<V>& a) {
    out << "{";
    bool first = true;
    for (const auto& [k, v] : a.cells) {
        out << (first ? "" : ", ") << k << ": ";
        print_value(out, v);
        first = false;
    }
    out << (first ? "" : ", ") << "_: ";
    print_value(out, a.fallback);
    out << "}";
}

inline void print_value(std::ostream& out, const Value& v) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Int>) {
                out << x;
            } else if constexpr (std::is_same_v<T, MemPairVal>) {
                out << "[";
                print_value(out, x.objects);
                out << ", " << x.next << "]";
            } else {
                print_value(out, x);
            }
        },
        v);
}

inline std::string to_string(const Value& v) {
    std::ostringstream out;
    print_value(out, v);
    return out.str();
}

inline Value eval(const Term& t, const Model& m);

inline Int eval_int(const Term& t, const Model& m) {
    switch (t->kind) {
    case TermKind::Const: return t->value;
    case TermKind::Var: return std::get<Int>(eval(t, m));
    case TermKind::Linear: {
        Int s = t->value;
        for (const auto& [v, c] : t->coeffs) {
            auto it = m.values.find(v);
            if (it == m.values.end()) {
                throw EvalError("unbound variable " + v);
            }
            s += c * std::get<Int>(it->second);
        }
        return s;
    }
    default: throw EvalError("not an integer term: " + to_string(t));
    }
}

inline Value eval(const Term& t, const Model& m) {
    switch (t->kind) {
    case TermKind::Var: {
        auto it = m.values.find(t->name);
        if (it == m.values.end()) {
            throw EvalError("unbound variable " + t->name);
        }
        return it->second;
    }
    case TermKind::Const:
    case TermKind::Linear: return eval_int(t, m);
    case TermKind::Functor: return ElemVal::fun(t->name, eval_int(t->args[0], m));
    case TermKind::Symbol: return ElemVal::sym(t->name);
    case TermKind::Read: {
        Value base = eval(t->args[0], m);
        Int i = eval_int(t->args[1], m);
        if (const auto* mem = std::get_if<MemVal>(&base)) {
            const ObjVal& o = mem->at(i);
            if (t->args.size() == 3) {
                return o.at(eval_int(t->args[2], m));
            }
            return o;
        }
        return std::get<ObjVal>(base).at(i);
    }
    case TermKind::Write: {
        Value base = eval(t->args[0], m);
        Int i = eval_int(t->args[1], m);
        Value e = eval(t->args[2], m);
        if (const auto* mem = std::get_if<MemVal>(&base)) {
            return mem->store(i, std::get<ObjVal>(e));
        }
        return std::get<ObjVal>(base).store(i, std::get<ElemVal>(e));
    }
    case TermKind::Pair: return MemPairVal{std::get<MemVal>(eval(t->args[0], m)), eval_int(t->args[1], m)};
    }
    throw EvalError("bad term");
}

inline bool holds(const Constraint& c, const Model& m) {
    if (c.lhs->sort == Sort::Int) {
        Int l = eval_int(c.lhs, m), r = eval_int(c.rhs, m);
        switch (c.rel) {
        case Rel::Eq: return l == r;
        case Rel::Ne: return l != r;
        case Rel::Lt: return l < r;
        case Rel::Le: return l <= r;
        case Rel::Gt: return l > r;
        case Rel::Ge: return l >= r;
        }
    }
    bool same = eval(c.lhs, m) == eval(c.rhs, m);
    return c.rel == Rel::Eq ? same : !same;
}

inline bool holds(const std::vector<Constraint>& cs, const Model& m) {
    return std::all_of(cs.begin(), cs.end(), [&](const Constraint& c) { return holds(c, m); });
}

} // namespace dalnot
