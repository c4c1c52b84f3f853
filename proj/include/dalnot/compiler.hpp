#pragma once

// Dalvik instructions to CLP clauses. Every predicate p_q takes the r
// registers of the method owning q, then the input memory and the output
// memory. Clauses that touch the heap destructure the input memory as [A,I].

#include <string>
#include <vector>

#include "clp.hpp"
#include "program.hpp"

namespace dalnot {

namespace detail {

inline Term mem_in() { return term::var("M", Sort::MemPair); }
inline Term mem_out() { return term::var("Mp", Sort::MemPair); }
inline Term mem_mid() { return term::var("M1", Sort::MemPair); }
inline Term objects(const std::string& n) { return term::var(n, Sort::Mem); }
inline Term object(const std::string& n) { return term::var(n, Sort::Obj); }

inline std::vector<Term> with_memory(std::vector<Term> regs, Term in, Term out) {
    regs.push_back(std::move(in));
    regs.push_back(std::move(out));
    return regs;
}

inline Atom head(Point q, int r, Term in) { return point_atom(q, with_memory(regs_in(r), std::move(in), mem_out())); }
inline Atom next(Point q, int r, Term in) { return point_atom(q, with_memory(regs_out(r), std::move(in), mem_out())); }

inline void check_register(int k, int r, const char* what) {
    if (k < 0 || k >= r) {
        throw ProgramError(std::string(what) + " register v" + std::to_string(k) + " outside a frame of " +
                           std::to_string(r));
    }
}

inline std::vector<Constraint> assign(int r, int d, Term value) {
    std::vector<Constraint> cs{eq(reg_out(d), std::move(value))};
    auto rest = id_except(r, d);
    cs.insert(cs.end(), rest.begin(), rest.end());
    return cs;
}

} // namespace detail

inline Clause compile_const(Point q, int d, Int c, int r) {
    detail::check_register(d, r, "destination");
    return Clause{detail::head(q, r, detail::mem_in()), detail::assign(r, d, term::cst(c)),
                  {detail::next(q + 1, r, detail::mem_in())}};
}

inline Clause compile_move(Point q, int d, int s, int r) {
    detail::check_register(d, r, "destination");
    detail::check_register(s, r, "source");
    return Clause{detail::head(q, r, detail::mem_in()), detail::assign(r, d, reg_in(s)),
                  {detail::next(q + 1, r, detail::mem_in())}};
}

inline Clause compile_add(Point q, int d, int s, Int c, int r) {
    detail::check_register(d, r, "destination");
    detail::check_register(s, r, "source");
    return Clause{detail::head(q, r, detail::mem_in()), detail::assign(r, d, term::plus(reg_in(s), c)),
                  {detail::next(q + 1, r, detail::mem_in())}};
}

inline Clause compile_goto(Point q, Point target, int r) {
    return Clause{detail::head(q, r, detail::mem_in()), id_seq(r), {detail::next(target, r, detail::mem_in())}};
}

inline std::vector<Clause> compile_iflt(Point q, int i, int j, Point target, int r) {
    detail::check_register(i, r, "operand");
    detail::check_register(j, r, "operand");
    std::vector<Constraint> taken{lt(reg_in(i), reg_in(j))}, fall{ge(reg_in(i), reg_in(j))};
    auto id = id_seq(r);
    taken.insert(taken.end(), id.begin(), id.end());
    fall.insert(fall.end(), id.begin(), id.end());
    return {Clause{detail::head(q, r, detail::mem_in()), taken, {detail::next(target, r, detail::mem_in())}},
            Clause{detail::head(q, r, detail::mem_in()), fall, {detail::next(q + 1, r, detail::mem_in())}}};
}

/// One clause per method sharing the callee's signature. Empty when none does.
inline std::vector<Clause> compile_invoke(Point q, const std::vector<int>& args, const MethodRef& method, int r,
                                          const Program& program) {
    if (args.empty()) {
        throw ProgramError("invoke at point " + std::to_string(q) + " has no receiver");
    }
    for (int s : args) {
        detail::check_register(s, r, "argument");
    }
    std::vector<Clause> out;
    for (const MethodDef* callee : program.sign(method.sig)) {
        int pad = callee->registers - static_cast<int>(args.size());
        if (pad < 0) {
            throw ProgramError(callee->qualified_name() + " has fewer registers than the call at point " +
                               std::to_string(q) + " passes");
        }
        std::vector<Term> callee_regs(static_cast<std::size_t>(pad), term::cst(0));
        for (int s : args) {
            callee_regs.push_back(reg_in(s));
        }
        std::vector<Constraint> cs{gt(reg_in(args[0]), term::cst(0))};
        auto id = id_seq(r);
        cs.insert(cs.end(), id.begin(), id.end());
        out.push_back(Clause{detail::head(q, r, detail::mem_in()),
                             cs,
                             {lookup_atom(detail::mem_in(), reg_in(args[0]), method, callee->entry),
                              point_atom(callee->entry,
                                         detail::with_memory(callee_regs, detail::mem_in(), detail::mem_mid())),
                              point_atom(q + 1, detail::with_memory(regs_out(r), detail::mem_mid(), detail::mem_out()))}});
    }
    return out;
}

inline Clause compile_return(Point q, int r) {
    return Clause{detail::head(q, r, detail::mem_in()), {eq(detail::mem_out(), detail::mem_in())}, {}};
}

inline Clause compile_newinstance(Point q, int d, const std::string& cls, int r, const Program& program) {
    detail::check_register(d, r, "destination");
    if (!program.find_class(cls)) {
        throw ProgramError("new-instance of unknown class " + cls + " at point " + std::to_string(q));
    }
    using namespace term;
    Term a = detail::objects("A"), i = ivar("I"), o = detail::object("O");
    Term a1 = detail::objects("A1"), i1 = ivar("I1");
    std::vector<Constraint> cs{eq(read(o, cst(0)), symbol(cls))};
    auto fields = program.flatten_layout(cls);
    for (std::size_t k = 0; k < fields.size(); ++k) {
        cs.push_back(eq(read(o, cst(static_cast<Int>(k + 1))), functor(fields[k], cst(0))));
    }
    cs.push_back(eq(a1, write(a, i, o)));
    cs.push_back(eq(reg_out(d), i));
    cs.push_back(eq(i1, plus(i, 1)));
    auto rest = id_except(r, d);
    cs.insert(cs.end(), rest.begin(), rest.end());
    return Clause{detail::head(q, r, pair(a, i)), cs, {detail::next(q + 1, r, pair(a1, i1))}};
}

inline Clause compile_iget(Point q, int d, int obj, const std::string& field, int r) {
    detail::check_register(d, r, "destination");
    detail::check_register(obj, r, "object");
    using namespace term;
    Term a = detail::objects("A"), i = ivar("I");
    std::vector<Constraint> cs{gt(reg_in(obj), cst(0)), eq(read(a, reg_in(obj), ivar("F")), functor(field, reg_out(d)))};
    auto rest = id_except(r, d);
    cs.insert(cs.end(), rest.begin(), rest.end());
    return Clause{detail::head(q, r, pair(a, i)), cs, {detail::next(q + 1, r, pair(a, i))}};
}

inline Clause compile_iput(Point q, int src, int obj, const std::string& field, int r) {
    detail::check_register(src, r, "source");
    detail::check_register(obj, r, "object");
    using namespace term;
    Term a = detail::objects("A"), i = ivar("I"), o = detail::object("O"), o1 = detail::object("O1");
    Term a1 = detail::objects("A1"), f = ivar("F");
    std::vector<Constraint> cs{gt(reg_in(obj), cst(0)),
                               eq(o, read(a, reg_in(obj))),
                               eq(read(o, f), functor(field, ivar("X"))),
                               eq(o1, write(o, f, functor(field, reg_in(src)))),
                               eq(a1, write(a, reg_in(obj), o1))};
    auto id = id_seq(r);
    cs.insert(cs.end(), id.begin(), id.end());
    return Clause{detail::head(q, r, pair(a, i)), cs, {detail::next(q + 1, r, pair(a1, i))}};
}

/// Clauses for the instruction at q. Invokes of an unknown signature yield
/// nothing and append a warning.
inline std::vector<Clause> compile_instruction(const Program& program, Point q,
                                               std::vector<std::string>* warnings = nullptr) {
    const MethodDef* m = program.method_at(q);
    if (!m) {
        throw ProgramError("no instruction at point " + std::to_string(q));
    }
    int r = m->registers;
    return std::visit(
        [&](const auto& i) -> std::vector<Clause> {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, ins::Const>) {
                return {compile_const(q, i.dst, i.value, r)};
            } else if constexpr (std::is_same_v<T, ins::Move>) {
                return {compile_move(q, i.dst, i.src, r)};
            } else if constexpr (std::is_same_v<T, ins::Add>) {
                return {compile_add(q, i.dst, i.src, i.value, r)};
            } else if constexpr (std::is_same_v<T, ins::IfLt>) {
                return compile_iflt(q, i.lhs, i.rhs, i.target, r);
            } else if constexpr (std::is_same_v<T, ins::Goto>) {
                return {compile_goto(q, i.target, r)};
            } else if constexpr (std::is_same_v<T, ins::Invoke>) {
                auto cs = compile_invoke(q, i.args, i.method, r, program);
                if (cs.empty() && warnings) {
                    warnings->push_back("point " + std::to_string(q) + ": no method with the signature of " +
                                        i.method.str() + ", the call can never succeed");
                }
                return cs;
            } else if constexpr (std::is_same_v<T, ins::Return>) {
                return {compile_return(q, r)};
            } else if constexpr (std::is_same_v<T, ins::NewInstance>) {
                return {compile_newinstance(q, i.dst, i.cls, r, program)};
            } else if constexpr (std::is_same_v<T, ins::Iget>) {
                return {compile_iget(q, i.dst, i.obj, i.field, r)};
            } else {
                return {compile_iput(q, i.src, i.obj, i.field, r)};
            }
        },
        program.instruction_at(q));
}

/// The whole program, ordered by program point.
inline std::vector<Clause> compile_program(const Program& program, std::vector<std::string>* warnings = nullptr) {
    std::vector<Clause> out;
    for (Point q : program.points()) {
        auto cs = compile_instruction(program, q, warnings);
        out.insert(out.end(), cs.begin(), cs.end());
    }
    return out;
}

/// Textual CLP format, one clause per line.
inline std::string print_clauses(const std::vector<Clause>& clauses) {
    std::string out;
    for (const auto& c : clauses) {
        out += pretty(c);
        out += '\n';
    }
    return out;
}

} // namespace dalnot
