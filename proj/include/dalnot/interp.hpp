#pragma once

// Reference small-step semantics of the Dalvik subset. Integers are unbounded
// in spirit (64-bit here, no wraparound modelling); a failed dereference or
// dispatch aborts the whole execution.

#include <map>
#include <span>
#include <string>
#include <vector>

#include "program.hpp"

namespace dalnot {

struct HeapObject {
    std::string cls;
    std::map<std::string, Int> fields;

    bool operator==(const HeapObject&) const = default;
};

/// Location k (k >= 1) is heap[k - 1]; location 0 is null.
using Heap = std::vector<HeapObject>;

struct Frame {
    const MethodDef* method = nullptr;
    Point pc = 0;
    std::vector<Int> regs;

    bool operator==(const Frame&) const = default;
};

struct DvmState {
    std::vector<Frame> frames;
    Heap heap;

    bool operator==(const DvmState&) const = default;
};

enum class StepKind { Continue, Halt, Exception };

struct StepOutcome {
    StepKind kind;
    DvmState state; // state after the step (unchanged on Exception)
    Point at;       // point of the instruction that was executed
};

enum class RunStatus { Halted, Exception, BudgetExhausted };

inline const char* to_string(RunStatus s) {
    switch (s) {
    case RunStatus::Halted: return "halted";
    case RunStatus::Exception: return "exception";
    case RunStatus::BudgetExhausted: return "budget-exhausted";
    }
    return "?";
}

struct RunResult {
    std::vector<Point> trace; // points of successfully executed instructions
    RunStatus status;
    DvmState final_state;
};

/// Fresh object with every layout field set to 0.
inline HeapObject make_object(const Program& program, const std::string& cls) {
    HeapObject o{cls, {}};
    for (const auto& f : program.flatten_layout(cls)) {
        o.fields[f] = 0;
    }
    return o;
}

/// Arguments land in the last registers, all other registers are 0.
inline DvmState initial_state(const MethodDef& entry, std::span<const Int> args, Heap heap = {}) {
    if (static_cast<int>(args.size()) > entry.registers) {
        throw Error("too many arguments for " + entry.qualified_name() + ": " + std::to_string(args.size()) + " > " +
                    std::to_string(entry.registers));
    }
    Frame f{&entry, entry.entry, std::vector<Int>(static_cast<std::size_t>(entry.registers), 0)};
    std::copy(args.begin(), args.end(), f.regs.end() - static_cast<std::ptrdiff_t>(args.size()));
    return DvmState{{std::move(f)}, std::move(heap)};
}

/// Same as `initial_state` but starting mid-method at point `q` with a full register file.
inline DvmState state_at(const Program& program, Point q, std::vector<Int> regs, Heap heap = {}) {
    const MethodDef* m = program.method_at(q);
    if (!m) {
        throw Error("no instruction at point " + std::to_string(q));
    }
    if (static_cast<int>(regs.size()) != m->registers) {
        throw Error("register file size mismatch at point " + std::to_string(q));
    }
    return DvmState{{Frame{m, q, std::move(regs)}}, std::move(heap)};
}

namespace detail {

inline HeapObject* deref(DvmState& s, Int loc) {
    if (loc <= 0 || loc > static_cast<Int>(s.heap.size())) {
        return nullptr;
    }
    return &s.heap[static_cast<std::size_t>(loc - 1)];
}

} // namespace detail

/// Executes one instruction in place. On Exception the state is left untouched.
inline StepKind step_in_place(const Program& program, DvmState& s) {
    Frame& f = s.frames.back();
    const Instruction& instruction = program.instruction_at(f.pc);
    auto r = [&](int k) -> Int& { return f.regs[static_cast<std::size_t>(k)]; };
    const Point q = f.pc;

    if (const auto* i = std::get_if<ins::Const>(&instruction)) {
        r(i->dst) = i->value;
    } else if (const auto* i = std::get_if<ins::Move>(&instruction)) {
        r(i->dst) = r(i->src);
    } else if (const auto* i = std::get_if<ins::Add>(&instruction)) {
        r(i->dst) = r(i->src) + i->value;
    } else if (const auto* i = std::get_if<ins::IfLt>(&instruction)) {
        f.pc = r(i->lhs) < r(i->rhs) ? i->target : q + 1;
        return StepKind::Continue;
    } else if (const auto* i = std::get_if<ins::Goto>(&instruction)) {
        f.pc = i->target;
        return StepKind::Continue;
    } else if (const auto* i = std::get_if<ins::Invoke>(&instruction)) {
        const HeapObject* receiver = detail::deref(s, r(i->args[0]));
        if (!receiver) {
            return StepKind::Exception;
        }
        const MethodDef* callee = program.lookup(receiver->cls, i->method.sig);
        if (!callee) {
            return StepKind::Exception;
        }
        std::vector<Int> regs(static_cast<std::size_t>(callee->registers), 0);
        auto first = regs.size() - i->args.size();
        for (std::size_t k = 0; k < i->args.size(); ++k) {
            regs[first + k] = r(i->args[k]);
        }
        f.pc = q + 1;
        s.frames.push_back(Frame{callee, callee->entry, std::move(regs)});
        return StepKind::Continue;
    } else if (std::holds_alternative<ins::Return>(instruction)) {
        s.frames.pop_back();
        return s.frames.empty() ? StepKind::Halt : StepKind::Continue;
    } else if (const auto* i = std::get_if<ins::NewInstance>(&instruction)) {
        s.heap.push_back(make_object(program, i->cls));
        r(i->dst) = static_cast<Int>(s.heap.size());
    } else if (const auto* i = std::get_if<ins::Iget>(&instruction)) {
        HeapObject* o = detail::deref(s, r(i->obj));
        if (!o || !o->fields.count(i->field)) {
            return StepKind::Exception;
        }
        r(i->dst) = o->fields.at(i->field);
    } else if (const auto* i = std::get_if<ins::Iput>(&instruction)) {
        HeapObject* o = detail::deref(s, r(i->obj));
        if (!o || !o->fields.count(i->field)) {
            return StepKind::Exception;
        }
        o->fields[i->field] = r(i->src);
    }
    f.pc = q + 1;
    return StepKind::Continue;
}

inline StepOutcome step(const Program& program, const DvmState& state) {
    if (state.frames.empty()) {
        throw Error("step on a halted state");
    }
    StepOutcome out{StepKind::Continue, state, state.frames.back().pc};
    out.kind = step_in_place(program, out.state);
    return out;
}

inline RunResult run(const Program& program, DvmState state, std::size_t budget) {
    if (budget == 0) {
        throw Error("step budget must be positive");
    }
    RunResult result{{}, RunStatus::BudgetExhausted, {}};
    while (result.trace.size() < budget) {
        Point q = state.frames.back().pc;
        StepKind k = step_in_place(program, state);
        if (k == StepKind::Exception) {
            result.status = RunStatus::Exception;
            break;
        }
        result.trace.push_back(q);
        if (k == StepKind::Halt) {
            result.status = RunStatus::Halted;
            break;
        }
    }
    result.final_state = std::move(state);
    return result;
}

inline RunResult run(const Program& program, const MethodDef& entry, std::span<const Int> args, Heap heap,
                     std::size_t budget) {
    return run(program, initial_state(entry, args, std::move(heap)), budget);
}

} // namespace dalnot
