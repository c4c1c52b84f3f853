#pragma once

// Random ground queries: derive on the compiled clauses against the
// interpreter from the same state. Registers hold 0 or a live location, and
// heap objects come from classes declaring every field the code touches.

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dalnot/unfolder.hpp"

namespace traces {

using namespace dalnot;

struct Stats {
    int checked = 0;
    int skipped = 0;
    int mismatches = 0;
    std::string first_mismatch;
};

// an exception on a live object means it lacked the field: not a state the code can reach
inline bool ill_typed(const Program& p, const RunResult& r) {
    if (r.status != RunStatus::Exception) {
        return false;
    }
    const Frame& f = r.final_state.frames.back();
    const auto& op = p.instruction_at(f.pc);
    int reg = -1;
    if (const auto* g = std::get_if<ins::Iget>(&op)) {
        reg = g->obj;
    } else if (const auto* s = std::get_if<ins::Iput>(&op)) {
        reg = s->obj;
    }
    if (reg < 0) {
        return false;
    }
    Int loc = f.regs[static_cast<std::size_t>(reg)];
    return loc > 0 && loc <= static_cast<Int>(r.final_state.heap.size());
}

inline bool agrees(RunStatus r, DeriveStatus d) {
    switch (r) {
    case RunStatus::Halted: return d == DeriveStatus::Success;
    case RunStatus::Exception: return d == DeriveStatus::Failure;
    case RunStatus::BudgetExhausted: return d == DeriveStatus::BudgetExhausted;
    }
    return false;
}

inline Stats check(const Program& p, const std::vector<std::string>& classes, unsigned seed, int target,
                   int budget = 60) {
    std::mt19937 rng(seed);
    auto clauses = compile_program(p);
    auto points = p.points();
    Stats st;
    while (st.checked < target && st.skipped < 40 * target) {
        Point q = points[rng() % points.size()];
        const MethodDef* m = p.method_at(q);
        Heap heap;
        int objects = static_cast<int>(rng() % 4);
        for (int k = 0; k < objects; ++k) {
            HeapObject o = make_object(p, classes[rng() % classes.size()]);
            for (auto& [name, v] : o.fields) {
                v = static_cast<Int>(rng() % 7) - 3;
            }
            heap.push_back(o);
        }
        std::vector<Int> regs;
        for (int k = 0; k < m->registers; ++k) {
            regs.push_back(static_cast<Int>(rng() % static_cast<unsigned>(objects + 1)));
        }
        auto concrete = run(p, state_at(p, q, regs, heap), static_cast<std::size_t>(budget));
        if (ill_typed(p, concrete)) {
            ++st.skipped;
            continue;
        }
        ++st.checked;
        auto symbolic = derive(p, clauses, ground_query(p, q, regs, heap), budget);
        if (symbolic.trace != concrete.trace || !agrees(concrete.status, symbolic.status)) {
            if (st.mismatches++ == 0) {
                std::ostringstream out;
                out << "query at " << q << ": interpreter " << to_string(concrete.status) << " after "
                    << concrete.trace.size() << " steps, derive " << to_string(symbolic.status) << " after "
                    << symbolic.trace.size() << " steps " << symbolic.diagnostic;
                st.first_mismatch = out.str();
            }
        }
    }
    return st;
}

// heap classes per fixture
inline const std::vector<std::pair<std::string, std::vector<std::string>>> kFixtures = {
    {"loops.dalsub", {"Loops"}},
    {"loops_noalias.dalsub", {"Loops"}},
    {"dispatch.dalsub", {"Counter", "Plain"}},
    {"nullderef.dalsub", {"Box"}},
};

} // namespace traces
