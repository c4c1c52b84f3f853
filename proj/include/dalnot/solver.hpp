#pragma once

// Satisfiability for conjunctions over integers, objects and memories.
//
// Terms are flattened into nodes on three levels (memories, objects, object
// slots) connected by select/store relations, with integer index terms kept
// aside. Disequalities between arrays are skolemized down to a slot
// disequality at a fresh index. The search then enumerates which index terms
// denote the same location (per level), and for each arrangement computes the
// congruence closure in which every array node has one cell per index class.
// Stores tie the cells of their result to those of their base, which gives
// read-over-write. Class names in slot 0 and field functors are tied to slot
// positions by the class layouts. What remains is integer arithmetic.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "clp.hpp"
#include "lia.hpp"
#include "model.hpp"

namespace dalnot {

/// Class name -> flattened field list; field k sits at slot k + 1.
using Layouts = std::map<std::string, std::vector<std::string>>;

inline Layouts layouts_of(const Program& program) {
    Layouts out;
    for (const auto& c : program.classes()) {
        out[c.name] = program.flatten_layout(c.name);
    }
    return out;
}

struct SolverOptions {
    Layouts layouts;                 // empty: no layout assumption on objects
    std::size_t branch_cap = 20000;  // index arrangements explored before Unknown
    lia::Options lia;
    std::ostream* debug = nullptr;   // branch trace
};

struct SolverResult {
    Verdict verdict;
    std::optional<Model> model;
    std::string reason;
};

namespace detail::arrays {

enum class Level { Mem, Obj, Elem };

struct Tag {
    enum class Kind { None, Sym, Fun } kind = Kind::None;
    std::string name;
    lia::Expr payload;
};

struct Select {
    int result;
    int array;
    int index;
};

struct Store {
    int result;
    int array;
    int index;
    int elem;
};

struct Problem {
    std::map<std::string, int> int_ids;
    std::vector<std::string> int_names;
    std::vector<lia::Con> ints;
    bool trivially_unsat = false;

    std::vector<Level> level;
    std::vector<Tag> tag;
    std::map<std::string, int> var_nodes;
    std::map<std::string, Sort> var_sorts;

    std::vector<lia::Expr> idx[2]; // 0: memory locations, 1: object slots
    std::map<lia::Expr, int> idx_ids[2];
    std::vector<Select> selects[2];
    std::vector<Store> stores[2];
    std::vector<std::pair<int, int>> eqs;
    std::vector<std::pair<int, int>> elem_nes;
    int zero_slot = -1;
};

inline int side_of(Level l) { return l == Level::Mem ? 0 : 1; }

class Flattener {
  public:
    Flattener(Problem& p, const Layouts& layouts) : p_(p), layouts_(layouts) {
        p_.zero_slot = index(1, lia::const_expr(0));
    }

    int int_var(const std::string& name) {
        auto [it, inserted] = p_.int_ids.emplace(name, static_cast<int>(p_.int_names.size()));
        if (inserted) {
            p_.int_names.push_back(name);
        }
        return it->second;
    }

    lia::Expr int_expr(const Term& t) {
        switch (t->kind) {
        case TermKind::Const: return lia::const_expr(t->value);
        case TermKind::Var:
            p_.var_sorts[t->name] = Sort::Int;
            return lia::var_expr(int_var(t->name));
        case TermKind::Linear: {
            lia::Expr e = lia::const_expr(t->value);
            for (const auto& [v, c] : t->coeffs) {
                p_.var_sorts[v] = Sort::Int;
                e = lia::plus(e, lia::var_expr(int_var(v), c));
            }
            return e;
        }
        default: throw SortError("expected integer term: " + to_string(t));
        }
    }

    int fresh(Level l) {
        p_.level.push_back(l);
        p_.tag.emplace_back();
        return static_cast<int>(p_.level.size()) - 1;
    }

    int index(int side, const lia::Expr& e) {
        auto [it, inserted] = p_.idx_ids[side].emplace(e, static_cast<int>(p_.idx[side].size()));
        if (inserted) {
            p_.idx[side].push_back(e);
        }
        return it->second;
    }

    int var_node(const std::string& name, Level l) {
        auto it = p_.var_nodes.find(name);
        if (it != p_.var_nodes.end()) {
            return it->second;
        }
        int n = fresh(l);
        p_.var_nodes.emplace(name, n);
        return n;
    }

    static Level level_of(Sort s) {
        switch (s) {
        case Sort::Mem: return Level::Mem;
        case Sort::Obj: return Level::Obj;
        case Sort::Elem: return Level::Elem;
        default: throw SortError(std::string("no array level for sort ") + to_string(s));
        }
    }

    int node(const Term& t) {
        switch (t->kind) {
        case TermKind::Var:
            p_.var_sorts[t->name] = t->sort;
            return var_node(t->name, level_of(t->sort));
        case TermKind::Symbol: {
            int n = fresh(Level::Elem);
            p_.tag[static_cast<std::size_t>(n)] = Tag{Tag::Kind::Sym, t->name, {}};
            return n;
        }
        case TermKind::Functor: {
            lia::Expr payload = int_expr(t->args[0]);
            int n = fresh(Level::Elem);
            p_.tag[static_cast<std::size_t>(n)] = Tag{Tag::Kind::Fun, t->name, payload};
            return n;
        }
        case TermKind::Read: {
            int base = node(t->args[0]);
            int r = select(base, int_expr(t->args[1]));
            return t->args.size() == 3 ? select(r, int_expr(t->args[2])) : r;
        }
        case TermKind::Write: {
            int base = node(t->args[0]);
            Level l = p_.level[static_cast<std::size_t>(base)];
            int side = side_of(l);
            int i = index(side, int_expr(t->args[1]));
            int e = node(t->args[2]);
            int r = fresh(l);
            p_.stores[side].push_back(Store{r, base, i, e});
            return r;
        }
        default: throw SortError("expected array or element term: " + to_string(t));
        }
    }

    int select(int base, const lia::Expr& idx) {
        Level l = p_.level[static_cast<std::size_t>(base)];
        int side = side_of(l);
        int r = fresh(l == Level::Mem ? Level::Obj : Level::Elem);
        p_.selects[side].push_back(Select{r, base, index(side, idx)});
        return r;
    }

    std::pair<int, lia::Expr> mem_pair(const Term& t) {
        if (t->kind == TermKind::Pair) {
            return {node(t->args[0]), int_expr(t->args[1])};
        }
        if (t->kind != TermKind::Var) {
            throw SortError("bad memory term: " + to_string(t));
        }
        p_.var_sorts[t->name] = Sort::MemPair;
        return {var_node(t->name + "#a", Level::Mem), lia::var_expr(int_var(t->name + "#i"))};
    }

    void add_int(const lia::Expr& l, Rel rel, const lia::Expr& r) {
        using lia::Kind;
        switch (rel) {
        case Rel::Eq: p_.ints.push_back({lia::minus(l, r), Kind::Eq}); break;
        case Rel::Ne: p_.ints.push_back({lia::minus(l, r), Kind::Ne}); break;
        case Rel::Le: p_.ints.push_back({lia::minus(l, r), Kind::Le}); break;
        case Rel::Ge: p_.ints.push_back({lia::minus(r, l), Kind::Le}); break;
        case Rel::Lt: p_.ints.push_back({lia::plus(lia::minus(l, r), lia::const_expr(1)), Kind::Le}); break;
        case Rel::Gt: p_.ints.push_back({lia::plus(lia::minus(r, l), lia::const_expr(1)), Kind::Le}); break;
        }
    }

    void not_equal(int a, int b) {
        Level l = p_.level[static_cast<std::size_t>(a)];
        if (l == Level::Elem) {
            p_.elem_nes.emplace_back(a, b);
            return;
        }
        std::string k = "#k" + std::to_string(skolems_++);
        lia::Expr e = lia::var_expr(int_var(k));
        p_.var_sorts[k] = Sort::Int;
        not_equal(select(a, e), select(b, e));
    }

    void constraint(const Constraint& c) {
        layout_hint(c);
        switch (c.lhs->sort) {
        case Sort::Int: add_int(int_expr(c.lhs), c.rel, int_expr(c.rhs)); return;
        case Sort::MemPair: {
            if (c.rel != Rel::Eq) {
                throw SortError("memory pair disequality must be split before flattening");
            }
            auto [a1, i1] = mem_pair(c.lhs);
            auto [a2, i2] = mem_pair(c.rhs);
            p_.eqs.emplace_back(a1, a2);
            add_int(i1, Rel::Eq, i2);
            return;
        }
        default: {
            int a = node(c.lhs), b = node(c.rhs);
            if (c.rel == Rel::Eq) {
                p_.eqs.emplace_back(a, b);
            } else {
                not_equal(a, b);
            }
        }
        }
    }

    /// read(..)=f(..) pins the slot to the positions of f, read(..)='w' to slot 0.
    void layout_hint(const Constraint& c) {
        if (layouts_.empty() || c.rel != Rel::Eq || c.lhs->sort != Sort::Elem) {
            return;
        }
        for (const auto& [rd, val] : {std::pair{c.lhs, c.rhs}, std::pair{c.rhs, c.lhs}}) {
            if (rd->kind != TermKind::Read) {
                continue;
            }
            lia::Expr slot = int_expr(rd->args.back());
            if (val->kind == TermKind::Symbol) {
                add_int(slot, Rel::Eq, lia::const_expr(0));
            } else if (val->kind == TermKind::Functor) {
                std::set<Int> allowed = allowed_slots(layouts_, val->name);
                if (allowed.empty()) {
                    p_.trivially_unsat = true;
                } else if (allowed.size() == 1) {
                    add_int(slot, Rel::Eq, lia::const_expr(*allowed.begin()));
                } else {
                    add_int(slot, Rel::Ge, lia::const_expr(*allowed.begin()));
                    add_int(slot, Rel::Le, lia::const_expr(*allowed.rbegin()));
                }
            }
        }
    }

    static std::set<Int> allowed_slots(const Layouts& layouts, const std::string& field) {
        std::set<Int> out;
        for (const auto& [cls, fields] : layouts) {
            for (std::size_t k = 0; k < fields.size(); ++k) {
                if (fields[k] == field) {
                    out.insert(static_cast<Int>(k) + 1);
                }
            }
        }
        return out;
    }

  private:
    Problem& p_;
    const Layouts& layouts_;
    int skolems_ = 0;
};

/// Union-find closure for one arrangement of index classes.
class Closure {
  public:
    Closure(const Problem& p, const std::vector<int> (&cls)[2], const int (&nclasses)[2])
        : p_(p), cls_(cls), ncls_{nclasses[0], nclasses[1]}, level_(p.level), tag_(p.tag) {
        std::size_t n0 = level_.size();
        cells_.resize(n0);
        for (std::size_t n = 0; n < n0; ++n) {
            if (level_[n] == Level::Mem) {
                make_cells(static_cast<int>(n));
            }
        }
        for (std::size_t n = 0; n < level_.size(); ++n) {
            if (level_[n] == Level::Obj) {
                make_cells(static_cast<int>(n));
            }
        }
        parent_.resize(level_.size());
        for (std::size_t n = 0; n < parent_.size(); ++n) {
            parent_[n] = static_cast<int>(n);
        }
    }

    /// False on a tag conflict.
    bool run() {
        for (const auto& [a, b] : p_.eqs) {
            queue_.emplace_back(a, b);
        }
        if (!drain()) {
            return false;
        }
        for (;;) {
            std::size_t before = merges_;
            for (int side = 0; side < 2; ++side) {
                for (const auto& s : p_.selects[side]) {
                    queue_.emplace_back(s.result, cell(s.array, side, s.index));
                }
                for (const auto& s : p_.stores[side]) {
                    int k = cls_[side][static_cast<std::size_t>(s.index)];
                    for (int c = 0; c < ncls_[side]; ++c) {
                        int target = cells_[static_cast<std::size_t>(find(s.result))][static_cast<std::size_t>(c)];
                        int source = c == k ? s.elem : cells_[static_cast<std::size_t>(find(s.array))][static_cast<std::size_t>(c)];
                        queue_.emplace_back(target, source);
                    }
                }
            }
            if (!drain()) {
                return false;
            }
            if (merges_ == before) {
                return true;
            }
        }
    }

    int find(int n) {
        while (parent_[static_cast<std::size_t>(n)] != n) {
            auto& up = parent_[static_cast<std::size_t>(n)];
            up = parent_[static_cast<std::size_t>(up)];
            n = up;
        }
        return n;
    }

    int cell(int array, int side, int idx) {
        return cells_[static_cast<std::size_t>(find(array))][static_cast<std::size_t>(cls_[side][static_cast<std::size_t>(idx)])];
    }
    int cell_of_class(int array, int cls) { return cells_[static_cast<std::size_t>(find(array))][static_cast<std::size_t>(cls)]; }

    const Tag& tag(int n) { return tag_[static_cast<std::size_t>(find(n))]; }
    Level level(int n) const { return level_[static_cast<std::size_t>(n)]; }
    std::size_t size() const { return level_.size(); }

    std::vector<std::pair<lia::Expr, lia::Expr>> payload_eqs;

  private:
    void make_cells(int n) {
        Level inner = level_[static_cast<std::size_t>(n)] == Level::Mem ? Level::Obj : Level::Elem;
        int side = side_of(level_[static_cast<std::size_t>(n)]);
        std::vector<int> cs;
        for (int c = 0; c < ncls_[side]; ++c) {
            level_.push_back(inner);
            tag_.emplace_back();
            cells_.emplace_back();
            cs.push_back(static_cast<int>(level_.size()) - 1);
        }
        cells_[static_cast<std::size_t>(n)] = std::move(cs);
    }

    bool drain() {
        while (!queue_.empty()) {
            auto [a, b] = queue_.back();
            queue_.pop_back();
            int ra = find(a), rb = find(b);
            if (ra == rb) {
                continue;
            }
            ++merges_;
            parent_[static_cast<std::size_t>(rb)] = ra;
            Level l = level_[static_cast<std::size_t>(ra)];
            if (l == Level::Elem) {
                Tag& ta = tag_[static_cast<std::size_t>(ra)];
                const Tag& tb = tag_[static_cast<std::size_t>(rb)];
                if (tb.kind == Tag::Kind::None) {
                    continue;
                }
                if (ta.kind == Tag::Kind::None) {
                    ta = tb;
                    continue;
                }
                if (ta.kind != tb.kind || ta.name != tb.name) {
                    return false;
                }
                if (ta.kind == Tag::Kind::Fun && !(ta.payload == tb.payload)) {
                    payload_eqs.emplace_back(ta.payload, tb.payload);
                }
                continue;
            }
            const auto& ca = cells_[static_cast<std::size_t>(ra)];
            const auto& cb = cells_[static_cast<std::size_t>(rb)];
            for (std::size_t k = 0; k < ca.size(); ++k) {
                queue_.emplace_back(ca[k], cb[k]);
            }
        }
        return true;
    }

    const Problem& p_;
    const std::vector<int> (&cls_)[2];
    int ncls_[2];
    std::vector<Level> level_;
    std::vector<Tag> tag_;
    std::vector<std::vector<int>> cells_;
    std::vector<int> parent_;
    std::vector<std::pair<int, int>> queue_;
    std::size_t merges_ = 0;
};

enum class Must { Maybe, Equal, Differ };

class Search {
  public:
    Search(const Problem& p, const SolverOptions& opt) : p_(p), opt_(opt) {}

    SolverResult run() {
        if (p_.trivially_unsat) {
            return {Verdict::Unsat, std::nullopt, ""};
        }
        auto base = lia::solve(nvars(), p_.ints, opt_.lia);
        if (base.verdict == Verdict::Unsat) {
            trace("integer part unsat");
            return {Verdict::Unsat, std::nullopt, ""};
        }
        for (int side = 0; side < 2; ++side) {
            compute_must(side);
        }
        std::vector<int> cls[2];
        cls[0].assign(p_.idx[0].size(), -1);
        cls[1].assign(p_.idx[1].size(), -1);
        bool found = enumerate(0, 0, 0, cls);
        if (found) {
            return {Verdict::Sat, std::move(model_), ""};
        }
        if (capped_) {
            return {Verdict::Unknown, std::nullopt, "branch cap reached"};
        }
        if (!unknown_reason_.empty()) {
            return {Verdict::Unknown, std::nullopt, unknown_reason_};
        }
        return {Verdict::Unsat, std::nullopt, ""};
    }

    std::vector<Constraint> original; // for the final model check

  private:
    int nvars() const { return static_cast<int>(p_.int_names.size()); }

    void trace(const std::string& s) const {
        if (opt_.debug) {
            *opt_.debug << "  [solver] " << s << "\n";
        }
    }

    void compute_must(int side) {
        const auto& idx = p_.idx[side];
        must_[side].assign(idx.size(), std::vector<Must>(idx.size(), Must::Maybe));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = i + 1; j < idx.size(); ++j) {
                lia::Expr d = lia::minus(idx[i], idx[j]);
                Must m = Must::Maybe;
                if (d.terms.empty()) {
                    m = d.constant == 0 ? Must::Equal : Must::Differ;
                } else {
                    auto with = [&](lia::Kind k) {
                        auto cs = p_.ints;
                        cs.push_back({d, k});
                        return lia::solve(nvars(), std::move(cs), opt_.lia).verdict;
                    };
                    if (with(lia::Kind::Ne) == Verdict::Unsat) {
                        m = Must::Equal;
                    } else if (with(lia::Kind::Eq) == Verdict::Unsat) {
                        m = Must::Differ;
                    }
                }
                must_[side][i][j] = must_[side][j][i] = m;
            }
        }
    }

    /// Restricted-growth enumeration of index classes, memory side first.
    bool enumerate(int side, std::size_t pos, int used, std::vector<int> (&cls)[2]) {
        if (capped_) {
            return false;
        }
        if (pos == cls[side].size()) {
            ncls_[side] = used;
            if (side == 0) {
                return enumerate(1, 0, 0, cls);
            }
            return check(cls);
        }
        for (int c = 0; c <= used; ++c) {
            bool ok = true;
            for (std::size_t j = 0; j < pos && ok; ++j) {
                Must m = must_[side][pos][j];
                if (m == Must::Equal && cls[side][j] != c) {
                    ok = false;
                }
                if (m == Must::Differ && cls[side][j] == c) {
                    ok = false;
                }
            }
            if (!ok) {
                continue;
            }
            cls[side][pos] = c;
            if (enumerate(side, pos + 1, c == used ? used + 1 : used, cls)) {
                return true;
            }
        }
        cls[side][pos] = -1;
        return false;
    }

    bool check(const std::vector<int> (&cls)[2]) {
        if (++branches_ > opt_.branch_cap) {
            capped_ = true;
            return false;
        }
        Closure cc(p_, cls, ncls_);
        if (!cc.run()) {
            trace("branch: tag conflict");
            return false;
        }
        std::vector<lia::Con> cons = p_.ints;
        for (int side = 0; side < 2; ++side) {
            std::vector<int> rep(static_cast<std::size_t>(ncls_[side]), -1);
            for (std::size_t i = 0; i < cls[side].size(); ++i) {
                int c = cls[side][i];
                if (rep[static_cast<std::size_t>(c)] < 0) {
                    rep[static_cast<std::size_t>(c)] = static_cast<int>(i);
                } else {
                    cons.push_back({lia::minus(p_.idx[side][i], p_.idx[side][static_cast<std::size_t>(rep[static_cast<std::size_t>(c)])]), lia::Kind::Eq});
                }
            }
            for (std::size_t a = 0; a < rep.size(); ++a) {
                for (std::size_t b = a + 1; b < rep.size(); ++b) {
                    cons.push_back({lia::minus(p_.idx[side][static_cast<std::size_t>(rep[a])], p_.idx[side][static_cast<std::size_t>(rep[b])]), lia::Kind::Ne});
                }
            }
            reps_[side] = rep;
        }
        for (const auto& [a, b] : cc.payload_eqs) {
            cons.push_back({lia::minus(a, b), lia::Kind::Eq});
        }
        for (const auto& [a, b] : p_.elem_nes) {
            int ra = cc.find(a), rb = cc.find(b);
            if (ra == rb) {
                trace("branch: disequal elements merged");
                return false;
            }
            const Tag& ta = cc.tag(ra);
            const Tag& tb = cc.tag(rb);
            if (ta.kind == Tag::Kind::Sym && tb.kind == Tag::Kind::Sym && ta.name == tb.name) {
                trace("branch: disequal symbols coincide");
                return false;
            }
            if (ta.kind == Tag::Kind::Fun && tb.kind == Tag::Kind::Fun && ta.name == tb.name) {
                cons.push_back({lia::minus(ta.payload, tb.payload), lia::Kind::Ne});
            }
        }
        // layout: choices[k] lists alternative constraints, one of which must hold
        std::vector<std::vector<lia::Con>> choices;
        if (!opt_.layouts.empty() && !layout(cc, cls, cons, choices)) {
            trace("branch: layout conflict");
            return false;
        }
        return solve_choices(cc, cons, choices, 0);
    }

    lia::Expr slot_expr(int c) const { return p_.idx[1][static_cast<std::size_t>(reps_[1][static_cast<std::size_t>(c)])]; }

    bool layout(Closure& cc, const std::vector<int> (&cls)[2], std::vector<lia::Con>& cons,
                std::vector<std::vector<lia::Con>>& choices) {
        int zero = cls[1][static_cast<std::size_t>(p_.zero_slot)];
        std::set<int> seen;
        for (std::size_t n = 0; n < cc.size(); ++n) {
            if (cc.level(static_cast<int>(n)) != Level::Obj) {
                continue;
            }
            int root = cc.find(static_cast<int>(n));
            if (!seen.insert(root).second) {
                continue;
            }
            const Tag& head = cc.tag(cc.cell_of_class(root, zero));
            const std::vector<std::string>* fields = nullptr;
            if (head.kind == Tag::Kind::Sym) {
                auto it = opt_.layouts.find(head.name);
                if (it != opt_.layouts.end()) {
                    fields = &it->second;
                }
            }
            for (int c = 0; c < ncls_[1]; ++c) {
                const Tag& t = cc.tag(cc.cell_of_class(root, c));
                if (t.kind == Tag::Kind::Sym) {
                    cons.push_back({slot_expr(c), lia::Kind::Eq});
                } else if (t.kind == Tag::Kind::Fun) {
                    std::set<Int> allowed;
                    if (head.kind == Tag::Kind::Sym) {
                        if (fields) {
                            for (std::size_t k = 0; k < fields->size(); ++k) {
                                if ((*fields)[k] == t.name) {
                                    allowed.insert(static_cast<Int>(k) + 1);
                                }
                            }
                        }
                    } else {
                        allowed = Flattener::allowed_slots(opt_.layouts, t.name);
                    }
                    if (allowed.empty()) {
                        return false;
                    }
                    std::vector<lia::Con> alt;
                    for (Int v : allowed) {
                        alt.push_back({lia::minus(slot_expr(c), lia::const_expr(v)), lia::Kind::Eq});
                    }
                    if (alt.size() == 1) {
                        cons.push_back(alt[0]);
                    } else {
                        choices.push_back(std::move(alt));
                    }
                }
            }
        }
        return true;
    }

    bool solve_choices(Closure& cc, std::vector<lia::Con>& cons, const std::vector<std::vector<lia::Con>>& choices,
                       std::size_t k) {
        if (k == choices.size()) {
            auto r = lia::solve(nvars(), cons, opt_.lia);
            if (r.verdict == Verdict::Unknown) {
                unknown_reason_ = r.reason;
            }
            if (r.verdict != Verdict::Sat) {
                trace(std::string("branch: integers ") + to_string(r.verdict));
                return false;
            }
            Model m = build_model(cc, r.model);
            try {
                if (!holds(original, m)) {
                    unknown_reason_ = "model check failed";
                    trace("branch: model check failed");
                    return false;
                }
            } catch (const std::exception& e) {
                unknown_reason_ = std::string("model check failed: ") + e.what();
                return false;
            }
            model_ = std::move(m);
            trace("branch: sat");
            return true;
        }
        for (const auto& alt : choices[k]) {
            cons.push_back(alt);
            bool ok = solve_choices(cc, cons, choices, k + 1);
            cons.pop_back();
            if (ok) {
                return true;
            }
        }
        return false;
    }

    Model build_model(Closure& cc, const std::vector<Int>& ints) {
        auto ev = [&](const lia::Expr& e) { return lia::detail::eval(e, ints); };
        std::vector<Int> slot_val(static_cast<std::size_t>(ncls_[1]));
        std::vector<Int> loc_val(static_cast<std::size_t>(ncls_[0]));
        for (int c = 0; c < ncls_[1]; ++c) {
            slot_val[static_cast<std::size_t>(c)] = ev(slot_expr(c));
        }
        for (int c = 0; c < ncls_[0]; ++c) {
            loc_val[static_cast<std::size_t>(c)] = ev(p_.idx[0][static_cast<std::size_t>(reps_[0][static_cast<std::size_t>(c)])]);
        }
        const ElemVal fallback = ElemVal::opaque(-1);
        auto elem = [&](int n) {
            int r = cc.find(n);
            const Tag& t = cc.tag(r);
            switch (t.kind) {
            case Tag::Kind::Sym: return ElemVal::sym(t.name);
            case Tag::Kind::Fun: return ElemVal::fun(t.name, ev(t.payload));
            default: return ElemVal::opaque(r);
            }
        };
        auto obj = [&](int n) {
            ObjVal o{{}, fallback};
            for (int c = 0; c < ncls_[1]; ++c) {
                o = o.store(slot_val[static_cast<std::size_t>(c)], elem(cc.cell_of_class(n, c)));
            }
            return o;
        };
        auto mem = [&](int n) {
            MemVal m{{}, ObjVal{{}, fallback}};
            for (int c = 0; c < ncls_[0]; ++c) {
                m = m.store(loc_val[static_cast<std::size_t>(c)], obj(cc.cell_of_class(n, c)));
            }
            return m;
        };
        Model out;
        for (const auto& [name, sort] : p_.var_sorts) {
            switch (sort) {
            case Sort::Int: out.values[name] = ints[static_cast<std::size_t>(p_.int_ids.at(name))]; break;
            case Sort::Elem: out.values[name] = elem(p_.var_nodes.at(name)); break;
            case Sort::Obj: out.values[name] = obj(p_.var_nodes.at(name)); break;
            case Sort::Mem: out.values[name] = mem(p_.var_nodes.at(name)); break;
            case Sort::MemPair:
                out.values[name] =
                    MemPairVal{mem(p_.var_nodes.at(name + "#a")), ints[static_cast<std::size_t>(p_.int_ids.at(name + "#i"))]};
                break;
            }
        }
        return out;
    }

    const Problem& p_;
    const SolverOptions& opt_;
    std::vector<std::vector<Must>> must_[2];
    int ncls_[2] = {0, 0};
    std::vector<int> reps_[2];
    std::size_t branches_ = 0;
    bool capped_ = false;
    std::string unknown_reason_;
    Model model_;
};

inline std::pair<Term, Term> pair_parts(const Term& t) {
    if (t->kind == TermKind::Pair) {
        return {t->args[0], t->args[1]};
    }
    return {term::var(t->name + "#a", Sort::Mem), term::ivar(t->name + "#i")};
}

} // namespace detail::arrays

inline SolverResult satisfiable(const std::vector<Constraint>& constraints, const SolverOptions& options = {}) {
    using namespace detail::arrays;
    // a memory-pair disequality is a disjunction over its two components
    for (std::size_t k = 0; k < constraints.size(); ++k) {
        const Constraint& c = constraints[k];
        if (c.lhs->sort == Sort::MemPair && c.rel == Rel::Ne) {
            auto [a1, i1] = pair_parts(c.lhs);
            auto [a2, i2] = pair_parts(c.rhs);
            bool unknown = false;
            std::string reason;
            for (const Constraint& alt : {ne(a1, a2), ne(i1, i2)}) {
                auto cs = constraints;
                cs[k] = alt;
                auto r = satisfiable(cs, options);
                if (r.verdict == Verdict::Sat) {
                    // report the pair variable itself rather than its parts
                    for (const auto& t : {c.lhs, c.rhs}) {
                        if (t->kind == TermKind::Var && r.model) {
                            auto pa = r.model->values.find(t->name + "#a");
                            auto pi = r.model->values.find(t->name + "#i");
                            if (pa != r.model->values.end() && pi != r.model->values.end()) {
                                r.model->values[t->name] = MemPairVal{std::get<MemVal>(pa->second), std::get<Int>(pi->second)};
                            }
                        }
                    }
                    return r;
                }
                if (r.verdict == Verdict::Unknown) {
                    unknown = true;
                    reason = r.reason;
                }
            }
            return {unknown ? Verdict::Unknown : Verdict::Unsat, std::nullopt, reason};
        }
    }
    Problem p;
    Flattener f(p, options.layouts);
    for (const auto& c : constraints) {
        f.constraint(c);
    }
    Search s(p, options);
    s.original = constraints;
    return s.run();
}

enum class Tri { True, False, Unknown };

inline const char* to_string(Tri t) {
    switch (t) {
    case Tri::True: return "true";
    case Tri::False: return "false";
    case Tri::Unknown: return "unknown";
    }
    return "?";
}

/// constraints |= goal, decided as unsatisfiability of constraints + not(goal).
inline Tri entails(const std::vector<Constraint>& constraints, const Constraint& goal, const SolverOptions& options = {}) {
    if (goal.lhs->sort == Sort::MemPair && goal.rel == Rel::Eq) {
        auto [a1, i1] = detail::arrays::pair_parts(goal.lhs);
        auto [a2, i2] = detail::arrays::pair_parts(goal.rhs);
        Tri x = entails(constraints, eq(a1, a2), options);
        if (x == Tri::False) {
            return x;
        }
        Tri y = entails(constraints, eq(i1, i2), options);
        return x == Tri::True ? y : (y == Tri::False ? Tri::False : Tri::Unknown);
    }
    auto cs = constraints;
    cs.push_back(negate(goal));
    auto r = satisfiable(cs, options);
    switch (r.verdict) {
    case Verdict::Unsat: return Tri::True;
    case Verdict::Sat: return Tri::False;
    default: return Tri::Unknown;
    }
}

inline Tri entails_all(const std::vector<Constraint>& constraints, const std::vector<Constraint>& goals,
                       const SolverOptions& options = {}) {
    Tri out = Tri::True;
    for (const auto& g : goals) {
        Tri t = entails(constraints, g, options);
        if (t == Tri::False) {
            return t;
        }
        if (t == Tri::Unknown) {
            out = Tri::Unknown;
        }
    }
    return out;
}

} // namespace dalnot
