#pragma once

// Dalvik-subset program model: the ten-instruction language, classes with a
// single-inheritance hierarchy, and globally numbered program points.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace dalnot {

using Int = std::int64_t;
using Point = int;

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
  public:
    ParseError(const std::string& what, int line, int column)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what), line_(line), column_(column) {}
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return column_; }

  private:
    int line_;
    int column_;
};

/// Semantic error in an otherwise well-formed program (bad jump, unknown class, ...).
class ProgramError : public Error {
  public:
    using Error::Error;
};

/// Methods are matched by name and parameter count; every method is void.
struct Signature {
    std::string name;
    int param_count = 0;
    bool returns_void = true;

    auto operator<=>(const Signature&) const = default;
    [[nodiscard]] std::string str() const { return name + "/" + std::to_string(param_count); }
};

/// Method reference as written at a call site. The class part is informational;
/// dispatch always starts from the receiver's dynamic class.
struct MethodRef {
    std::string cls;
    Signature sig;

    bool operator==(const MethodRef&) const = default;
    [[nodiscard]] std::string str() const { return cls + "." + sig.str(); }
};

namespace ins {
struct Const {
    int dst;
    Int value;
    bool operator==(const Const&) const = default;
};
struct Move {
    int dst;
    int src;
    bool operator==(const Move&) const = default;
};
struct Add {
    int dst;
    int src;
    Int value;
    bool operator==(const Add&) const = default;
};
struct IfLt {
    int lhs;
    int rhs;
    Point target;
    bool operator==(const IfLt&) const = default;
};
struct Goto {
    Point target;
    bool operator==(const Goto&) const = default;
};
struct Invoke {
    std::vector<int> args; // args[0] is the receiver
    MethodRef method;
    bool operator==(const Invoke&) const = default;
};
struct Return {
    bool operator==(const Return&) const = default;
};
struct NewInstance {
    int dst;
    std::string cls;
    bool operator==(const NewInstance&) const = default;
};
struct Iget {
    int dst;
    int obj;
    std::string field;
    bool operator==(const Iget&) const = default;
};
struct Iput {
    int src;
    int obj;
    std::string field;
    bool operator==(const Iput&) const = default;
};
} // namespace ins

using Instruction = std::variant<ins::Const, ins::Move, ins::Add, ins::IfLt, ins::Goto, ins::Invoke, ins::Return,
                                 ins::NewInstance, ins::Iget, ins::Iput>;

struct MethodDef {
    std::string cls;
    Signature sig;
    int registers = 0;
    Point entry = 0;
    std::vector<Instruction> body; // body[k] sits at point entry + k
    bool implicit = false;         // synthesized <init>

    bool operator==(const MethodDef&) const = default;
    [[nodiscard]] Point last_point() const { return entry + static_cast<Point>(body.size()) - 1; }
    [[nodiscard]] bool contains(Point q) const { return q >= entry && q <= last_point(); }
    [[nodiscard]] std::string qualified_name() const { return cls + "." + sig.name; }
};

struct ClassDef {
    std::string name;
    std::optional<std::string> superclass;
    std::vector<std::string> fields; // own fields, declaration order
    std::vector<MethodDef> methods;

    bool operator==(const ClassDef&) const = default;
};

inline std::string format_instruction(const Instruction& instruction) {
    std::ostringstream out;
    std::visit(
        [&](const auto& i) {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, ins::Const>) {
                out << "const v" << i.dst << ", " << i.value;
            } else if constexpr (std::is_same_v<T, ins::Move>) {
                out << "move v" << i.dst << ", v" << i.src;
            } else if constexpr (std::is_same_v<T, ins::Add>) {
                out << "add v" << i.dst << ", v" << i.src << ", " << i.value;
            } else if constexpr (std::is_same_v<T, ins::IfLt>) {
                out << "if-lt v" << i.lhs << ", v" << i.rhs << ", " << i.target;
            } else if constexpr (std::is_same_v<T, ins::Goto>) {
                out << "goto " << i.target;
            } else if constexpr (std::is_same_v<T, ins::Invoke>) {
                out << "invoke";
                for (int r : i.args) {
                    out << " v" << r;
                }
                out << ", " << i.method.str();
            } else if constexpr (std::is_same_v<T, ins::Return>) {
                out << "return";
            } else if constexpr (std::is_same_v<T, ins::NewInstance>) {
                out << "new-instance v" << i.dst << ", " << i.cls;
            } else if constexpr (std::is_same_v<T, ins::Iget>) {
                out << "iget v" << i.dst << ", v" << i.obj << ", " << i.field;
            } else {
                out << "iput v" << i.src << ", v" << i.obj << ", " << i.field;
            }
        },
        instruction);
    return out.str();
}

/// An immutable, validated Dalvik-subset program.
class Program {
  public:
    Program() = default;

    /// Validates and indexes the classes. Synthesizes a `<init>/0` for every
    /// class lacking one, placed after the highest explicit program point.
    explicit Program(std::vector<ClassDef> classes) : classes_(std::move(classes)) {
        add_implicit_constructors();
        index();
        validate();
    }

    [[nodiscard]] const std::vector<ClassDef>& classes() const { return classes_; }
    [[nodiscard]] bool empty() const { return by_point_.empty(); }

    [[nodiscard]] const ClassDef* find_class(std::string_view name) const {
        for (const auto& c : classes_) {
            if (c.name == name) {
                return &c;
            }
        }
        return nullptr;
    }

    [[nodiscard]] const ClassDef& get_class(std::string_view name) const {
        const ClassDef* c = find_class(name);
        if (!c) {
            throw ProgramError("unknown class " + std::string(name));
        }
        return *c;
    }

    /// Superclass fields first, then own fields, each in declaration order.
    [[nodiscard]] std::vector<std::string> flatten_layout(std::string_view cls) const {
        std::vector<const ClassDef*> chain;
        for (const ClassDef* c = &get_class(cls); c;) {
            chain.push_back(c);
            c = c->superclass ? find_class(*c->superclass) : nullptr;
        }
        std::vector<std::string> layout;
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            layout.insert(layout.end(), (*it)->fields.begin(), (*it)->fields.end());
        }
        return layout;
    }

    /// All methods whose signature equals `sig`, in class/method declaration order.
    [[nodiscard]] std::vector<const MethodDef*> sign(const Signature& sig) const {
        std::vector<const MethodDef*> out;
        for (const auto& c : classes_) {
            for (const auto& m : c.methods) {
                if (m.sig == sig) {
                    out.push_back(&m);
                }
            }
        }
        return out;
    }

    /// Dynamic dispatch: the closest definition of `sig` walking up from `cls`.
    [[nodiscard]] const MethodDef* lookup(std::string_view cls, const Signature& sig) const {
        for (const ClassDef* c = find_class(cls); c;) {
            for (const auto& m : c->methods) {
                if (m.sig == sig) {
                    return &m;
                }
            }
            c = c->superclass ? find_class(*c->superclass) : nullptr;
        }
        return nullptr;
    }

    [[nodiscard]] const MethodDef* method_at(Point q) const {
        auto it = by_point_.find(q);
        return it == by_point_.end() ? nullptr : it->second;
    }

    [[nodiscard]] const Instruction& instruction_at(Point q) const {
        const MethodDef* m = method_at(q);
        if (!m) {
            throw ProgramError("no instruction at point " + std::to_string(q));
        }
        return m->body[static_cast<std::size_t>(q - m->entry)];
    }

    [[nodiscard]] std::vector<Point> points() const {
        std::vector<Point> out;
        for (const auto& [q, m] : by_point_) {
            out.push_back(q);
        }
        return out;
    }

    [[nodiscard]] std::vector<const MethodDef*> methods() const {
        std::vector<const MethodDef*> out;
        for (const auto& c : classes_) {
            for (const auto& m : c.methods) {
                out.push_back(&m);
            }
        }
        return out;
    }

    /// Finds a method by `name` or `Class.name`; throws if absent or ambiguous.
    [[nodiscard]] const MethodDef& find_method(std::string_view spec) const {
        std::string cls;
        std::string name(spec);
        if (auto dot = spec.rfind('.'); dot != std::string_view::npos) {
            cls = std::string(spec.substr(0, dot));
            name = std::string(spec.substr(dot + 1));
        }
        const MethodDef* found = nullptr;
        for (const MethodDef* m : methods()) {
            if (m->sig.name == name && (cls.empty() || m->cls == cls)) {
                if (found) {
                    throw ProgramError("ambiguous method " + std::string(spec));
                }
                found = m;
            }
        }
        if (!found) {
            throw ProgramError("unknown method " + std::string(spec));
        }
        return *found;
    }

    /// Integer literals occurring in const/add instructions, sorted, deduplicated.
    [[nodiscard]] std::vector<Int> literals() const {
        std::set<Int> out;
        for (const MethodDef* m : methods()) {
            for (const auto& i : m->body) {
                if (const auto* c = std::get_if<ins::Const>(&i)) {
                    out.insert(c->value);
                }
            }
        }
        return {out.begin(), out.end()};
    }

    bool operator==(const Program& other) const { return classes_ == other.classes_; }

  private:
    void add_implicit_constructors() {
        Point next = 0;
        for (const auto& c : classes_) {
            for (const auto& m : c.methods) {
                if (!m.body.empty()) {
                    next = std::max(next, m.last_point() + 1);
                }
            }
        }
        const Signature init{"<init>", 0, true};
        for (auto& c : classes_) {
            bool has_init = std::any_of(c.methods.begin(), c.methods.end(), [&](const MethodDef& m) { return m.sig == init; });
            if (!has_init) {
                c.methods.push_back(MethodDef{c.name, init, 1, next++, {ins::Return{}}, true});
            }
        }
    }

    void index() {
        for (const auto& c : classes_) {
            for (const auto& m : c.methods) {
                if (m.body.empty()) {
                    throw ProgramError("method " + m.qualified_name() + " has no instructions");
                }
                for (Point q = m.entry; q <= m.last_point(); ++q) {
                    if (!by_point_.emplace(q, &m).second) {
                        throw ProgramError("program point " + std::to_string(q) + " defined twice");
                    }
                }
            }
        }
    }

    void validate() const {
        std::set<std::string> names;
        for (const auto& c : classes_) {
            if (!names.insert(c.name).second) {
                throw ProgramError("class " + c.name + " defined twice");
            }
        }
        for (const auto& c : classes_) {
            if (c.superclass && !find_class(*c.superclass)) {
                throw ProgramError("unknown superclass " + *c.superclass + " of " + c.name);
            }
        }
        std::set<std::string> all_fields;
        for (const auto& c : classes_) {
            std::set<std::string> seen{c.name};
            for (const ClassDef* s = &c; s->superclass;) {
                if (!seen.insert(*s->superclass).second) {
                    throw ProgramError("cyclic superclass chain at " + c.name);
                }
                s = find_class(*s->superclass);
            }
            auto layout = flatten_layout(c.name);
            if (std::set<std::string>(layout.begin(), layout.end()).size() != layout.size()) {
                throw ProgramError("duplicate field in layout of " + c.name);
            }
            all_fields.insert(c.fields.begin(), c.fields.end());
            std::set<Signature> sigs;
            for (const auto& m : c.methods) {
                if (!sigs.insert(m.sig).second) {
                    throw ProgramError("method " + m.qualified_name() + " defined twice");
                }
            }
        }
        for (const auto& c : classes_) {
            for (const auto& m : c.methods) {
                validate_method(m, all_fields);
            }
        }
    }

    void validate_method(const MethodDef& m, const std::set<std::string>& all_fields) const {
        const std::string where = m.qualified_name();
        if (m.registers < 1 + m.sig.param_count) {
            throw ProgramError(where + ": needs at least " + std::to_string(1 + m.sig.param_count) + " registers");
        }
        auto reg = [&](int r, Point q) {
            if (r < 0 || r >= m.registers) {
                throw ProgramError(where + " at " + std::to_string(q) + ": register v" + std::to_string(r) +
                                   " out of range");
            }
        };
        auto target = [&](Point t, Point q) {
            if (!m.contains(t)) {
                throw ProgramError(where + " at " + std::to_string(q) + ": jump to nonexistent point " +
                                   std::to_string(t));
            }
        };
        auto field = [&](const std::string& f, Point q) {
            if (!all_fields.count(f)) {
                throw ProgramError(where + " at " + std::to_string(q) + ": unknown field " + f);
            }
        };
        for (Point q = m.entry; q <= m.last_point(); ++q) {
            const Instruction& i = m.body[static_cast<std::size_t>(q - m.entry)];
            bool falls_through = true;
            std::visit(
                [&](const auto& x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, ins::Const>) {
                        reg(x.dst, q);
                    } else if constexpr (std::is_same_v<T, ins::Move>) {
                        reg(x.dst, q);
                        reg(x.src, q);
                    } else if constexpr (std::is_same_v<T, ins::Add>) {
                        reg(x.dst, q);
                        reg(x.src, q);
                    } else if constexpr (std::is_same_v<T, ins::IfLt>) {
                        reg(x.lhs, q);
                        reg(x.rhs, q);
                        target(x.target, q);
                    } else if constexpr (std::is_same_v<T, ins::Goto>) {
                        target(x.target, q);
                        falls_through = false;
                    } else if constexpr (std::is_same_v<T, ins::Invoke>) {
                        for (int r : x.args) {
                            reg(r, q);
                        }
                        if (static_cast<int>(x.args.size()) != x.method.sig.param_count + 1) {
                            throw ProgramError(where + " at " + std::to_string(q) + ": invoke of " + x.method.str() +
                                               " passes " + std::to_string(x.args.size()) + " registers");
                        }
                    } else if constexpr (std::is_same_v<T, ins::Return>) {
                        falls_through = false;
                    } else if constexpr (std::is_same_v<T, ins::NewInstance>) {
                        reg(x.dst, q);
                        if (!find_class(x.cls)) {
                            throw ProgramError(where + " at " + std::to_string(q) + ": unknown class " + x.cls);
                        }
                    } else if constexpr (std::is_same_v<T, ins::Iget>) {
                        reg(x.dst, q);
                        reg(x.obj, q);
                        field(x.field, q);
                    } else {
                        reg(x.src, q);
                        reg(x.obj, q);
                        field(x.field, q);
                    }
                },
                i);
            if (falls_through && q == m.last_point()) {
                throw ProgramError(where + ": control falls off the end at point " + std::to_string(q));
            }
        }
    }

    std::vector<ClassDef> classes_;
    std::map<Point, const MethodDef*> by_point_;

  public:
    // by_point_ points into classes_, so copies re-index.
    Program(const Program& other) : classes_(other.classes_) { index(); }
    Program& operator=(const Program& other) {
        if (this != &other) {
            classes_ = other.classes_;
            by_point_.clear();
            index();
        }
        return *this;
    }
    Program(Program&& other) noexcept : classes_(std::move(other.classes_)), by_point_(std::move(other.by_point_)) {}
    Program& operator=(Program&& other) noexcept {
        classes_ = std::move(other.classes_);
        by_point_ = std::move(other.by_point_);
        return *this;
    }
};

namespace detail {

struct Token {
    enum class Kind { Word, Punct, End } kind;
    std::string text;
    int line;
    int column;
};

class Lexer {
  public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokenize() {
        std::vector<Token> out;
        while (true) {
            skip_space();
            if (pos_ >= text_.size()) {
                out.push_back({Token::Kind::End, "", line_, col_});
                return out;
            }
            char c = text_[pos_];
            int line = line_;
            int col = col_;
            if (std::string_view("{}();:,").find(c) != std::string_view::npos) {
                advance();
                out.push_back({Token::Kind::Punct, std::string(1, c), line, col});
                continue;
            }
            std::string word;
            while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
                   std::string_view("{}();:,#").find(text_[pos_]) == std::string_view::npos &&
                   !(text_[pos_] == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/')) {
                word += text_[pos_];
                advance();
            }
            if (word.empty()) {
                throw ParseError(std::string("unexpected character '") + c + "'", line, col);
            }
            out.push_back({Token::Kind::Word, word, line, col});
        }
    }

  private:
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#' || (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/')) {
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    advance();
                }
            } else {
                return;
            }
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

inline std::optional<Int> parse_int(std::string_view s) {
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        s.remove_prefix(2);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    Int value = 0;
    for (char c : s) {
        int digit;
        if (c >= '0' && c <= '9') {
            digit = c - '0';
        } else if (base == 16 && std::isxdigit(static_cast<unsigned char>(c))) {
            digit = std::tolower(static_cast<unsigned char>(c)) - 'a' + 10;
        } else {
            return std::nullopt;
        }
        value = value * base + digit;
    }
    return neg ? -value : value;
}

class ProgramParser {
  public:
    explicit ProgramParser(std::string_view text) : tokens_(Lexer(text).tokenize()) {}

    std::vector<ClassDef> parse() {
        std::vector<ClassDef> classes;
        while (peek().kind != Token::Kind::End) {
            classes.push_back(parse_class());
        }
        return classes;
    }

  private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() {
        const Token& t = tokens_[pos_];
        if (t.kind != Token::Kind::End) {
            ++pos_;
        }
        return t;
    }
    [[noreturn]] void fail(const std::string& what, const Token& at) const {
        throw ParseError(what + (at.kind == Token::Kind::End ? " at end of input" : " near '" + at.text + "'"),
                         at.line, at.column);
    }
    bool is(std::string_view text) const { return peek().text == text && peek().kind != Token::Kind::End; }
    void expect(std::string_view text) {
        if (!is(text)) {
            fail("expected '" + std::string(text) + "'", peek());
        }
        next();
    }
    bool accept(std::string_view text) {
        if (is(text)) {
            next();
            return true;
        }
        return false;
    }
    std::string word(const char* what) {
        const Token& t = next();
        if (t.kind != Token::Kind::Word) {
            fail(std::string("expected ") + what, t);
        }
        return t.text;
    }
    Int integer(const char* what) {
        const Token& t = next();
        auto v = t.kind == Token::Kind::Word ? parse_int(t.text) : std::nullopt;
        if (!v) {
            fail(std::string("expected ") + what, t);
        }
        return *v;
    }
    int reg() {
        const Token& t = next();
        std::string_view s = t.text;
        if (t.kind == Token::Kind::Word && !s.empty() && (s[0] == 'v' || s[0] == 'r')) {
            s.remove_prefix(1);
        }
        auto v = t.kind == Token::Kind::Word ? parse_int(s) : std::nullopt;
        if (!v || *v < 0) {
            fail("expected register", t);
        }
        return static_cast<int>(*v);
    }
    bool looks_like_register() const {
        if (peek().kind != Token::Kind::Word) {
            return false;
        }
        std::string_view s = peek().text;
        if (!s.empty() && (s[0] == 'v' || s[0] == 'r')) {
            s.remove_prefix(1);
        }
        return parse_int(s).has_value();
    }

    ClassDef parse_class() {
        expect("class");
        ClassDef c;
        c.name = word("class name");
        if (accept("extends")) {
            c.superclass = word("superclass name");
        }
        expect("{");
        while (!accept("}")) {
            if (accept("field")) {
                c.fields.push_back(word("field name"));
                accept(";");
            } else if (is("method")) {
                c.methods.push_back(parse_method(c.name));
            } else {
                fail("expected 'field', 'method' or '}'", peek());
            }
        }
        return c;
    }

    MethodDef parse_method(const std::string& cls) {
        expect("method");
        MethodDef m;
        m.cls = cls;
        m.sig.name = word("method name");
        expect("(");
        m.sig.param_count = static_cast<int>(integer("parameter count"));
        expect(")");
        expect("registers");
        m.registers = static_cast<int>(integer("register count"));
        expect("{");
        std::optional<Point> prev;
        while (!accept("}")) {
            const Token& label = peek();
            auto q = static_cast<Point>(integer("program point label"));
            expect(":");
            if (!prev) {
                m.entry = q;
            } else if (q != *prev + 1) {
                fail("program point labels must be consecutive within a method", label);
            }
            prev = q;
            m.body.push_back(parse_instruction());
        }
        if (m.body.empty()) {
            fail("method without instructions", peek());
        }
        return m;
    }

    Instruction parse_instruction() {
        const Token& op_token = peek();
        std::string op = word("instruction");
        auto base = op.substr(0, op.find('/'));
        if (base == "const") {
            int d = reg();
            expect(",");
            return ins::Const{d, integer("constant")};
        }
        if (base == "move" || base == "move-object") {
            int d = reg();
            expect(",");
            return ins::Move{d, reg()};
        }
        if (base == "add" || base == "add-int") {
            int d = reg();
            expect(",");
            int s = reg();
            expect(",");
            return ins::Add{d, s, integer("literal")};
        }
        if (base == "if-lt") {
            int i = reg();
            expect(",");
            int j = reg();
            expect(",");
            return ins::IfLt{i, j, static_cast<Point>(integer("jump target"))};
        }
        if (base == "goto") {
            return ins::Goto{static_cast<Point>(integer("jump target"))};
        }
        if (base == "invoke" || base == "invoke-virtual" || base == "invoke-direct") {
            ins::Invoke call;
            accept("{");
            while (looks_like_register()) {
                call.args.push_back(reg());
                accept(",");
            }
            accept("}");
            accept(",");
            const Token& ref_token = peek();
            call.method = parse_method_ref(word("method reference"), ref_token);
            if (call.args.empty()) {
                fail("invoke needs a receiver register", ref_token);
            }
            return call;
        }
        if (base == "return" || base == "return-void") {
            return ins::Return{};
        }
        if (base == "new-instance") {
            int d = reg();
            expect(",");
            return ins::NewInstance{d, word("class name")};
        }
        if (base == "iget" || base == "iget-object" || base == "iput" || base == "iput-object") {
            int a = reg();
            expect(",");
            int o = reg();
            expect(",");
            std::string f = word("field name");
            if (auto dot = f.rfind('.'); dot != std::string::npos) {
                f = f.substr(dot + 1);
            }
            if (base[1] == 'g') {
                return ins::Iget{a, o, f};
            }
            return ins::Iput{a, o, f};
        }
        fail("unknown instruction", op_token);
    }

    MethodRef parse_method_ref(const std::string& text, const Token& at) {
        auto slash = text.rfind('/');
        auto dot = text.rfind('.', slash);
        if (slash == std::string::npos || dot == std::string::npos || dot == 0 || slash < dot + 2) {
            fail("method reference must look like Class.name/argcount", at);
        }
        auto argc = parse_int(std::string_view(text).substr(slash + 1));
        if (!argc || *argc < 0) {
            fail("bad argument count in method reference", at);
        }
        return MethodRef{text.substr(0, dot), Signature{text.substr(dot + 1, slash - dot - 1), static_cast<int>(*argc), true}};
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Program parse_program(std::string_view text) { return Program(detail::ProgramParser(text).parse()); }

/// Source text that parses back to an equal program. Implicit constructors are omitted.
inline std::string print_program(const Program& program) {
    std::ostringstream out;
    for (const auto& c : program.classes()) {
        out << "class " << c.name;
        if (c.superclass) {
            out << " extends " << *c.superclass;
        }
        out << " {\n";
        for (const auto& f : c.fields) {
            out << "  field " << f << ";\n";
        }
        for (const auto& m : c.methods) {
            if (m.implicit) {
                continue;
            }
            out << "  method " << m.sig.name << "(" << m.sig.param_count << ") registers " << m.registers << " {\n";
            for (std::size_t k = 0; k < m.body.size(); ++k) {
                out << "    " << m.entry + static_cast<Point>(k) << ": " << format_instruction(m.body[k]) << "\n";
            }
            out << "  }\n";
        }
        out << "}\n";
    }
    return out.str();
}

} // namespace dalnot
