// SPDX-License-Identifier: Apache-2.0
#include "tir/interpreter.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace tir {

namespace {

namespace mp = boost::multiprecision;
using Int = mp::cpp_int;
using Rational = mp::cpp_rational;

constexpr unsigned kMaxBits = 65536;
constexpr std::size_t kMaxString = 1u << 20;
constexpr std::size_t kMaxOutput = 1u << 20;

struct Failure {
    std::string message;
};

[[noreturn]] void raise(std::string kind, const std::string& detail) {
    throw Failure{std::move(kind) + ": " + detail};
}

// ---------------------------------------------------------------------------
// values

struct None {
    bool operator==(const None&) const = default;
};

using Value = std::variant<None, bool, Rational, double, std::string>;

std::string type_name(const Value& v) {
    switch (v.index()) {
        case 0: return "NoneType";
        case 1: return "bool";
        case 2: return mp::denominator(std::get<Rational>(v)) == 1 ? "int" : "rational";
        case 3: return "float";
        default: return "str";
    }
}

bool is_numeric(const Value& v) {
    return std::holds_alternative<bool>(v) || std::holds_alternative<Rational>(v) || std::holds_alternative<double>(v);
}

Rational as_exact(const Value& v) {
    if (const auto* b = std::get_if<bool>(&v)) return Rational(*b ? 1 : 0);
    return std::get<Rational>(v);
}

double as_double(const Value& v) {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    return as_exact(v).convert_to<double>();
}

bool is_integer(const Rational& q) {
    return mp::denominator(q) == 1;
}

void check_size(const Rational& q) {
    const Int& n = mp::numerator(q);
    const Int& d = mp::denominator(q);
    if ((n != 0 && mp::msb(mp::abs(n)) > kMaxBits) || mp::msb(d) > kMaxBits) {
        raise("OverflowError", "integer too large");
    }
}

Value exact(Rational q) {
    check_size(q);
    return Value(std::move(q));
}

Value real(double d) {
    return Value(d);
}

Int floor_div(const Int& n, const Int& d) {
    Int q = n / d;
    if ((n % d != 0) && ((n < 0) != (d < 0))) --q;
    return q;
}

Rational floor_of(const Rational& q) {
    return Rational(floor_div(mp::numerator(q), mp::denominator(q)));
}

bool truthy(const Value& v) {
    switch (v.index()) {
        case 0: return false;
        case 1: return std::get<bool>(v);
        case 2: return std::get<Rational>(v) != 0;
        case 3: return std::get<double>(v) != 0.0;
        default: return !std::get<std::string>(v).empty();
    }
}

/// Shortest round-trip repr with Python's float layout rules.
std::string format_double(double d) {
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    if (d == 0.0) return std::signbit(d) ? "-0.0" : "0.0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d, std::chars_format::scientific);
    std::string sci(buf, res.ptr);
    // sci looks like [-]D[.DDD]e[+-]XX
    const bool neg = sci[0] == '-';
    if (neg) sci.erase(0, 1);
    const auto epos = sci.find('e');
    const int exp10 = std::stoi(sci.substr(epos + 1));
    std::string digits = sci.substr(0, epos);
    if (digits.size() > 1) digits.erase(1, 1);  // drop '.'
    std::string out;
    if (exp10 >= -4 && exp10 < 16) {
        if (exp10 < 0) {
            out = "0." + std::string(static_cast<std::size_t>(-exp10 - 1), '0') + digits;
        } else if (static_cast<std::size_t>(exp10) + 1 >= digits.size()) {
            out = digits + std::string(static_cast<std::size_t>(exp10) + 1 - digits.size(), '0') + ".0";
        } else {
            out = digits.substr(0, static_cast<std::size_t>(exp10) + 1) + "." +
                  digits.substr(static_cast<std::size_t>(exp10) + 1);
        }
    } else {
        out = digits.substr(0, 1);
        if (digits.size() > 1) out += "." + digits.substr(1);
        out += exp10 < 0 ? "e-" : "e+";
        const int a = std::abs(exp10);
        if (a < 10) out += "0";
        out += std::to_string(a);
    }
    return neg ? "-" + out : out;
}

std::string to_display(const Value& v) {
    switch (v.index()) {
        case 0: return "None";
        case 1: return std::get<bool>(v) ? "True" : "False";
        case 2: {
            const auto& q = std::get<Rational>(v);
            if (is_integer(q)) return mp::numerator(q).str();
            return mp::numerator(q).str() + "/" + mp::denominator(q).str();
        }
        case 3: return format_double(std::get<double>(v));
        default: return std::get<std::string>(v);
    }
}

// ---------------------------------------------------------------------------
// lexer

enum class Tok { Number, String, Name, Op, Newline, Indent, Dedent, End };

struct Token {
    Tok kind;
    std::string text;
    int line;
};

[[noreturn]] void syntax_error(const std::string& msg, int line) {
    raise("SyntaxError", msg + " (line " + std::to_string(line) + ")");
}

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::vector<std::size_t> indents{0};
    int line = 1;
    int depth = 0;  // bracket nesting; newlines inside brackets are ignored
    std::size_t i = 0;
    bool at_line_start = true;

    static const std::vector<std::string_view> ops = {"**=", "//=", "**", "//", "==", "!=", "<=", ">=", "+=", "-=",
                                                      "*=",  "/=",  "%=", "+",  "-",  "*",  "/",  "%",  "<",  ">",
                                                      "=",   "(",   ")",  ",",  ":",  ";",  "."};

    while (i < src.size()) {
        if (at_line_start && depth == 0) {
            std::size_t width = 0;
            std::size_t j = i;
            while (j < src.size() && (src[j] == ' ' || src[j] == '\t')) {
                width += src[j] == '\t' ? 8 - (width % 8) : 1;
                ++j;
            }
            if (j < src.size() && (src[j] == '\n' || src[j] == '\r' || src[j] == '#')) {
                // blank or comment-only line
                while (j < src.size() && src[j] != '\n') ++j;
                i = j;
                if (i < src.size()) {
                    ++i;
                    ++line;
                }
                continue;
            }
            if (j >= src.size()) {
                i = j;
                break;
            }
            if (width > indents.back()) {
                indents.push_back(width);
                out.push_back({Tok::Indent, "", line});
            } else {
                while (width < indents.back()) {
                    indents.pop_back();
                    out.push_back({Tok::Dedent, "", line});
                }
                if (width != indents.back()) syntax_error("inconsistent indentation", line);
            }
            i = j;
            at_line_start = false;
        }
        const char c = src[i];
        if (c == '\n') {
            if (depth == 0) {
                out.push_back({Tok::Newline, "", line});
                at_line_start = true;
            }
            ++line;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
            i += 2;
            ++line;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            if (j < src.size() && ident_char(src[j])) syntax_error("invalid number literal", line);
            out.push_back({Tok::Number, std::string(src.substr(i, j - i)), line});
            i = j;
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            out.push_back({Tok::Name, std::string(src.substr(i, j - i)), line});
            i = j;
            continue;
        }
        if (c == '"' || c == '\'') {
            std::string s;
            std::size_t j = i + 1;
            while (true) {
                if (j >= src.size() || src[j] == '\n') syntax_error("unterminated string literal", line);
                if (src[j] == c) break;
                if (src[j] == '\\' && j + 1 < src.size()) {
                    const char e = src[j + 1];
                    s.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
                    j += 2;
                    continue;
                }
                s.push_back(src[j++]);
            }
            out.push_back({Tok::String, std::move(s), line});
            i = j + 1;
            continue;
        }
        bool matched = false;
        for (auto op : ops) {
            if (src.substr(i).starts_with(op)) {
                if (op == "(") ++depth;
                if (op == ")") {
                    if (depth == 0) syntax_error("unmatched ')'", line);
                    --depth;
                }
                out.push_back({Tok::Op, std::string(op), line});
                i += op.size();
                matched = true;
                break;
            }
        }
        if (!matched) syntax_error(std::string("unexpected character '") + c + "'", line);
    }
    if (depth != 0) syntax_error("unexpected end of input inside parentheses", line);
    if (!out.empty() && out.back().kind != Tok::Newline && out.back().kind != Tok::Dedent) {
        out.push_back({Tok::Newline, "", line});
    }
    while (indents.size() > 1) {
        indents.pop_back();
        out.push_back({Tok::Dedent, "", line});
    }
    out.push_back({Tok::End, "", line});
    return out;
}

// ---------------------------------------------------------------------------
// syntax tree

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { Literal, Name, Unary, Binary, Compare, And, Or, Not, Call };
    Kind kind;
    int line = 0;
    Value literal;
    std::string name;              // Name, Call (callee), Unary/Binary operator
    std::vector<std::string> ops;  // Compare chain operators
    std::vector<ExprPtr> args;
};

struct Stmt;
using Block = std::vector<Stmt>;

struct Stmt {
    enum class Kind { Expression, Assign, AugAssign, If, While, For, Pass, Break, Continue, Import };
    Kind kind;
    int line = 0;
    std::string target;
    std::string op;
    ExprPtr expr;
    std::vector<std::pair<ExprPtr, Block>> branches;  // if / elif
    Block body;                                       // while, for, else
    std::vector<ExprPtr> range_args;
};

const std::map<std::string, int, std::less<>> kKeywords = {
    {"if", 0},   {"elif", 0}, {"else", 0},  {"while", 0},  {"for", 0},   {"in", 0},    {"and", 0},  {"or", 0},
    {"not", 0},  {"True", 0}, {"False", 0}, {"None", 0},   {"pass", 0},  {"break", 0}, {"continue", 0},
    {"import", 0}, {"def", 0}, {"return", 0}, {"lambda", 0}, {"class", 0},
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Block program() {
        Block block;
        while (peek().kind != Tok::End) {
            if (peek().kind == Tok::Newline) {
                ++pos_;
                continue;
            }
            statement(block);
        }
        return block;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    bool is_op(std::string_view op, std::size_t ahead = 0) const {
        const auto& t = peek(ahead);
        return t.kind == Tok::Op && t.text == op;
    }
    bool is_kw(std::string_view kw) const {
        return peek().kind == Tok::Name && peek().text == kw;
    }
    void expect_op(std::string_view op) {
        if (!is_op(op)) syntax_error("expected '" + std::string(op) + "'", peek().line);
        ++pos_;
    }
    void expect_kw(std::string_view kw) {
        if (!is_kw(kw)) syntax_error("expected '" + std::string(kw) + "'", peek().line);
        ++pos_;
    }
    std::string expect_name() {
        const auto& t = peek();
        if (t.kind != Tok::Name || kKeywords.contains(t.text)) syntax_error("expected a name", t.line);
        ++pos_;
        return t.text;
    }
    void end_of_simple() {
        if (is_op(";")) {
            ++pos_;
            return;
        }
        if (peek().kind == Tok::Newline) {
            ++pos_;
            return;
        }
        if (peek().kind == Tok::End || peek().kind == Tok::Dedent) return;
        syntax_error("invalid syntax near '" + peek().text + "'", peek().line);
    }

    void statement(Block& block) {
        const auto& t = peek();
        if (t.kind == Tok::Indent) syntax_error("unexpected indent", t.line);
        if (t.kind == Tok::Name) {
            if (t.text == "if") return block.push_back(if_statement());
            if (t.text == "while") return block.push_back(while_statement());
            if (t.text == "for") return block.push_back(for_statement());
            if (t.text == "def" || t.text == "class" || t.text == "lambda" || t.text == "return") {
                syntax_error("'" + t.text + "' is not supported", t.line);
            }
        }
        simple_statements(block);
    }

    void simple_statements(Block& block) {
        while (true) {
            block.push_back(simple_statement());
            if (is_op(";")) {
                ++pos_;
                if (peek().kind == Tok::Newline || peek().kind == Tok::End) break;
                continue;
            }
            end_of_simple();
            break;
        }
    }

    Stmt simple_statement() {
        const auto& t = peek();
        Stmt s;
        s.line = t.line;
        if (t.kind == Tok::Name) {
            if (t.text == "pass" || t.text == "break" || t.text == "continue") {
                s.kind = t.text == "pass" ? Stmt::Kind::Pass : t.text == "break" ? Stmt::Kind::Break : Stmt::Kind::Continue;
                ++pos_;
                return s;
            }
            if (t.text == "import") {
                ++pos_;
                const auto mod = expect_name();
                if (mod != "math") syntax_error("only 'import math' is available", t.line);
                s.kind = Stmt::Kind::Import;
                return s;
            }
            if (!kKeywords.contains(t.text) && peek(1).kind == Tok::Op) {
                const auto& op = peek(1).text;
                if (op == "=") {
                    s.kind = Stmt::Kind::Assign;
                    s.target = expect_name();
                    ++pos_;
                    s.expr = expression();
                    return s;
                }
                if (op == "+=" || op == "-=" || op == "*=" || op == "/=" || op == "%=" || op == "**=" || op == "//=") {
                    s.kind = Stmt::Kind::AugAssign;
                    s.target = expect_name();
                    s.op = op.substr(0, op.size() - 1);
                    ++pos_;
                    s.expr = expression();
                    return s;
                }
            }
        }
        s.kind = Stmt::Kind::Expression;
        s.expr = expression();
        if (is_op("=")) syntax_error("cannot assign to expression", peek().line);
        return s;
    }

    Block suite() {
        expect_op(":");
        Block block;
        if (peek().kind != Tok::Newline) {
            simple_statements(block);
            return block;
        }
        ++pos_;
        if (peek().kind != Tok::Indent) syntax_error("expected an indented block", peek().line);
        ++pos_;
        while (peek().kind != Tok::Dedent && peek().kind != Tok::End) {
            if (peek().kind == Tok::Newline) {
                ++pos_;
                continue;
            }
            statement(block);
        }
        if (peek().kind == Tok::Dedent) ++pos_;
        return block;
    }

    Stmt if_statement() {
        Stmt s;
        s.kind = Stmt::Kind::If;
        s.line = peek().line;
        ++pos_;
        auto cond = expression();
        s.branches.emplace_back(std::move(cond), suite());
        while (is_kw("elif")) {
            ++pos_;
            auto c = expression();
            s.branches.emplace_back(std::move(c), suite());
        }
        if (is_kw("else")) {
            ++pos_;
            s.body = suite();
        }
        return s;
    }

    Stmt while_statement() {
        Stmt s;
        s.kind = Stmt::Kind::While;
        s.line = peek().line;
        ++pos_;
        s.expr = expression();
        s.body = suite();
        return s;
    }

    Stmt for_statement() {
        Stmt s;
        s.kind = Stmt::Kind::For;
        s.line = peek().line;
        ++pos_;
        s.target = expect_name();
        expect_kw("in");
        if (!is_kw("range")) syntax_error("for loops iterate over range(...) only", peek().line);
        ++pos_;
        expect_op("(");
        if (!is_op(")")) {
            s.range_args.push_back(expression());
            while (is_op(",")) {
                ++pos_;
                s.range_args.push_back(expression());
            }
        }
        expect_op(")");
        if (s.range_args.empty() || s.range_args.size() > 3) syntax_error("range expects 1 to 3 arguments", s.line);
        s.body = suite();
        return s;
    }

    ExprPtr make(Expr::Kind kind, int line) {
        auto e = std::make_unique<Expr>();
        e->kind = kind;
        e->line = line;
        return e;
    }

    ExprPtr expression() { return or_expr(); }

    ExprPtr or_expr() {
        auto left = and_expr();
        while (is_kw("or")) {
            auto e = make(Expr::Kind::Or, peek().line);
            ++pos_;
            e->args.push_back(std::move(left));
            e->args.push_back(and_expr());
            left = std::move(e);
        }
        return left;
    }

    ExprPtr and_expr() {
        auto left = not_expr();
        while (is_kw("and")) {
            auto e = make(Expr::Kind::And, peek().line);
            ++pos_;
            e->args.push_back(std::move(left));
            e->args.push_back(not_expr());
            left = std::move(e);
        }
        return left;
    }

    ExprPtr not_expr() {
        if (is_kw("not")) {
            auto e = make(Expr::Kind::Not, peek().line);
            ++pos_;
            e->args.push_back(not_expr());
            return e;
        }
        return comparison();
    }

    ExprPtr comparison() {
        auto first = arith();
        static const std::vector<std::string_view> cmp = {"<", "<=", ">", ">=", "==", "!="};
        auto is_cmp = [&] {
            for (auto op : cmp) {
                if (is_op(op)) return true;
            }
            return false;
        };
        if (!is_cmp()) return first;
        auto e = make(Expr::Kind::Compare, peek().line);
        e->args.push_back(std::move(first));
        while (is_cmp()) {
            e->ops.push_back(peek().text);
            ++pos_;
            e->args.push_back(arith());
        }
        return e;
    }

    ExprPtr arith() {
        auto left = term();
        while (is_op("+") || is_op("-")) {
            auto e = make(Expr::Kind::Binary, peek().line);
            e->name = peek().text;
            ++pos_;
            e->args.push_back(std::move(left));
            e->args.push_back(term());
            left = std::move(e);
        }
        return left;
    }

    ExprPtr term() {
        auto left = unary();
        while (is_op("*") || is_op("/") || is_op("//") || is_op("%")) {
            auto e = make(Expr::Kind::Binary, peek().line);
            e->name = peek().text;
            ++pos_;
            e->args.push_back(std::move(left));
            e->args.push_back(unary());
            left = std::move(e);
        }
        return left;
    }

    ExprPtr unary() {
        if (is_op("-") || is_op("+")) {
            auto e = make(Expr::Kind::Unary, peek().line);
            e->name = peek().text;
            ++pos_;
            e->args.push_back(unary());
            return e;
        }
        return power();
    }

    ExprPtr power() {
        auto base = primary();
        if (is_op("**")) {
            auto e = make(Expr::Kind::Binary, peek().line);
            e->name = "**";
            ++pos_;
            e->args.push_back(std::move(base));
            e->args.push_back(unary());  // right-associative, binds unary on the right
            return e;
        }
        return base;
    }

    ExprPtr primary() {
        const auto t = peek();
        if (t.kind == Tok::Number) {
            ++pos_;
            auto e = make(Expr::Kind::Literal, t.line);
            std::string digits;
            for (char c : t.text) {
                if (c != '_') digits.push_back(c);
            }
            if (digits.find_first_of(".eE") == std::string::npos) {
                digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
                e->literal = exact(Rational(Int(digits)));
            } else {
                e->literal = real(std::strtod(digits.c_str(), nullptr));
            }
            return e;
        }
        if (t.kind == Tok::String) {
            ++pos_;
            auto e = make(Expr::Kind::Literal, t.line);
            e->literal = t.text;
            return e;
        }
        if (t.kind == Tok::Op && t.text == "(") {
            ++pos_;
            auto e = expression();
            expect_op(")");
            return e;
        }
        if (t.kind == Tok::Name) {
            if (t.text == "True" || t.text == "False" || t.text == "None") {
                ++pos_;
                auto e = make(Expr::Kind::Literal, t.line);
                if (t.text == "None") {
                    e->literal = None{};
                } else {
                    e->literal = t.text == "True";
                }
                return e;
            }
            std::string name = expect_name();
            if (name == "math" && is_op(".")) {
                ++pos_;
                name = expect_name();
            }
            if (is_op("(")) {
                ++pos_;
                auto e = make(Expr::Kind::Call, t.line);
                e->name = name;
                if (!is_op(")")) {
                    e->args.push_back(expression());
                    while (is_op(",")) {
                        ++pos_;
                        if (is_op(")")) break;
                        e->args.push_back(expression());
                    }
                }
                expect_op(")");
                return e;
            }
            auto e = make(Expr::Kind::Name, t.line);
            e->name = name;
            return e;
        }
        if (t.kind == Tok::End || t.kind == Tok::Newline) syntax_error("unexpected end of statement", t.line);
        syntax_error("invalid syntax near '" + t.text + "'", t.line);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// evaluation

struct BreakSignal {};
struct ContinueSignal {};

class Machine {
public:
    explicit Machine(std::uint64_t max_steps) : max_steps_(max_steps) {}

    void run(const Block& block) {
        for (const auto& s : block) exec(s);
    }

    std::string output() const { return out_; }

private:
    void tick() {
        if (++steps_ > max_steps_) {
            raise("StepBudgetExceeded", "exceeded " + std::to_string(max_steps_) + " evaluation steps");
        }
    }

    void exec(const Stmt& s) {
        tick();
        switch (s.kind) {
            case Stmt::Kind::Expression: eval(*s.expr); break;
            case Stmt::Kind::Assign: vars_[s.target] = eval(*s.expr); break;
            case Stmt::Kind::AugAssign: {
                auto it = vars_.find(s.target);
                if (it == vars_.end()) raise("NameError", "name '" + s.target + "' is not defined");
                it->second = binary(s.op, it->second, eval(*s.expr));
                break;
            }
            case Stmt::Kind::If: {
                for (const auto& [cond, body] : s.branches) {
                    if (truthy(eval(*cond))) {
                        run(body);
                        return;
                    }
                }
                run(s.body);
                break;
            }
            case Stmt::Kind::While:
                while (truthy(eval(*s.expr))) {
                    try {
                        run(s.body);
                    } catch (const BreakSignal&) {
                        break;
                    } catch (const ContinueSignal&) {
                    }
                    tick();
                }
                break;
            case Stmt::Kind::For: {
                std::vector<Int> args;
                for (const auto& a : s.range_args) {
                    const auto v = eval(*a);
                    if (!(std::holds_alternative<Rational>(v) || std::holds_alternative<bool>(v)) ||
                        !is_integer(as_exact(v))) {
                        raise("TypeError", "range() arguments must be integers, not " + type_name(v));
                    }
                    args.push_back(mp::numerator(as_exact(v)));
                }
                Int start = 0, stop = 0, step = 1;
                if (args.size() == 1) {
                    stop = args[0];
                } else {
                    start = args[0];
                    stop = args[1];
                    if (args.size() == 3) step = args[2];
                }
                if (step == 0) raise("ValueError", "range() arg 3 must not be zero");
                for (Int i = start; step > 0 ? i < stop : i > stop; i += step) {
                    vars_[s.target] = Value(Rational(i));
                    try {
                        run(s.body);
                    } catch (const BreakSignal&) {
                        break;
                    } catch (const ContinueSignal&) {
                    }
                    tick();
                }
                break;
            }
            case Stmt::Kind::Pass:
            case Stmt::Kind::Import: break;
            case Stmt::Kind::Break: throw BreakSignal{};
            case Stmt::Kind::Continue: throw ContinueSignal{};
        }
    }

    Value eval(const Expr& e) {
        tick();
        switch (e.kind) {
            case Expr::Kind::Literal: return e.literal;
            case Expr::Kind::Name: return lookup(e.name);
            case Expr::Kind::Unary: {
                auto v = eval(*e.args[0]);
                if (!is_numeric(v)) raise("TypeError", "bad operand type for unary " + e.name + ": '" + type_name(v) + "'");
                if (e.name == "+") return std::holds_alternative<bool>(v) ? Value(as_exact(v)) : v;
                if (const auto* d = std::get_if<double>(&v)) return real(-*d);
                return exact(-as_exact(v));
            }
            case Expr::Kind::Binary: {
                auto l = eval(*e.args[0]);
                auto r = eval(*e.args[1]);
                return binary(e.name, l, r);
            }
            case Expr::Kind::Compare: {
                auto left = eval(*e.args[0]);
                for (std::size_t i = 0; i < e.ops.size(); ++i) {
                    auto right = eval(*e.args[i + 1]);
                    if (!compare(e.ops[i], left, right)) return Value(false);
                    left = std::move(right);
                }
                return Value(true);
            }
            case Expr::Kind::And: {
                auto l = eval(*e.args[0]);
                return truthy(l) ? eval(*e.args[1]) : l;
            }
            case Expr::Kind::Or: {
                auto l = eval(*e.args[0]);
                return truthy(l) ? l : eval(*e.args[1]);
            }
            case Expr::Kind::Not: return Value(!truthy(eval(*e.args[0])));
            case Expr::Kind::Call: return call(e);
        }
        return Value(None{});
    }

    Value lookup(const std::string& name) const {
        if (auto it = vars_.find(name); it != vars_.end()) return it->second;
        if (name == "pi") return real(3.141592653589793);
        if (name == "e") return real(2.718281828459045);
        raise("NameError", "name '" + name + "' is not defined");
    }

    static bool compare(const std::string& op, const Value& l, const Value& r) {
        if (is_numeric(l) && is_numeric(r)) {
            int c;
            if (std::holds_alternative<double>(l) || std::holds_alternative<double>(r)) {
                const double a = as_double(l), b = as_double(r);
                if (std::isnan(a) || std::isnan(b)) return op == "!=";
                c = a < b ? -1 : a > b ? 1 : 0;
            } else {
                const auto a = as_exact(l), b = as_exact(r);
                c = a < b ? -1 : a > b ? 1 : 0;
            }
            if (op == "<") return c < 0;
            if (op == "<=") return c <= 0;
            if (op == ">") return c > 0;
            if (op == ">=") return c >= 0;
            if (op == "==") return c == 0;
            return c != 0;
        }
        if (op == "==") return l == r;
        if (op == "!=") return !(l == r);
        if (std::holds_alternative<std::string>(l) && std::holds_alternative<std::string>(r)) {
            const auto& a = std::get<std::string>(l);
            const auto& b = std::get<std::string>(r);
            if (op == "<") return a < b;
            if (op == "<=") return a <= b;
            if (op == ">") return a > b;
            return a >= b;
        }
        raise("TypeError", "'" + op + "' not supported between '" + type_name(l) + "' and '" + type_name(r) + "'");
    }

    static Value power(const Value& l, const Value& r) {
        if (!std::holds_alternative<double>(l) && !std::holds_alternative<double>(r) && is_integer(as_exact(r))) {
            const Rational base = as_exact(l);
            const Int e = mp::numerator(as_exact(r));
            if (base == 0 && e < 0) raise("DivisionByZero", "0 cannot be raised to a negative power");
            if (base == 0 || base == 1) return exact(e == 0 ? Rational(1) : base);
            if (base == -1) return exact(Rational(e % 2 == 0 ? 1 : -1));
            const Int mag = mp::abs(e);
            const unsigned base_bits =
                std::max<unsigned>(1, std::max(mp::msb(mp::abs(mp::numerator(base))) + 1,
                                               mp::msb(mp::denominator(base)) + 1));
            if (mag > Int(kMaxBits) || mag * base_bits > Int(kMaxBits)) raise("OverflowError", "integer too large");
            const auto n = mag.convert_to<unsigned>();
            Rational result = Rational(mp::pow(mp::numerator(base), n), mp::pow(mp::denominator(base), n));
            if (e < 0) result = 1 / result;
            return exact(result);
        }
        const double a = as_double(l), b = as_double(r);
        if (a == 0.0 && b < 0.0) raise("DivisionByZero", "0.0 cannot be raised to a negative power");
        if (a < 0.0 && std::floor(b) != b) raise("ValueError", "math domain error");
        const double v = std::pow(a, b);
        if (std::isinf(v)) raise("OverflowError", "numerical result out of range");
        return real(v);
    }

    static Value binary(const std::string& op, const Value& l, const Value& r) {
        const bool ls = std::holds_alternative<std::string>(l);
        const bool rs = std::holds_alternative<std::string>(r);
        if (ls || rs) {
            if (op == "+" && ls && rs) {
                auto s = std::get<std::string>(l) + std::get<std::string>(r);
                if (s.size() > kMaxString) raise("OverflowError", "string too long");
                return Value(std::move(s));
            }
            if (op == "*" && (ls != rs)) {
                const auto& s = std::get<std::string>(ls ? l : r);
                const auto& n = ls ? r : l;
                if (std::holds_alternative<double>(n) || !is_integer(as_exact(n))) {
                    raise("TypeError", "can't multiply sequence by non-int");
                }
                const Int count = mp::numerator(as_exact(n));
                if (count <= 0) return Value(std::string());
                if (count * s.size() > kMaxString) raise("OverflowError", "string too long");
                std::string out;
                for (Int i = 0; i < count; ++i) out += s;
                return Value(std::move(out));
            }
            raise("TypeError", "unsupported operand type(s) for " + op + ": '" + type_name(l) + "' and '" +
                                   type_name(r) + "'");
        }
        if (!is_numeric(l) || !is_numeric(r)) {
            raise("TypeError", "unsupported operand type(s) for " + op + ": '" + type_name(l) + "' and '" +
                                   type_name(r) + "'");
        }
        if (op == "**") return power(l, r);
        const bool floating = std::holds_alternative<double>(l) || std::holds_alternative<double>(r);
        if (floating) {
            const double a = as_double(l), b = as_double(r);
            if (op == "+") return real(a + b);
            if (op == "-") return real(a - b);
            if (op == "*") return real(a * b);
            if (b == 0.0) raise("DivisionByZero", "division by zero");
            if (op == "/") return real(a / b);
            if (op == "//") return real(std::floor(a / b));
            double m = std::fmod(a, b);
            if (m != 0.0 && ((m < 0) != (b < 0))) m += b;
            return real(m);
        }
        const Rational a = as_exact(l), b = as_exact(r);
        if (op == "+") return exact(a + b);
        if (op == "-") return exact(a - b);
        if (op == "*") return exact(a * b);
        if (b == 0) raise("DivisionByZero", "division by zero");
        if (op == "/") return exact(a / b);
        const Rational q = floor_of(a / b);
        if (op == "//") return exact(q);
        return exact(a - b * q);
    }

    Value call(const Expr& e) {
        const auto& f = e.name;
        std::vector<Value> args;
        args.reserve(e.args.size());
        for (const auto& a : e.args) args.push_back(eval(*a));

        auto arity = [&](std::size_t lo, std::size_t hi) {
            if (args.size() < lo || args.size() > hi) {
                raise("TypeError", f + "() takes " + std::to_string(lo) +
                                       (hi != lo ? " to " + std::to_string(hi) : std::string()) + " arguments (" +
                                       std::to_string(args.size()) + " given)");
            }
        };
        auto numeric = [&](const Value& v) {
            if (!is_numeric(v)) raise("TypeError", f + "() argument must be a number, not '" + type_name(v) + "'");
        };
        auto integer = [&](const Value& v) -> Int {
            if (std::holds_alternative<double>(v) || !is_numeric(v) || !is_integer(as_exact(v))) {
                raise("TypeError", f + "() argument must be an integer, not '" + type_name(v) + "'");
            }
            return mp::numerator(as_exact(v));
        };

        if (f == "print") {
            std::string line;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i) line += ' ';
                line += to_display(args[i]);
            }
            if (printed_) out_ += '\n';
            out_ += line;
            printed_ = true;
            if (out_.size() > kMaxOutput) raise("OutputLimitExceeded", "printed more than 1 MiB");
            return Value(None{});
        }
        if (f == "abs") {
            arity(1, 1);
            numeric(args[0]);
            if (const auto* d = std::get_if<double>(&args[0])) return real(std::fabs(*d));
            return exact(mp::abs(as_exact(args[0])));
        }
        if (f == "min" || f == "max") {
            if (args.empty()) raise("TypeError", f + "() expects at least 1 argument");
            Value best = args[0];
            for (std::size_t i = 1; i < args.size(); ++i) {
                if (compare(f == "min" ? "<" : ">", args[i], best)) best = args[i];
            }
            return best;
        }
        if (f == "int") {
            arity(1, 1);
            if (const auto* s = std::get_if<std::string>(&args[0])) {
                try {
                    std::size_t used = 0;
                    const long long v = std::stoll(*s, &used);
                    if (used != s->size()) throw std::invalid_argument("trailing");
                    return exact(Rational(v));
                } catch (const std::exception&) {
                    raise("ValueError", "invalid literal for int(): '" + *s + "'");
                }
            }
            numeric(args[0]);
            if (const auto* d = std::get_if<double>(&args[0])) {
                if (!std::isfinite(*d)) raise("ValueError", "cannot convert non-finite float to integer");
                return exact(Rational(Int(std::trunc(*d))));
            }
            const Rational q = as_exact(args[0]);
            return exact(Rational(Int(mp::numerator(q) / mp::denominator(q))));
        }
        if (f == "float") {
            arity(1, 1);
            if (const auto* s = std::get_if<std::string>(&args[0])) {
                char* end = nullptr;
                const double v = std::strtod(s->c_str(), &end);
                if (s->empty() || end != s->c_str() + s->size()) raise("ValueError", "could not convert string to float");
                return real(v);
            }
            numeric(args[0]);
            return real(as_double(args[0]));
        }
        if (f == "round") {
            arity(1, 2);
            numeric(args[0]);
            const Int digits = args.size() == 2 ? integer(args[1]) : Int(0);
            if (mp::abs(digits) > 300) raise("OverflowError", "round() digits out of range");
            const int nd = digits.convert_to<int>();
            if (const auto* d = std::get_if<double>(&args[0])) {
                const double scale = std::pow(10.0, nd);
                const double v = std::nearbyint(*d * scale) / scale;  // FE_TONEAREST: half to even
                if (args.size() == 1) return exact(Rational(Int(v)));
                return real(v);
            }
            Rational scale = 1;
            for (int i = 0; i < std::abs(nd); ++i) scale *= 10;
            if (nd < 0) scale = 1 / scale;
            const Rational x = as_exact(args[0]) * scale;
            Rational fl = floor_of(x);
            const Rational frac = x - fl;
            if (frac > Rational(1, 2) || (frac == Rational(1, 2) && mp::numerator(fl) % 2 != 0)) fl += 1;
            return exact(fl / scale);
        }
        if (f == "sqrt") {
            arity(1, 1);
            numeric(args[0]);
            const double v = as_double(args[0]);
            if (v < 0) raise("ValueError", "math domain error");
            return real(std::sqrt(v));
        }
        if (f == "isqrt") {
            arity(1, 1);
            const Int n = integer(args[0]);
            if (n < 0) raise("ValueError", "isqrt() argument must be nonnegative");
            return exact(Rational(mp::sqrt(n)));
        }
        if (f == "gcd") {
            Int g = 0;
            for (const auto& a : args) g = mp::gcd(g, mp::abs(integer(a)));
            return exact(Rational(g));
        }
        if (f == "factorial") {
            arity(1, 1);
            const Int n = integer(args[0]);
            if (n < 0) raise("ValueError", "factorial() not defined for negative values");
            if (n > 5000) raise("OverflowError", "factorial() argument too large");
            Int acc = 1;
            for (Int i = 2; i <= n; ++i) {
                acc *= i;
                tick();
            }
            return exact(Rational(acc));
        }
        if (f == "floor" || f == "ceil") {
            arity(1, 1);
            numeric(args[0]);
            if (const auto* d = std::get_if<double>(&args[0])) {
                if (!std::isfinite(*d)) raise("OverflowError", "cannot convert float infinity to integer");
                return exact(Rational(Int(f == "floor" ? std::floor(*d) : std::ceil(*d))));
            }
            const Rational q = as_exact(args[0]);
            const Rational fl = floor_of(q);
            return exact(f == "floor" || fl == q ? fl : fl + 1);
        }
        if (f == "log" || f == "exp" || f == "sin" || f == "cos") {
            arity(1, f == "log" ? 2 : 1);
            numeric(args[0]);
            const double x = as_double(args[0]);
            if (f == "log") {
                if (x <= 0) raise("ValueError", "math domain error");
                if (args.size() == 2) {
                    numeric(args[1]);
                    const double b = as_double(args[1]);
                    if (b <= 0 || b == 1) raise("ValueError", "math domain error");
                    return real(std::log(x) / std::log(b));
                }
                return real(std::log(x));
            }
            if (f == "exp") {
                const double v = std::exp(x);
                if (std::isinf(v)) raise("OverflowError", "math range error");
                return real(v);
            }
            return real(f == "sin" ? std::sin(x) : std::cos(x));
        }
        if (f == "str") {
            arity(1, 1);
            return Value(to_display(args[0]));
        }
        raise("NameError", "name '" + f + "' is not defined");
    }

    std::uint64_t max_steps_;
    std::uint64_t steps_ = 0;
    std::map<std::string, Value, std::less<>> vars_;
    std::string out_;
    bool printed_ = false;
};

}  // namespace

ExecutionOutcome run_program(std::string_view source, std::uint64_t max_steps) {
    try {
        Parser parser(lex(source));
        const Block program = parser.program();
        Machine machine(max_steps);
        try {
            machine.run(program);
        } catch (const BreakSignal&) {
            return ExecutionOutcome::failure("SyntaxError: 'break' outside loop");
        } catch (const ContinueSignal&) {
            return ExecutionOutcome::failure("SyntaxError: 'continue' not properly in loop");
        }
        return ExecutionOutcome::output(machine.output());
    } catch (const Failure& f) {
        return ExecutionOutcome::failure(f.message);
    }
}

}  // namespace tir
