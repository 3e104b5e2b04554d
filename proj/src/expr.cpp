#include "hierdyn/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "eval_kernels.hpp"

namespace hierdyn {

ParseError::ParseError(const std::string& message, std::size_t position)
    : Error("parse error at position " + std::to_string(position) + ": " + message), position_(position)
{
}

UndeclaredSymbolError::UndeclaredSymbolError(const std::string& symbol)
    : Error(symbol == "t" ? "undeclared symbol 't': time-dependent (nonautonomous) fields are not supported"
                          : "undeclared symbol '" + symbol + "'"),
      symbol_(symbol)
{
}

// ---------------------------------------------------------------------------
// Rational

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d)
{
    if (d == 0) throw Error("rational exponent with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational operator+(const Rational& a, const Rational& b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
Rational operator-(const Rational& a, const Rational& b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
Rational operator*(const Rational& a, const Rational& b) { return {a.num * b.num, a.den * b.den}; }

// ---------------------------------------------------------------------------
// Nodes

namespace detail {
struct Node {
    Op op = Op::Const;
    double value = 0.0;
    std::string name;
    Rational exponent{};
    std::vector<ScalarExpr> args;
};
}  // namespace detail

namespace {

std::size_t op_arity(Op op)
{
    switch (op) {
    case Op::Const:
    case Op::Symbol: return 0;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div:
    case Op::Atan2: return 2;
    default: return 1;
    }
}

}  // namespace

ScalarExpr::ScalarExpr() : ScalarExpr(0.0) {}

ScalarExpr::ScalarExpr(double value)
{
    if (!std::isfinite(value)) throw DomainError("non-finite constant in expression");
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Const;
    n->value = value;
    node_ = std::move(n);
}

ScalarExpr ScalarExpr::constant(double value) { return ScalarExpr(value); }

ScalarExpr ScalarExpr::symbol(std::string name)
{
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Symbol;
    n->name = std::move(name);
    return ScalarExpr(std::shared_ptr<const detail::Node>(std::move(n)));
}

ScalarExpr ScalarExpr::unary(Op op, ScalarExpr arg)
{
    if (op_arity(op) != 1 || op == Op::Pow) throw Error("operator is not unary");
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->args.push_back(std::move(arg));
    return ScalarExpr(std::shared_ptr<const detail::Node>(std::move(n)));
}

ScalarExpr ScalarExpr::binary(Op op, ScalarExpr lhs, ScalarExpr rhs)
{
    if (op_arity(op) != 2) throw Error("operator is not binary");
    auto n = std::make_shared<detail::Node>();
    n->op = op;
    n->args.push_back(std::move(lhs));
    n->args.push_back(std::move(rhs));
    return ScalarExpr(std::shared_ptr<const detail::Node>(std::move(n)));
}

ScalarExpr ScalarExpr::pow(ScalarExpr base, Rational exponent)
{
    auto n = std::make_shared<detail::Node>();
    n->op = Op::Pow;
    n->exponent = exponent;
    n->args.push_back(std::move(base));
    return ScalarExpr(std::shared_ptr<const detail::Node>(std::move(n)));
}

Op ScalarExpr::op() const { return node_->op; }
double ScalarExpr::value() const { return node_->value; }
const std::string& ScalarExpr::name() const { return node_->name; }
Rational ScalarExpr::exponent() const { return node_->exponent; }
std::size_t ScalarExpr::arity() const { return node_->args.size(); }
const ScalarExpr& ScalarExpr::arg(std::size_t i) const { return node_->args.at(i); }

ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr::binary(Op::Add, a, b); }
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr::binary(Op::Sub, a, b); }
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr::binary(Op::Mul, a, b); }
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr::binary(Op::Div, a, b); }
ScalarExpr operator-(const ScalarExpr& a) { return ScalarExpr::unary(Op::Neg, a); }

ScalarExpr pow(const ScalarExpr& base, Rational exponent) { return ScalarExpr::pow(base, exponent); }
ScalarExpr sin(const ScalarExpr& e) { return ScalarExpr::unary(Op::Sin, e); }
ScalarExpr cos(const ScalarExpr& e) { return ScalarExpr::unary(Op::Cos, e); }
ScalarExpr tan(const ScalarExpr& e) { return ScalarExpr::unary(Op::Tan, e); }
ScalarExpr exp(const ScalarExpr& e) { return ScalarExpr::unary(Op::Exp, e); }
ScalarExpr log(const ScalarExpr& e) { return ScalarExpr::unary(Op::Log, e); }
ScalarExpr abs(const ScalarExpr& e) { return ScalarExpr::unary(Op::Abs, e); }
ScalarExpr sqrt(const ScalarExpr& e) { return ScalarExpr::unary(Op::Sqrt, e); }
ScalarExpr atan(const ScalarExpr& e) { return ScalarExpr::unary(Op::Atan, e); }
ScalarExpr atan2(const ScalarExpr& y, const ScalarExpr& x) { return ScalarExpr::binary(Op::Atan2, y, x); }

int compare(const ScalarExpr& a, const ScalarExpr& b)
{
    if (a.op() != b.op()) return a.op() < b.op() ? -1 : 1;
    switch (a.op()) {
    case Op::Const: {
        // bitwise order so that -0.0 and 0.0 differ, matching structural equality
        auto ba = std::bit_cast<std::uint64_t>(a.value());
        auto bb = std::bit_cast<std::uint64_t>(b.value());
        if (ba == bb) return 0;
        if (a.value() != b.value()) return a.value() < b.value() ? -1 : 1;
        return ba < bb ? -1 : 1;
    }
    case Op::Symbol: return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
    case Op::Pow:
        if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
        break;
    default: break;
    }
    for (std::size_t i = 0; i < a.arity(); ++i) {
        int c = compare(a.arg(i), b.arg(i));
        if (c != 0) return c;
    }
    return 0;
}

bool structurally_equal(const ScalarExpr& a, const ScalarExpr& b) { return compare(a, b) == 0; }

namespace {

void collect_symbols(const ScalarExpr& e, std::set<std::string>& out)
{
    if (e.op() == Op::Symbol) {
        out.insert(e.name());
        return;
    }
    for (std::size_t i = 0; i < e.arity(); ++i) collect_symbols(e.arg(i), out);
}

}  // namespace

SymbolList symbols_of(const ScalarExpr& e)
{
    std::set<std::string> s;
    collect_symbols(e, s);
    return {s.begin(), s.end()};
}

std::size_t node_count(const ScalarExpr& e)
{
    std::size_t n = 1;
    for (std::size_t i = 0; i < e.arity(); ++i) n += node_count(e.arg(i));
    return n;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct FunctionName {
    std::string_view name;
    Op op;
};

constexpr std::array<FunctionName, 9> kFunctions = {{
    {"sin", Op::Sin},
    {"cos", Op::Cos},
    {"tan", Op::Tan},
    {"exp", Op::Exp},
    {"log", Op::Log},
    {"abs", Op::Abs},
    {"sqrt", Op::Sqrt},
    {"atan", Op::Atan},
    {"atan2", Op::Atan2},
}};

std::string_view function_name(Op op)
{
    for (const auto& f : kFunctions) {
        if (f.op == op) return f.name;
    }
    return {};
}

class Parser {
public:
    Parser(std::string_view text, const SymbolList& coords) : text_(text), coords_(coords) {}

    ScalarExpr parse_all()
    {
        ScalarExpr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    char peek()
    {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    ScalarExpr parse_expr()
    {
        ScalarExpr lhs = parse_term();
        for (;;) {
            if (accept('+'))
                lhs = lhs + parse_term();
            else if (accept('-'))
                lhs = lhs - parse_term();
            else
                return lhs;
        }
    }

    ScalarExpr parse_term()
    {
        ScalarExpr lhs = parse_factor();
        for (;;) {
            if (accept('*'))
                lhs = lhs * parse_factor();
            else if (accept('/'))
                lhs = lhs / parse_factor();
            else
                return lhs;
        }
    }

    ScalarExpr parse_factor()
    {
        if (accept('-')) {
            // a negated literal is a negative constant unless it is a power base
            char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                std::size_t save = pos_;
                std::size_t at = pos_;
                double v = number_value(scan_number(), at);
                if (peek() != '^') return ScalarExpr::constant(-v);
                pos_ = save;
            }
            return -parse_factor();
        }
        ScalarExpr base = parse_base();
        if (accept('^')) return ScalarExpr::pow(base, parse_exponent());
        return base;
    }

    // Decimal literal at the cursor, returned verbatim.
    std::string_view scan_number()
    {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        }
        if (pos_ == start || (pos_ == start + 1 && text_[start] == '.')) {
            pos_ = start;
            fail("expected a number");
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        return text_.substr(start, pos_ - start);
    }

    double number_value(std::string_view lit, std::size_t at)
    {
        double v = 0.0;
        auto res = std::from_chars(lit.data(), lit.data() + lit.size(), v);
        if (res.ec != std::errc() || !std::isfinite(v)) throw ParseError("number out of range", at);
        return v;
    }

    // Exact rational value of a decimal literal such as "0.25" or "3e-1".
    Rational exact_rational(std::string_view lit, std::size_t at)
    {
        std::int64_t mant = 0;
        int scale = 0;
        bool frac = false;
        std::size_t i = 0;
        for (; i < lit.size() && lit[i] != 'e' && lit[i] != 'E'; ++i) {
            if (lit[i] == '.') {
                frac = true;
                continue;
            }
            if (mant > 100000000000000LL) throw ParseError("exponent literal too long", at);
            mant = mant * 10 + (lit[i] - '0');
            if (frac) --scale;
        }
        if (i < lit.size()) {
            int e = 0;
            std::from_chars(lit.data() + i + 1 + (lit[i + 1] == '+' ? 1 : 0), lit.data() + lit.size(), e);
            scale += e;
        }
        std::int64_t num = mant, den = 1;
        for (; scale > 0; --scale) num *= 10;
        for (; scale < 0; ++scale) den *= 10;
        if (std::abs(num) > (1LL << 52) || den > (1LL << 52)) throw ParseError("exponent literal too long", at);
        return {num, den};
    }

    Rational parse_exponent()
    {
        std::size_t at = (skip_ws(), pos_);
        bool paren = accept('(');
        bool negative = accept('-');
        char c = peek();
        if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.')) fail("exponent must be a rational constant");
        Rational r = exact_rational(scan_number(), at);
        if (paren && accept('/')) {
            skip_ws();
            std::size_t dat = pos_;
            Rational d = exact_rational(scan_number(), dat);
            if (d.num == 0) throw ParseError("zero denominator in exponent", dat);
            r = r * Rational(d.den, d.num);
        }
        if (paren) expect(')');
        return negative ? Rational(-r.num, r.den) : r;
    }

    ScalarExpr parse_base()
    {
        char c = peek();
        if (c == '(') {
            ++pos_;
            ScalarExpr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t at = pos_;
            return ScalarExpr::constant(number_value(scan_number(), at));
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            std::string ident(text_.substr(start, pos_ - start));
            if (peek() == '(') {
                for (const auto& f : kFunctions) {
                    if (f.name != ident) continue;
                    ++pos_;
                    ScalarExpr a = parse_expr();
                    if (f.op == Op::Atan2) {
                        expect(',');
                        ScalarExpr b = parse_expr();
                        expect(')');
                        return atan2(a, b);
                    }
                    expect(')');
                    return ScalarExpr::unary(f.op, a);
                }
                pos_ = start;
                fail("unknown function '" + ident + "'");
            }
            if (std::find(coords_.begin(), coords_.end(), ident) == coords_.end()) {
                throw UndeclaredSymbolError(ident);
            }
            return ScalarExpr::symbol(ident);
        }
        if (c == '\0') fail("unexpected end of input");
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::string_view text_;
    const SymbolList& coords_;
    std::size_t pos_ = 0;
};

}  // namespace

ScalarExpr parse(std::string_view text, const SymbolList& coords)
{
    if (coords.empty()) throw Error("parse requires a nonempty coordinate list");
    return Parser(text, coords).parse_all();
}

// ---------------------------------------------------------------------------
// Printer

namespace {

int precedence(const ScalarExpr& e)
{
    switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return e.value() < 0 || std::signbit(e.value()) ? 3 : 5;
    default: return 5;
    }
}

void print(const ScalarExpr& e, std::string& out);

void print_at(const ScalarExpr& e, int need, std::string& out)
{
    if (precedence(e) < need) {
        out += '(';
        print(e, out);
        out += ')';
    } else {
        print(e, out);
    }
}

void print(const ScalarExpr& e, std::string& out)
{
    switch (e.op()) {
    case Op::Const: {
        std::array<char, 32> buf{};
        auto res = std::to_chars(buf.data(), buf.data() + buf.size(), e.value());
        out.append(buf.data(), res.ptr);
        return;
    }
    case Op::Symbol: out += e.name(); return;
    case Op::Neg:
        out += '-';
        if (e.arg(0).op() == Op::Const) {
            out += '(';
            print(e.arg(0), out);
            out += ')';
        } else {
            print_at(e.arg(0), 3, out);
        }
        return;
    case Op::Add:
    case Op::Sub:
        print_at(e.arg(0), 1, out);
        out += e.op() == Op::Add ? " + " : " - ";
        print_at(e.arg(1), 2, out);
        return;
    case Op::Mul:
    case Op::Div:
        print_at(e.arg(0), 2, out);
        out += e.op() == Op::Mul ? '*' : '/';
        print_at(e.arg(1), 3, out);
        return;
    case Op::Pow: {
        print_at(e.arg(0), 5, out);
        out += '^';
        Rational r = e.exponent();
        if (r.den == 1 && r.num >= 0) {
            out += std::to_string(r.num);
        } else {
            out += '(' + std::to_string(r.num);
            if (r.den != 1) out += '/' + std::to_string(r.den);
            out += ')';
        }
        return;
    }
    case Op::Atan2:
        out += "atan2(";
        print(e.arg(0), out);
        out += ", ";
        print(e.arg(1), out);
        out += ')';
        return;
    default:
        out += function_name(e.op());
        out += '(';
        print(e.arg(0), out);
        out += ')';
        return;
    }
}

}  // namespace

std::string to_string(const ScalarExpr& e)
{
    std::string s;
    print(e, s);
    return s;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

double eval_tree(const ScalarExpr& e, const Binding& point, const EvalOptions& opt)
{
    switch (e.op()) {
    case Op::Const: return e.value();
    case Op::Symbol: {
        auto it = std::find(point.names.begin(), point.names.end(), e.name());
        if (it == point.names.end() || static_cast<std::size_t>(it - point.names.begin()) >= point.values.size())
            throw UnboundSymbolError("symbol '" + e.name() + "' is not bound");
        return point.values[static_cast<std::size_t>(it - point.names.begin())];
    }
    case Op::Pow: return detail::apply_pow(eval_tree(e.arg(0), point, opt), e.exponent(), opt.singular_eps);
    default: break;
    }
    if (e.arity() == 1) return detail::apply_unary(e.op(), eval_tree(e.arg(0), point, opt), opt.singular_eps);
    double a = eval_tree(e.arg(0), point, opt);
    double b = eval_tree(e.arg(1), point, opt);
    return detail::apply_binary(e.op(), a, b, opt.singular_eps);
}

}  // namespace

double evaluate(const ScalarExpr& e, const Binding& point, EvalOptions options)
{
    double v = eval_tree(e, point, options);
    if (!std::isfinite(v)) throw DomainError("evaluation overflowed");
    return v;
}

// ---------------------------------------------------------------------------
// Differentiation and substitution

namespace {

bool is_zero_const(const ScalarExpr& e) { return e.is_constant(0.0); }

ScalarExpr add_(const ScalarExpr& a, const ScalarExpr& b)
{
    if (is_zero_const(a)) return b;
    if (is_zero_const(b)) return a;
    return a + b;
}

ScalarExpr sub_(const ScalarExpr& a, const ScalarExpr& b)
{
    if (is_zero_const(b)) return a;
    if (is_zero_const(a)) return -b;
    return a - b;
}

ScalarExpr mul_(const ScalarExpr& a, const ScalarExpr& b)
{
    if (is_zero_const(a) || is_zero_const(b)) return ScalarExpr(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    return a * b;
}

ScalarExpr derive(const ScalarExpr& e, const std::string& s)
{
    switch (e.op()) {
    case Op::Const: return 0.0;
    case Op::Symbol: return e.name() == s ? 1.0 : 0.0;
    default: break;
    }
    const ScalarExpr& u = e.arg(0);
    ScalarExpr du = derive(u, s);
    switch (e.op()) {
    case Op::Neg: return is_zero_const(du) ? du : -du;
    case Op::Add: return add_(du, derive(e.arg(1), s));
    case Op::Sub: return sub_(du, derive(e.arg(1), s));
    case Op::Mul: return add_(mul_(du, e.arg(1)), mul_(u, derive(e.arg(1), s)));
    case Op::Div: {
        const ScalarExpr& v = e.arg(1);
        ScalarExpr dv = derive(v, s);
        ScalarExpr first = is_zero_const(du) ? ScalarExpr(0.0) : du / v;
        ScalarExpr second = is_zero_const(dv) ? ScalarExpr(0.0) : mul_(u, dv) / pow(v, Rational(2));
        return sub_(first, second);
    }
    case Op::Pow: {
        if (is_zero_const(du)) return 0.0;
        Rational r = e.exponent();
        Rational rm1 = r - Rational(1);
        ScalarExpr base = rm1.num == 0 ? ScalarExpr(1.0) : (rm1 == Rational(1) ? u : pow(u, rm1));
        return mul_(mul_(ScalarExpr(r.value()), base), du);
    }
    default: break;
    }
    if (e.op() == Op::Atan2) {
        const ScalarExpr& x = e.arg(1);
        ScalarExpr dx = derive(x, s);
        ScalarExpr num = sub_(mul_(x, du), mul_(u, dx));
        if (is_zero_const(num)) return 0.0;
        return num / (pow(u, Rational(2)) + pow(x, Rational(2)));
    }
    if (is_zero_const(du)) return 0.0;
    switch (e.op()) {
    case Op::Sin: return mul_(cos(u), du);
    case Op::Cos: return mul_(-sin(u), du);
    case Op::Tan: return mul_(ScalarExpr(1.0) + pow(tan(u), Rational(2)), du);
    case Op::Exp: return mul_(exp(u), du);
    case Op::Log: return du / u;
    case Op::Abs: return mul_(u / abs(u), du);
    case Op::Sqrt: return du / (ScalarExpr(2.0) * sqrt(u));
    case Op::Atan: return du / (ScalarExpr(1.0) + pow(u, Rational(2)));
    default: throw Error("differentiate: unsupported operator");
    }
}

}  // namespace

ScalarExpr differentiate(const ScalarExpr& e, const std::string& symbol) { return simplify(derive(e, symbol)); }

ScalarExpr substitute(const ScalarExpr& e, const std::string& symbol, const ScalarExpr& replacement)
{
    switch (e.op()) {
    case Op::Const: return e;
    case Op::Symbol: return e.name() == symbol ? replacement : e;
    case Op::Pow: return pow(substitute(e.arg(0), symbol, replacement), e.exponent());
    default: break;
    }
    if (e.arity() == 1) return ScalarExpr::unary(e.op(), substitute(e.arg(0), symbol, replacement));
    return ScalarExpr::binary(e.op(), substitute(e.arg(0), symbol, replacement),
                              substitute(e.arg(1), symbol, replacement));
}

// ---------------------------------------------------------------------------
// Compiled evaluation

namespace {

std::size_t emit(const ScalarExpr& e, const SymbolList& coords, auto& code, auto make)
{
    switch (e.op()) {
    case Op::Const: code.push_back(make(Op::Const, 0, e.value(), Rational{})); return 1;
    case Op::Symbol: {
        auto it = std::find(coords.begin(), coords.end(), e.name());
        if (it == coords.end()) throw UndeclaredSymbolError(e.name());
        code.push_back(make(Op::Symbol, static_cast<std::int32_t>(it - coords.begin()), 0.0, Rational{}));
        return 1;
    }
    default: break;
    }
    std::size_t depth = emit(e.arg(0), coords, code, make);
    if (e.arity() == 2) depth = std::max(depth, 1 + emit(e.arg(1), coords, code, make));
    code.push_back(make(e.op(), 0, 0.0, e.op() == Op::Pow ? e.exponent() : Rational{}));
    return depth;
}

}  // namespace

CompiledExpr::CompiledExpr(const ScalarExpr& e, const SymbolList& coords) : dimension_(coords.size())
{
    max_depth_ =
        emit(e, coords, code_, [](Op op, std::int32_t idx, double v, Rational r) { return Instr{op, idx, v, r}; });
}

double CompiledExpr::operator()(std::span<const double> x, EvalOptions options) const
{
    if (x.size() < dimension_) throw UnboundSymbolError("point has fewer coordinates than the expression");
    constexpr std::size_t kInline = 64;
    std::array<double, kInline> inline_stack{};
    std::vector<double> heap_stack;
    double* stack = inline_stack.data();
    if (max_depth_ > kInline) {
        heap_stack.resize(max_depth_);
        stack = heap_stack.data();
    }
    std::size_t sp = 0;
    const double eps = options.singular_eps;
    for (const Instr& in : code_) {
        switch (in.op) {
        case Op::Const: stack[sp++] = in.value; break;
        case Op::Symbol: stack[sp++] = x[static_cast<std::size_t>(in.index)]; break;
        case Op::Pow: stack[sp - 1] = detail::apply_pow(stack[sp - 1], in.exponent, eps); break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Atan2:
            stack[sp - 2] = detail::apply_binary(in.op, stack[sp - 2], stack[sp - 1], eps);
            --sp;
            break;
        default: stack[sp - 1] = detail::apply_unary(in.op, stack[sp - 1], eps); break;
        }
    }
    double v = stack[0];
    if (!std::isfinite(v)) throw DomainError("evaluation overflowed");
    return v;
}

// ---------------------------------------------------------------------------
// Zero testing

ZeroTestResult is_zero(const ScalarExpr& e, const SymbolList& coords, const Domain& domain,
                       const ZeroTestOptions& options)
{
    if (!(options.tol > 0)) throw Error("is_zero: tolerance must be positive");
    if (domain.dimension() != static_cast<Eigen::Index>(coords.size()))
        throw Error("is_zero: domain dimension does not match coordinate count");
    ZeroTestResult result;
    ScalarExpr s = simplify(e);
    if (s.is_constant(0.0)) return result;

    CompiledExpr f(s, coords);
    DomainSampler sampler(domain, options.seed);
    const std::size_t max_attempts = options.samples * 10;
    EvalOptions eval{1e-12};
    std::size_t accepted = 0;
    for (std::size_t attempt = 0; attempt < max_attempts && accepted < options.samples; ++attempt) {
        Eigen::VectorXd x = sampler.next();
        if (options.accept && !options.accept(x)) continue;
        double v = 0.0;
        try {
            v = f(x, eval);
        } catch (const DomainError&) {
            continue;
        }
        ++accepted;
        result.max_abs = std::max(result.max_abs, std::abs(v));
        if (!(std::abs(v) < options.tol)) {
            result.kind = ZeroKind::NonZero;
            result.witness = x;
            result.samples = accepted;
            return result;
        }
    }
    if (accepted < options.samples) {
        throw SamplingError("is_zero: more than 90% of sample points were singular (" + std::to_string(accepted) +
                            " of " + std::to_string(max_attempts) + " usable)");
    }
    result.kind = ZeroKind::ZeroNumeric;
    result.samples = accepted;
    return result;
}

}  // namespace hierdyn
