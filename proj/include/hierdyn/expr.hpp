#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hierdyn/error.hpp"
#include "hierdyn/sampling.hpp"

namespace hierdyn {

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t position);
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class UndeclaredSymbolError : public Error {
public:
    explicit UndeclaredSymbolError(const std::string& symbol);
    const std::string& symbol() const { return symbol_; }

private:
    std::string symbol_;
};

/// Evaluation hit an analytic singularity (division by zero, log of a
/// nonpositive number, even root of a negative number, overflow).
class DomainError : public Error {
public:
    using Error::Error;
};

class UnboundSymbolError : public Error {
public:
    using Error::Error;
};

using SymbolList = std::vector<std::string>;

/// Exact rational exponent p/q with q > 0 and gcd(p, q) = 1.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1);

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }

    friend bool operator==(const Rational&, const Rational&) = default;
    friend auto operator<=>(const Rational& a, const Rational& b)
    {
        return (static_cast<__int128>(a.num) * b.den) <=> (static_cast<__int128>(b.num) * a.den);
    }
    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
};

enum class Op {
    Const,
    Symbol,
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Abs,
    Sqrt,
    Atan,
    Atan2,
};

class ScalarExpr;

namespace detail {
struct Node;
}

/// Immutable symbolic scalar expression over named coordinates.
///
/// Values share structure through reference counting and never change after
/// construction, so they may be copied freely and used across threads.
class ScalarExpr {
public:
    /// The constant 0.
    ScalarExpr();
    ScalarExpr(double value);  // NOLINT(google-explicit-constructor)

    static ScalarExpr constant(double value);
    static ScalarExpr symbol(std::string name);
    static ScalarExpr unary(Op op, ScalarExpr arg);
    static ScalarExpr binary(Op op, ScalarExpr lhs, ScalarExpr rhs);
    static ScalarExpr pow(ScalarExpr base, Rational exponent);

    Op op() const;
    double value() const;             // Const only
    const std::string& name() const;  // Symbol only
    Rational exponent() const;        // Pow only
    std::size_t arity() const;
    const ScalarExpr& arg(std::size_t i) const;

    bool is_constant() const { return op() == Op::Const; }
    bool is_constant(double v) const { return op() == Op::Const && value() == v; }

private:
    explicit ScalarExpr(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const detail::Node> node_;
};

ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b);
ScalarExpr operator-(const ScalarExpr& a);

ScalarExpr pow(const ScalarExpr& base, Rational exponent);
ScalarExpr sin(const ScalarExpr& e);
ScalarExpr cos(const ScalarExpr& e);
ScalarExpr tan(const ScalarExpr& e);
ScalarExpr exp(const ScalarExpr& e);
ScalarExpr log(const ScalarExpr& e);
ScalarExpr abs(const ScalarExpr& e);
ScalarExpr sqrt(const ScalarExpr& e);
ScalarExpr atan(const ScalarExpr& e);
ScalarExpr atan2(const ScalarExpr& y, const ScalarExpr& x);

/// Structural equality (same tree shape, same constants bit for bit).
bool structurally_equal(const ScalarExpr& a, const ScalarExpr& b);

/// Total order on trees; consistent with structurally_equal.
int compare(const ScalarExpr& a, const ScalarExpr& b);

/// Sorted, de-duplicated list of the symbols occurring in e.
SymbolList symbols_of(const ScalarExpr& e);

/// Number of nodes in the tree.
std::size_t node_count(const ScalarExpr& e);

/// Parses `text` using the expression grammar. Every symbol must appear in `coords`.
ScalarExpr parse(std::string_view text, const SymbolList& coords);

/// Prints in a form that parse() reads back to the same tree.
std::string to_string(const ScalarExpr& e);

/// Binding of coordinate names to values.
struct Binding {
    const SymbolList& names;
    std::span<const double> values;
};

struct EvalOptions {
    /// Denominators (and log arguments) with magnitude at or below this are singular.
    double singular_eps = 0.0;
};

double evaluate(const ScalarExpr& e, const Binding& point, EvalOptions options = {});

/// Exact symbolic partial derivative, simplified.
ScalarExpr differentiate(const ScalarExpr& e, const std::string& symbol);

/// Rule-based simplification: constant folding, 0/1 identities and merging of
/// like terms in sums of monomials. Idempotent.
ScalarExpr simplify(const ScalarExpr& e);

/// Replaces every occurrence of `symbol` by `replacement`.
ScalarExpr substitute(const ScalarExpr& e, const std::string& symbol, const ScalarExpr& replacement);

/// Flat postfix form of an expression with symbols resolved to coordinate
/// indices. Evaluation is allocation-free and thread-safe.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const ScalarExpr& e, const SymbolList& coords);

    double operator()(std::span<const double> x, EvalOptions options = {}) const;
    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const
    {
        return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), options);
    }

    std::size_t dimension() const { return dimension_; }

private:
    struct Instr {
        Op op;
        std::int32_t index = 0;
        double value = 0.0;
        Rational exponent{};
    };
    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
    std::size_t dimension_ = 0;
};

enum class ZeroKind { ZeroSymbolic, ZeroNumeric, NonZero };

struct ZeroTestResult {
    ZeroKind kind = ZeroKind::ZeroSymbolic;
    std::optional<Eigen::VectorXd> witness;
    /// Largest |e| seen over the accepted samples (0 for symbolic zeros).
    double max_abs = 0.0;
    std::size_t samples = 0;

    bool is_zero() const { return kind != ZeroKind::NonZero; }
};

struct ZeroTestOptions {
    double tol = 1e-9;
    std::size_t samples = 64;
    std::uint64_t seed = 0;
    /// Sample points rejected by this predicate are treated like singular ones.
    std::function<bool(const Eigen::VectorXd&)> accept;
};

/// Decides whether e vanishes identically on `domain`: symbolically if the
/// simplifier reduces it to 0, otherwise by low-discrepancy sampling.
ZeroTestResult is_zero(const ScalarExpr& e, const SymbolList& coords, const Domain& domain,
                       const ZeroTestOptions& options = {});

}  // namespace hierdyn
