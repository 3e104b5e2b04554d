#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hierdyn/expr.hpp"
#include "test_util.hpp"

using namespace hierdyn;

namespace {

const SymbolList xy = {"x", "y"};

double eval_at(const ScalarExpr& e, const SymbolList& coords, std::vector<double> pt, double eps = 0.0)
{
    return evaluate(e, Binding{coords, pt}, EvalOptions{eps});
}

bool vanishes_symbolically(const ScalarExpr& e, const SymbolList& coords = xy)
{
    return is_zero(e, coords, Domain::cube(static_cast<Eigen::Index>(coords.size()), 0.5, 2.0)).kind ==
           ZeroKind::ZeroSymbolic;
}

// Smooth, everywhere-defined expressions for algebraic identities.
ScalarExpr smooth_expr(std::mt19937_64& rng, const SymbolList& coords, int depth)
{
    std::uniform_int_distribution<int> pick(0, 7);
    std::uniform_int_distribution<std::size_t> sym(0, coords.size() - 1);
    std::uniform_int_distribution<int> small(-3, 3);
    int k = depth <= 0 ? pick(rng) % 2 : pick(rng);
    switch (k) {
    case 0: return ScalarExpr(static_cast<double>(small(rng)));
    case 1: return ScalarExpr::symbol(coords[sym(rng)]);
    case 2: return smooth_expr(rng, coords, depth - 1) + smooth_expr(rng, coords, depth - 1);
    case 3: return smooth_expr(rng, coords, depth - 1) * smooth_expr(rng, coords, depth - 1);
    case 4: return sin(smooth_expr(rng, coords, depth - 1));
    case 5: return atan(smooth_expr(rng, coords, depth - 1));
    case 6: return pow(smooth_expr(rng, coords, depth - 1), Rational(2));
    default: return cos(smooth_expr(rng, coords, depth - 1)) - smooth_expr(rng, coords, depth - 1);
    }
}

}  // namespace

TEST(Parse, SumOfPowerAndSymbol)
{
    ScalarExpr e = parse("x^2 + y", xy);
    ASSERT_EQ(e.op(), Op::Add);
    EXPECT_EQ(e.arg(0).op(), Op::Pow);
    EXPECT_EQ(e.arg(0).arg(0).name(), "x");
    EXPECT_EQ(e.arg(0).exponent(), Rational(2));
    EXPECT_EQ(e.arg(1).name(), "y");
}

TEST(Parse, UnaryMinus)
{
    ScalarExpr e = parse("-y", xy);
    ASSERT_EQ(e.op(), Op::Neg);
    EXPECT_EQ(e.arg(0).name(), "y");
}

TEST(Parse, UnaryMinusBindsLooserThanPower)
{
    ScalarExpr e = parse("-x^2", xy);
    ASSERT_EQ(e.op(), Op::Neg);
    EXPECT_EQ(e.arg(0).op(), Op::Pow);
    EXPECT_DOUBLE_EQ(eval_at(e, xy, {3, 0}), -9.0);
}

TEST(Parse, LogOfAbs)
{
    ScalarExpr e = parse("x*log(abs(x))", xy);
    EXPECT_EQ(e.op(), Op::Mul);
    EXPECT_EQ(e.arg(1).op(), Op::Log);
    EXPECT_EQ(e.arg(1).arg(0).op(), Op::Abs);
}

TEST(Parse, RationalExponents)
{
    EXPECT_EQ(parse("x^(1/3)", xy).exponent(), Rational(1, 3));
    EXPECT_EQ(parse("x^(-2)", xy).exponent(), Rational(-2));
    EXPECT_EQ(parse("x^0.5", xy).exponent(), Rational(1, 2));
    EXPECT_EQ(parse("x^-1", xy).exponent(), Rational(-1));
}

TEST(Parse, AllFunctionsAndAtan2)
{
    ScalarExpr e = parse("sin(x) + cos(y) + tan(x) + exp(y) + log(x) + abs(y) + sqrt(x) + atan(y) + atan2(y, x)", xy);
    EXPECT_EQ(symbols_of(e), xy);
}

TEST(Parse, SyntaxErrorCarriesPosition)
{
    try {
        (void)parse("x + * y", xy);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.position(), 4u);
    }
    EXPECT_THROW((void)parse("(x + y", xy), ParseError);
    EXPECT_THROW((void)parse("x y", xy), ParseError);
    EXPECT_THROW((void)parse("", xy), ParseError);
    EXPECT_THROW((void)parse("foo(x)", xy), ParseError);
    EXPECT_THROW((void)parse("atan2(x)", xy), ParseError);
}

TEST(Parse, UndeclaredSymbolIsNamed)
{
    try {
        (void)parse("x + z", xy);
        FAIL() << "expected an undeclared-symbol error";
    } catch (const UndeclaredSymbolError& e) {
        EXPECT_EQ(e.symbol(), "z");
    }
}

TEST(Parse, TimeSymbolExplainsAutonomyRestriction)
{
    try {
        (void)parse("x*t", xy);
        FAIL();
    } catch (const UndeclaredSymbolError& e) {
        EXPECT_NE(std::string(e.what()).find("nonautonomous"), std::string::npos);
    }
}

TEST(Parse, ExponentMustBeRationalConstant)
{
    EXPECT_THROW((void)parse("x^y", xy), ParseError);
    EXPECT_THROW((void)parse("x^(1/0)", xy), ParseError);
}

TEST(Evaluate, Examples)
{
    EXPECT_EQ(eval_at(parse("sin(x)", xy), xy, {0, 0}), 0.0);
    EXPECT_EQ(eval_at(parse("x^2 + y^2", xy), xy, {3, 4}), 25.0);
    EXPECT_THROW((void)eval_at(parse("x/y", xy), xy, {1, 0}), DomainError);
}

TEST(Evaluate, Singularities)
{
    EXPECT_THROW((void)eval_at(parse("log(x)", xy), xy, {0, 1}), DomainError);
    EXPECT_THROW((void)eval_at(parse("log(x)", xy), xy, {-1, 1}), DomainError);
    EXPECT_THROW((void)eval_at(parse("sqrt(x)", xy), xy, {-1, 1}), DomainError);
    EXPECT_THROW((void)eval_at(parse("x^(-1)", xy), xy, {0, 1}), DomainError);
    EXPECT_THROW((void)eval_at(parse("atan2(y, x)", xy), xy, {0, 0}), DomainError);
    EXPECT_THROW((void)eval_at(parse("x/y", xy), xy, {1, 1e-13}, 1e-12), DomainError);
    EXPECT_NEAR(eval_at(parse("x^(1/3)", xy), xy, {-8, 0}), -2.0, 1e-14);
}

TEST(Evaluate, UnboundSymbol)
{
    ScalarExpr e = parse("x + y", xy);
    SymbolList only_x = {"x"};
    std::vector<double> pt = {1.0};
    EXPECT_THROW((void)evaluate(e, Binding{only_x, pt}), UnboundSymbolError);
}

TEST(Differentiate, Examples)
{
    EXPECT_TRUE(vanishes_symbolically(differentiate(parse("x*y", xy), "x") - parse("y", xy)));
    EXPECT_TRUE(vanishes_symbolically(differentiate(parse("x^2 + y^2", xy), "x") - parse("2*x", xy)));
    EXPECT_TRUE(vanishes_symbolically(differentiate(parse("log(abs(x))", xy), "x") - parse("1/x", xy)));
}

TEST(Differentiate, ConstantsAndOtherSymbols)
{
    EXPECT_TRUE(differentiate(parse("3.5", xy), "x").is_constant(0.0));
    EXPECT_TRUE(differentiate(parse("sin(y)", xy), "x").is_constant(0.0));
}

TEST(Differentiate, AgreesWithCentralDifferences)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    int checked = 0;
    for (int trial = 0; trial < 400; ++trial) {
        ScalarExpr e = test_support::random_expr(rng, xy, 4);
        ScalarExpr d = differentiate(e, "x");
        std::vector<double> pt = {unif(rng), unif(rng)};
        auto f = [&](double dx) { return eval_at(e, xy, {pt[0] + dx, pt[1]}, 1e-12); };
        try {
            double f0 = f(0.0);
            if (std::abs(f0) > 1e4) continue;
            double fd1 = (f(1e-6) - f(-1e-6)) / 2e-6;
            double fd2 = (f(5e-7) - f(-5e-7)) / 1e-6;
            // skip kinks and points next to singularities
            if (std::abs(fd1 - fd2) > 1e-4 * std::max(1.0, std::abs(fd1))) continue;
            double sym = eval_at(d, xy, pt, 1e-12);
            EXPECT_LT(std::abs(sym - fd1), 1e-6 * std::max(1.0, std::abs(sym)))
                << to_string(e) << " at " << pt[0] << "," << pt[1];
            ++checked;
        } catch (const DomainError&) {
        }
    }
    EXPECT_GT(checked, 150);
}

TEST(Differentiate, IsLinear)
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        ScalarExpr e1 = smooth_expr(rng, xy, 3), e2 = smooth_expr(rng, xy, 3);
        ScalarExpr lhs = differentiate(ScalarExpr(2.5) * e1 + ScalarExpr(-1.5) * e2, "y");
        ScalarExpr rhs = ScalarExpr(2.5) * differentiate(e1, "y") + ScalarExpr(-1.5) * differentiate(e2, "y");
        ZeroTestOptions o;
        o.seed = static_cast<std::uint64_t>(trial);
        EXPECT_TRUE(is_zero(lhs - rhs, xy, Domain::cube(2, -1.5, 1.5), o).is_zero())
            << to_string(e1) << " | " << to_string(e2);
    }
}

TEST(IsZero, Examples)
{
    EXPECT_EQ(is_zero(parse("x - x", xy), xy, Domain::cube(2, -1, 1)).kind, ZeroKind::ZeroSymbolic);
    EXPECT_EQ(is_zero(parse("-y*2*x + x*2*y", xy), xy, Domain::cube(2, -1, 1)).kind, ZeroKind::ZeroSymbolic);
    ZeroTestResult r = is_zero(parse("x*y", xy), xy, Domain::cube(2, -1, 1));
    EXPECT_EQ(r.kind, ZeroKind::NonZero);
    ASSERT_TRUE(r.witness.has_value());
    EXPECT_GT(std::abs((*r.witness)[0] * (*r.witness)[1]), 1e-9);
}

TEST(IsZero, NumericZeroForIdentitiesTheSimplifierMisses)
{
    ZeroTestResult r = is_zero(parse("sin(x)^2 + cos(x)^2 - 1", xy), xy, Domain::cube(2, -3, 3));
    EXPECT_EQ(r.kind, ZeroKind::ZeroNumeric);
    EXPECT_GE(r.samples, 64u);
    EXPECT_LT(r.max_abs, 1e-9);
}

TEST(IsZero, RejectsSingularSamples)
{
    // log(x) is undefined on the left half of the box
    ZeroTestResult r = is_zero(parse("log(x^2) - 2*log(abs(x))", xy), xy, Domain::cube(2, -1, 1));
    EXPECT_TRUE(r.is_zero());
}

TEST(IsZero, SamplingFailureWhenAlmostEverythingIsSingular)
{
    ZeroTestOptions o;
    o.accept = [](const Eigen::VectorXd& p) { return p(0) > 0.99; };
    EXPECT_THROW((void)is_zero(parse("sin(x)^2 + cos(x)^2 - 1", xy), xy, Domain::cube(2, -1, 1), o), SamplingError);
}

TEST(Simplify, MergesLikeTerms)
{
    EXPECT_TRUE(simplify(parse("x + x - 2*x", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("(x + y)^2 - x^2 - 2*x*y - y^2", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("x*y/y - x", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("sqrt(x)*sqrt(x) - x", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("abs(x)^2 - x^2", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("0*sin(x) + 1*y - y", xy)).is_constant(0.0));
    EXPECT_TRUE(simplify(parse("2 + 3*4", xy)).is_constant(14.0));
}

TEST(Simplify, KeepsBranchSensitivePowers)
{
    // (x^2)^(1/2) is |x|, not x
    ScalarExpr e = simplify(parse("(x^2)^(1/2) - x", xy));
    EXPECT_FALSE(e.is_constant(0.0));
    EXPECT_NEAR(eval_at(e, xy, {-2, 0}), 4.0, 1e-14);
}

TEST(Simplify, IsIdempotent)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        ScalarExpr s = simplify(test_support::random_expr(rng, xy, 5));
        EXPECT_TRUE(structurally_equal(simplify(s), s)) << to_string(s);
    }
}

TEST(RoundTrip, PrintThenParse)
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> depth(0, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        ScalarExpr e = test_support::random_expr(rng, xy, depth(rng));
        ScalarExpr back = parse(to_string(e), xy);
        ASSERT_TRUE(structurally_equal(back, e)) << to_string(e) << " -> " << to_string(back);
        ScalarExpr s = simplify(e);
        ASSERT_TRUE(structurally_equal(parse(to_string(s), xy), s)) << to_string(s);
    }
}

TEST(RoundTrip, NegativeConstantsAndExponents)
{
    for (const char* text : {"-2*x", "x - -3", "x^(-1/2)", "(-x)^3", "-(x + y)", "x/(y*x)", "2^(1/2)", "1e-300*x"}) {
        ScalarExpr e = parse(text, xy);
        EXPECT_TRUE(structurally_equal(parse(to_string(e), xy), e)) << text << " printed as " << to_string(e);
    }
}

TEST(Compiled, MatchesTreeEvaluation)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        ScalarExpr e = test_support::random_expr(rng, xy, 5);
        CompiledExpr c(e, xy);
        std::vector<double> pt = {unif(rng), unif(rng)};
        double tree = 0.0;
        bool tree_ok = true;
        try {
            tree = eval_at(e, xy, pt, 1e-12);
        } catch (const DomainError&) {
            tree_ok = false;
        }
        if (tree_ok) {
            double fast = c(std::span<const double>(pt), EvalOptions{1e-12});
            EXPECT_EQ(fast, tree) << to_string(e);
        } else {
            EXPECT_THROW((void)c(std::span<const double>(pt), EvalOptions{1e-12}), DomainError) << to_string(e);
        }
    }
}

TEST(Compiled, DeepExpressionsUseHeapStack)
{
    ScalarExpr e = ScalarExpr::symbol("x");
    for (int i = 0; i < 100; ++i) e = ScalarExpr(1.0) + e * ScalarExpr::symbol("y");
    // right-nested product chain keeps every partial result on the stack
    ScalarExpr deep = ScalarExpr::symbol("x");
    for (int i = 0; i < 100; ++i) deep = ScalarExpr::symbol("y") + deep;
    CompiledExpr c(deep, xy);
    std::vector<double> pt = {1.0, 1.0};
    EXPECT_EQ(c(std::span<const double>(pt)), 101.0);
    EXPECT_EQ(CompiledExpr(e, xy)(std::span<const double>(pt)), 101.0);
}

TEST(Rational, Normalizes)
{
    EXPECT_EQ(Rational(2, 4), Rational(1, 2));
    EXPECT_EQ(Rational(3, -6), Rational(-1, 2));
    EXPECT_EQ(Rational(1, 2) + Rational(1, 3), Rational(5, 6));
    EXPECT_LT(Rational(-1, 2), Rational(1, 3));
    EXPECT_THROW(Rational(1, 0), Error);
}

TEST(Expr, ConstantsMustBeFinite)
{
    EXPECT_THROW((void)ScalarExpr::constant(std::nan("")), Error);
    EXPECT_THROW((void)ScalarExpr::constant(INFINITY), Error);
}

TEST(Expr, SubstituteReplacesSymbol)
{
    ScalarExpr e = substitute(parse("x^2 + y", xy), "x", parse("y + 1", xy));
    EXPECT_DOUBLE_EQ(eval_at(e, xy, {100, 2}), 11.0);
}
