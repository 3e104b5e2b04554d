#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hierdyn/liesym.hpp"
#include "hierdyn/quotient.hpp"

using namespace hierdyn;

namespace {

const SymbolList xy = {"x", "y"};

VectorField field(const std::vector<std::string>& comps) { return VectorField::parse(xy, comps); }

LieBasis scaling() { return LieBasis(xy, {field({"x", "y"})}); }
LieBasis rotation() { return LieBasis(xy, {field({"-y", "x"})}); }

CrossSection unit_circle()
{
    return CrossSection::parse(xy, {"x^2 + y^2 - 1"}, {"atan2(y, x)"}, {"theta"}, {}, {true});
}
CrossSection positive_axis() { return CrossSection::parse(xy, {"y"}, {"x"}, {"r"}, {"x > 0"}); }

Domain punctured()
{
    Domain d = Domain::cube(2, -2, 2);
    d.excluded.push_back({Eigen::Vector2d::Zero(), 0.2});
    return d;
}

}  // namespace

TEST(CrossSection, Parse)
{
    CrossSection s = unit_circle();
    EXPECT_EQ(s.chart_dimension(), 1u);
    EXPECT_EQ(s.chart_names, SymbolList{"theta"});
    EXPECT_NEAR(s.constraint_values(Eigen::Vector2d(3, 4))(0), 24.0, 1e-14);
    EXPECT_EQ(CrossSection::parse(xy, {}, {"x", "y"}).chart_names, (SymbolList{"q1", "q2"}));
    EXPECT_THROW(CrossSection::parse(xy, {"z"}, {"x"}), UndeclaredSymbolError);
    EXPECT_FALSE(positive_axis().admits(Eigen::Vector2d(-1, 0)));
    EXPECT_TRUE(positive_axis().admits(Eigen::Vector2d(1, 0)));
}

TEST(CrossSection, AngularChartDifference)
{
    CrossSection s = unit_circle();
    Eigen::VectorXd d =
        s.chart_difference(Eigen::VectorXd::Constant(1, M_PI - 0.01), Eigen::VectorXd::Constant(1, -M_PI + 0.01));
    EXPECT_NEAR(std::abs(d(0)), 0.02, 1e-12);
}

TEST(Canonicalize, ScalingOntoUnitCircle)
{
    Canonical c = canonicalize(scaling(), unit_circle(), Eigen::Vector2d(3, 4));
    EXPECT_LT((c.point - Eigen::Vector2d(0.6, 0.8)).norm(), 1e-9);
    EXPECT_NEAR(c.eps(0), -std::log(5.0), 1e-8);
    EXPECT_LT(c.residual, 1e-10);
}

TEST(Canonicalize, RotationOntoPositiveAxis)
{
    Canonical c = canonicalize(rotation(), positive_axis(), Eigen::Vector2d(0, 2));
    EXPECT_LT((c.point - Eigen::Vector2d(2, 0)).norm(), 1e-9);
    // from the negative axis the first Newton guesses land on the wrong branch
    Canonical d = canonicalize(rotation(), positive_axis(), Eigen::Vector2d(-1.5, 0.01));
    EXPECT_GT(d.point(0), 0);
    EXPECT_NEAR(d.point.norm(), Eigen::Vector2d(-1.5, 0.01).norm(), 1e-9);
}

TEST(Canonicalize, PointOnSectionIsFixed)
{
    Eigen::Vector2d x(std::cos(0.3), std::sin(0.3));
    Canonical c = canonicalize(scaling(), unit_circle(), x);
    EXPECT_EQ(c.point, Eigen::VectorXd(x));
    EXPECT_EQ(c.eps(0), 0.0);
}

TEST(Canonicalize, TrivialQuotient)
{
    LieBasis full(xy, {field({"1", "0"}), field({"0", "1"})});
    try {
        (void)canonicalize(full, CrossSection::parse(xy, {"x", "y"}, {}), Eigen::Vector2d(1, 1));
        FAIL();
    } catch (const QuotientError& e) {
        EXPECT_NE(std::string(e.what()).find("trivial quotient"), std::string::npos);
    }
}

TEST(Canonicalize, MismatchedSectionIsRejected)
{
    EXPECT_THROW((void)canonicalize(scaling(), CrossSection::parse(xy, {"x", "y"}, {}), Eigen::Vector2d(1, 1)),
                 QuotientError);
}

TEST(Canonicalize, UnreachableSectionErrors)
{
    // translating along y never changes x
    CrossSection far = CrossSection::parse(xy, {"x - 3"}, {"y"}, {}, {"x > 0"});
    try {
        (void)canonicalize(LieBasis(xy, {field({"0", "1"})}), far, Eigen::Vector2d(1, 1));
        FAIL();
    } catch (const QuotientError& e) {
        EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
    }
}

TEST(QuotientMap, FirstIntegralOfCircle)
{
    LieBasis g = rotation();
    std::mt19937_64 rng(3);
    DomainSampler pts(punctured(), 1);
    for (int i = 0; i < 30; ++i) {
        Eigen::VectorXd x = pts.next();
        EXPECT_NEAR(quotient_map(g, positive_axis(), x)(0), x.norm(), 1e-9);
    }
    EXPECT_TRUE(first_integral_check(parse("sqrt(x^2 + y^2)", xy), g[0], punctured()).passed());
}

TEST(QuotientMap, ScalingMatchesAngle)
{
    Eigen::Vector2d x(-1.2, 0.7);
    EXPECT_NEAR(quotient_map(scaling(), unit_circle(), x)(0), std::atan2(0.7, -1.2), 1e-9);
}

TEST(QuotientMap, IdempotentAndOrbitConstant)
{
    LieBasis g = scaling();
    CrossSection s = unit_circle();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> eps(-1, 1);
    DomainSampler pts(punctured(), 2);
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd x = pts.next();
        Canonical c = canonicalize(g, s, x);
        Canonical cc = canonicalize(g, s, c.point);
        EXPECT_LT((cc.point - c.point).norm(), 1e-9);
        Eigen::VectorXd e(1);
        e << eps(rng);
        Eigen::VectorXd y = group_flow(g, e, x, {IntegratorMethod::RK45, 1e-12, 1e-14});
        EXPECT_LT(s.chart_difference(quotient_map(g, s, y), quotient_map(g, s, x)).norm(), 1e-8);
    }
}

TEST(VerifyQuotient, ScalingPasses)
{
    CheckOptions o;
    o.tol = 1e-6;
    o.samples = 64;
    CheckReport r = verify_quotient_invariance(scaling(), unit_circle(), punctured(), o);
    EXPECT_TRUE(r.passed()) << r.details;
}

TEST(VerifyQuotient, FirstIntegralPassesAndAgrees)
{
    CheckOptions o;
    o.tol = 1e-6;
    o.samples = 64;
    EXPECT_TRUE(verify_quotient_invariance(rotation(), positive_axis(), punctured(), o).passed());
    EXPECT_TRUE(first_integral_check(parse("x^2 + y^2", xy), rotation()[0], punctured()).passed());
}

TEST(VerifyQuotient, WrongChartFails)
{
    CheckOptions o;
    o.tol = 1e-6;
    o.samples = 64;
    CheckReport r = verify_quotient_invariance(scaling(), CrossSection::parse(xy, {}, {"x"}), punctured(), o);
    EXPECT_EQ(r.verdict, Verdict::Fail);
    EXPECT_TRUE(r.witness.has_value());
}

TEST(PartitionAgreement, ScalingVersusRatio)
{
    LieBasis g = scaling();
    CrossSection s = unit_circle();
    Domain upper(Eigen::Vector2d(-2, 0.1), Eigen::Vector2d(2, 2));
    PointMap f = [&](const Eigen::VectorXd& x) { return quotient_map(g, s, x); };
    PointMap h = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x(0) / x(1)); };
    CheckReport r = partition_agreement(g, f, h, upper, 100, 1e-7, 4);
    EXPECT_TRUE(r.passed()) << r.details;

    // the radius induces a different partition
    PointMap radius = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x.norm()); };
    EXPECT_EQ(partition_agreement(g, f, radius, upper, 100, 1e-7, 4).verdict, Verdict::Fail);
}

TEST(SectionOverlap, TwoChartsOfTheSameQuotient)
{
    CrossSection circle = unit_circle();
    CrossSection line = CrossSection::parse(xy, {"y - 1"}, {"atan2(y, x)"}, {"theta"}, {"y > 0"}, {true});
    CheckOptions o;
    o.tol = 1e-6;
    o.samples = 16;
    EXPECT_TRUE(section_overlap_check(scaling(), circle, line, punctured(), o).passed());
    // x = cot(theta) on the line is a monotone chart change, so the partition agrees
    CrossSection cot = CrossSection::parse(xy, {"y - 1"}, {"x"}, {}, {"y > 0"});
    EXPECT_TRUE(section_overlap_check(scaling(), circle, cot, punctured(), o).passed());
    // a constant chart collapses every orbit
    CrossSection other = CrossSection::parse(xy, {"y - 1"}, {"1"}, {}, {"y > 0"});
    EXPECT_EQ(section_overlap_check(scaling(), circle, other, punctured(), o).verdict, Verdict::Fail);
}
