// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "hierdyn/flow.hpp"
#include "hierdyn/liesym.hpp"
#include "hierdyn/linear.hpp"
#include "hierdyn/quotient.hpp"
#include "test_util.hpp"

using namespace hierdyn;

namespace {

const SymbolList xy = {"x", "y"};

struct Criterion {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail << " [violated: " << what << "]";
        }
    }
};

int failures = 0;

void report(int id, const std::string& title, Criterion& c, double seconds)
{
    if (!c.ok) ++failures;
    std::printf("[%s] %d %s:%s (%.1f s)\n", c.ok ? "PASS" : "FAIL", id, title.c_str(), c.detail.str().c_str(), seconds);
    std::fflush(stdout);
}

template <typename F>
void criterion(int id, const std::string& title, F&& body)
{
    Criterion c;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << " [exception: " << e.what() << "]";
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, title, c, s);
}

VectorField field(const std::vector<std::string>& comps, const SymbolList& coords = xy)
{
    return VectorField::parse(coords, comps);
}

IntegratorConfig tight()
{
    IntegratorConfig c;
    c.rel_tol = 1e-12;
    c.abs_tol = 1e-14;
    return c;
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> n01;
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) M(i, j) = n01(rng);
    return M;
}

Eigen::MatrixXd orthonormal(const Eigen::MatrixXd& M)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    return qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols());
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------

void circle_suite(Criterion& c)
{
    VectorField v = field({"-y", "x"});
    Domain d = Domain::cube(2, -2, 2);
    d.excluded.push_back({Eigen::Vector2d::Zero(), 0.2});

    CheckReport sym = is_symmetry(v, field({"x", "y"}), d);
    c.require(sym.passed() && sym.method == Method::Symbolic, "scaling symmetry is symbolic");

    c.require(first_integral_check(parse("x^2 + y^2", xy), v, d).passed(), "x^2 + y^2 is a first integral");

    auto radius = ProjectionMap::parse(xy, {"r"}, {"x^2 + y^2"});
    auto angle = ProjectionMap::parse(xy, {"theta"}, {"atan2(y, x)"}, {}, {true});
    c.require(classify_projection(radius, v, d).kind == DynamicsClass::TrivialDynamics, "radius is trivial");
    c.require(classify_projection(angle, v, d).kind == DynamicsClass::NontrivialDynamics, "angle is nontrivial");

    std::vector<Eigen::VectorXd> x0;
    DomainSampler pts(d, 1);
    for (int i = 0; i < 8; ++i) x0.push_back(pts.next());
    CheckReport dia = diagram_check(v, angle, VectorField::parse({"theta"}, {"1"}), x0, 10.0, tight(), 1e-6);
    c.require(dia.passed() && dia.max_residual < 1e-6, "angle diagram residual < 1e-6 over T = 10");
    c.detail << " symmetry " << to_string(sym.method) << ", diagram residual " << fmt(dia.max_residual);
}

// ---------------------------------------------------------------------------

void route_equivalence(Criterion& c)
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(2, 6);
    int agree = 0, invariant = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index m = dim(rng);
        std::uniform_int_distribution<int> kd(1, static_cast<int>(m) - 1);
        const Eigen::Index k = kd(rng);
        Eigen::MatrixXd A, P;
        if (trial % 2 == 0) {
            // invariant by construction: A maps span(S e_1..e_k) into itself
            Eigen::MatrixXd S = gaussian(rng, m, m) + 3 * Eigen::MatrixXd::Identity(m, m);
            Eigen::MatrixXd T = gaussian(rng, m, m);
            T.bottomLeftCorner(m - k, k).setZero();
            A = S * T * S.inverse();
            Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(S.leftCols(k)).householderQ();
            Eigen::MatrixXd R = gaussian(rng, m - k, m - k) + 3 * Eigen::MatrixXd::Identity(m - k, m - k);
            P = R * Q.rightCols(m - k).transpose();
        } else {
            A = gaussian(rng, m, m);
            P = gaussian(rng, m - k, m);
        }
        bool a = kernel_invariance_check(A, P, 1e-8).report.passed();
        bool b = structure_constants_invariant(A, P, 1e-8);
        agree += a == b;
        invariant += a;
    }
    c.require(agree == 200, "route A and route B agree on every pair");

    Eigen::MatrixXd rot(2, 2);
    rot << 0, -1, 1, 0;
    int rot_fail = 0, rot_total = 0;
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    for (int i = 0; i < 360; ++i) {
        double th = i * M_PI / 180.0;
        Eigen::MatrixXd P(1, 2);
        P << std::cos(th) * scale(rng), std::sin(th) * scale(rng);
        ++rot_total;
        rot_fail += kernel_invariance_check(rot, P, 1e-8).report.verdict == Verdict::Fail;
    }
    c.require(rot_fail == rot_total, "every 1x2 P fails for the rotation");
    c.require(enumerate_linear_reductions(rot).empty(), "rotation has no real reduction");
    c.detail << " agreement " << agree << "/200 (" << invariant << " invariant), rotation fails " << rot_fail << "/"
             << rot_total;
}

// ---------------------------------------------------------------------------

void jordan_suite(Criterion& c)
{
    const double a = -0.5;
    Eigen::MatrixXd A(2, 2);
    A << a, 1, 0, a;
    Eigen::MatrixXd Py(1, 2), Px(1, 2);
    Py << 0, 1;
    Px << 1, 0;

    c.require(kernel_invariance_check(A, Py).report.passed(), "P = [0 1] passes");
    Eigen::MatrixXd B = reduced_matrix(A, Py);
    c.require(B.size() == 1 && std::abs(B(0, 0) - a) < 1e-12, "B = [a]");

    VectorField v = linear_field(A, xy);
    auto py = ProjectionMap::linear(xy, Py);
    auto px = ProjectionMap::linear(xy, Px);
    std::vector<Eigen::VectorXd> x0 = {Eigen::Vector2d(1, 1), Eigen::Vector2d(-2, 0.5), Eigen::Vector2d(0.3, -1.7),
                                       Eigen::Vector2d(5, 1)};
    CheckReport dia = diagram_check(v, py, VectorField::parse({"p1"}, {"-0.5*p1"}), x0, 5.0, tight(), 1e-8);
    c.require(dia.passed() && dia.max_residual < 1e-8, "diagram residual < 1e-8 over T = 5");

    c.require(kernel_invariance_check(A, Px).report.verdict == Verdict::Fail, "P = [1 0] fails");
    double div = fiber_divergence(v, px, Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1), 1.0, tight());
    c.require(div > 1e-2, "fiber divergence > 1e-2 by t = 1");

    // the nonlinear symmetry exactly as stated, with a = 1 on x in [0.5, 2], y in [-1, 1]
    VectorField vj = field({"x + y", "y"});
    Domain box(Eigen::Vector2d(0.5, -1), Eigen::Vector2d(2, 1));
    CheckOptions o;
    o.tol = 1e-7;
    VectorField w = field({"x*((1*y - x*log(abs(x)))/(1*x))", "0"});
    CheckReport sym = is_symmetry(vj, w, box, o);
    c.require(sym.passed(), "w = x F((ay - x log|x|)/(ax)) dx with F = identity is a symmetry");

    c.detail << " B = " << fmt(B(0, 0)) << ", diagram residual " << fmt(dia.max_residual) << ", divergence " << fmt(div)
             << ", nonlinear symmetry " << to_string(sym.verdict) << " (residual " << fmt(sym.max_residual) << ")";
    if (!sym.passed()) {
        // what does commute with v, for contrast
        CheckReport alt1 = is_symmetry(vj, field({"y", "0"}), box, o);
        Domain upper(Eigen::Vector2d(0.5, 0.2), Eigen::Vector2d(2, 1));
        CheckReport alt2 = is_symmetry(vj, field({"y*atan(x/y - log(abs(y)))", "0"}), upper, o);
        std::printf("  NOTE: [v, w] = %s dx for the stated w; y dx is %s, y*H(x/y - log|y|) dx is %s\n",
                    to_string(lie_bracket(vj, w)[0]).c_str(), to_string(alt1.verdict).c_str(),
                    to_string(alt2.verdict).c_str());
    }
}

// ---------------------------------------------------------------------------

struct Subsystems {
    Eigen::MatrixXd S, Sinv;
    VectorField v;
    Eigen::MatrixXd A;
};

Subsystems lorenz_rossler()
{
    Eigen::MatrixXd K(6, 6);
    K << 0, 1, 0, 1, 0, 0,  //
        0, 0, 1, 0, 1, 0,   //
        1, 0, 0, 0, 0, 1,   //
        0, 1, 0, 0, 1, 0,   //
        0, 0, 1, 0, 0, 1,   //
        1, 0, 0, 1, 0, 0;
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(6, 6) + 0.25 * K;
    Eigen::MatrixXd Sinv = S.inverse();
    SymbolList coords = {"x1", "x2", "x3", "x4", "x5", "x6"};

    // z = S^-1 x as expressions, then dx/dt = S f(z)
    std::vector<ScalarExpr> z;
    for (int i = 0; i < 6; ++i) {
        ScalarExpr e(0.0);
        for (int j = 0; j < 6; ++j) e = e + ScalarExpr(Sinv(i, j)) * ScalarExpr::symbol(coords[j]);
        z.push_back(e);
    }
    std::vector<ScalarExpr> f = {
        ScalarExpr(10.0) * (z[1] - z[0]),
        z[0] * (ScalarExpr(28.0) - z[2]) - z[1],
        z[0] * z[1] - ScalarExpr(8.0 / 3.0) * z[2],
        -z[4] - z[5],
        z[3] + ScalarExpr(0.2) * z[4],
        ScalarExpr(0.2) + z[5] * (z[3] - ScalarExpr(5.7)),
    };
    std::vector<ScalarExpr> comps;
    for (int i = 0; i < 6; ++i) {
        ScalarExpr e(0.0);
        for (int j = 0; j < 6; ++j) {
            if (S(i, j) != 0.0) e = e + ScalarExpr(S(i, j)) * f[j];
        }
        comps.push_back(simplify(e));
    }

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(6, 6);
    J.topLeftCorner(3, 3) << -10, 10, 0, 28, -1, 0, 0, 0, -8.0 / 3.0;
    J.bottomRightCorner(3, 3) << 0, -1, -1, 1, 0.2, 0, 0, 0, -5.7;
    return {S, Sinv, VectorField(coords, comps), S * J * Sinv};
}

void decomposability(Criterion& c)
{
    Subsystems sys = lorenz_rossler();
    auto reds = enumerate_linear_reductions(sys.A);
    Eigen::MatrixXd lorenz_dirs = orthonormal(sys.S.leftCols(3));
    Eigen::MatrixXd rossler_dirs = orthonormal(sys.S.rightCols(3));

    const LinearReduction<double>* found[2] = {nullptr, nullptr};
    double best[2] = {1.0, 1.0};
    for (const auto& r : reds) {
        double al = subspace_angle(r.W, lorenz_dirs), ar = subspace_angle(r.W, rossler_dirs);
        if (al < best[0]) best[0] = al, found[0] = &r;
        if (ar < best[1]) best[1] = ar, found[1] = &r;
    }
    c.require(best[0] < 1e-8 && best[1] < 1e-8, "both 3-dim subspaces recovered (angle < 1e-8)");
    c.detail << " " << reds.size() << " reductions, angles " << fmt(best[0]) << " / " << fmt(best[1]);
    if (!found[0] || !found[1]) return;

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lz(-10, 10), lzz(10, 30), rz(-3, 3), eps(-1, 1);
    auto base_point = [&] {
        Eigen::VectorXd z(6);
        z << lz(rng), lz(rng), lzz(rng), rz(rng), rz(rng), std::abs(rz(rng)) * 0.1;
        return Eigen::VectorXd(sys.S * z);
    };
    const SymbolList& coords = sys.v.coords();

    auto divergence_along = [&](const ProjectionMap& pi, const Eigen::MatrixXd& kernel) {
        double worst = 0.0;
        for (int i = 0; i < 6; ++i) {
            Eigen::VectorXd x = base_point();
            Eigen::VectorXd shift(kernel.cols());
            for (Eigen::Index j = 0; j < shift.size(); ++j) shift[j] = eps(rng);
            Eigen::VectorXd y = x + kernel * shift;
            worst = std::max(worst, fiber_divergence(sys.v, pi, x, y, 5.0, tight()));
        }
        return worst;
    };

    double div_valid[2];
    for (int s = 0; s < 2; ++s) {
        auto pi = ProjectionMap::linear(coords, found[s]->P);
        div_valid[s] = divergence_along(pi, found[s]->W);
    }
    c.require(div_valid[0] < 1e-6 && div_valid[1] < 1e-6, "recovered projections keep fibers together (< 1e-6)");

    // z1, z2 and z4: observes half of each subsystem
    Eigen::MatrixXd Pmix(3, 6);
    Pmix << sys.Sinv.row(0), sys.Sinv.row(1), sys.Sinv.row(3);
    Eigen::MatrixXd Wmix = kernel_basis(Pmix);
    double div_mix = divergence_along(ProjectionMap::linear(coords, Pmix), Wmix);
    c.require(div_mix > 1e-2, "mixing projection diverges (> 1e-2)");
    c.detail << ", divergence " << fmt(div_valid[0]) << " / " << fmt(div_valid[1]) << ", mixing " << fmt(div_mix);
}

// ---------------------------------------------------------------------------

void prolongation_identity(Criterion& c)
{
    const SymbolList xyz = {"x", "y", "z"};
    std::mt19937_64 rng(5);
    Domain d = Domain::cube(3, -2, 2);
    ZeroTestOptions o;
    o.tol = 1e-9;
    int ok = 0;
    for (int i = 0; i < 100; ++i) {
        VectorField v = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField w = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField lhs = prolong_apply_to_system(w, v);
        VectorField rhs = lie_bracket(v, w);
        bool all = true;
        for (std::size_t a = 0; a < 3; ++a) {
            o.seed = static_cast<std::uint64_t>(i);
            all &= is_zero(lhs[a] - rhs[a], xyz, d, o).is_zero();
        }
        ok += all;
    }
    c.require(ok == 100, "identity holds for every pair");
    c.detail << " " << ok << "/100 pairs";
}

// ---------------------------------------------------------------------------

void quotient_construction(Criterion& c)
{
    LieBasis g(xy, {field({"x", "y"})});
    CrossSection sec = CrossSection::parse(xy, {"x^2 + y^2 - 1"}, {"atan2(y, x)"}, {"theta"}, {}, {true});
    Domain d = Domain::cube(2, -2, 2);
    d.excluded.push_back({Eigen::Vector2d::Zero(), 0.2});

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> eps(-1, 1);
    DomainSampler pts(d, 6);
    double orbit = 0.0, idem = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd x = pts.next();
        Eigen::VectorXd e(1);
        e << eps(rng);
        Eigen::VectorXd y = group_flow(g, e, x, tight());
        orbit = std::max(orbit, sec.chart_difference(quotient_map(g, sec, y), quotient_map(g, sec, x)).norm());
        Canonical c1 = canonicalize(g, sec, x);
        Canonical c2 = canonicalize(g, sec, c1.point);
        idem = std::max(idem, (c2.point - c1.point).norm());
    }
    c.require(orbit < 1e-8, "orbit constant to 1e-8");
    c.require(idem < 1e-9, "idempotent to 1e-9");

    Domain chart(Eigen::Vector2d(-2, 0.1), Eigen::Vector2d(2, 2));
    PointMap q = [&](const Eigen::VectorXd& x) { return quotient_map(g, sec, x); };
    PointMap ratio = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x(0) / x(1)); };
    CheckReport part = partition_agreement(g, q, ratio, chart, 200, 1e-7, 6);
    c.require(part.passed(), "partition agrees with x/y on y > 0.1");
    c.detail << " orbit " << fmt(orbit) << ", idempotence " << fmt(idem) << ", partition: " << part.details;
}

// ---------------------------------------------------------------------------

void bracket_algebra(Criterion& c)
{
    const SymbolList xyz = {"x", "y", "z"};
    std::mt19937_64 rng(7);
    int exact = 0;
    for (int i = 0; i < 500; ++i) {
        VectorField v =
            i % 2 ? test_support::random_polynomial_field(rng, xyz, 2)
                  : VectorField(xyz, {test_support::random_expr(rng, xyz, 3), test_support::random_expr(rng, xyz, 3),
                                      test_support::random_expr(rng, xyz, 3)});
        VectorField w = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField a = lie_bracket(v, w), b = lie_bracket(w, v);
        bool all = true;
        for (std::size_t k = 0; k < 3; ++k) all &= simplify(a[k] + b[k]).is_constant(0.0);
        exact += all;
    }
    c.require(exact == 500, "antisymmetry is symbolic on every pair");

    DomainSampler pts(Domain::cube(3, -1, 1), 7);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        VectorField u = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField v = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField w = test_support::random_polynomial_field(rng, xyz, 2);
        VectorField j1 = lie_bracket(u, lie_bracket(v, w));
        VectorField j2 = lie_bracket(v, lie_bracket(w, u));
        VectorField j3 = lie_bracket(w, lie_bracket(u, v));
        for (int p = 0; p < 32; ++p) {
            Eigen::VectorXd x = pts.next();
            worst = std::max(worst, (j1(x) + j2(x) + j3(x)).norm());
        }
    }
    c.require(worst < 1e-7, "Jacobi residual < 1e-7");
    c.detail << " antisymmetry " << exact << "/500 symbolic, Jacobi residual " << fmt(worst);
}

// ---------------------------------------------------------------------------

std::string capture(const std::string& cmd)
{
    std::string out;
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) throw std::runtime_error("cannot run " + cmd);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) out.append(buf, n);
    return out;
}

void determinism(Criterion& c)
{
    int identical = 0, total = 0;
    for (std::string problem : {"circle", "projective_scaling", "skew_product", "jordan", "lorenz_rossler"}) {
        bool linear = problem == "jordan" || problem == "lorenz_rossler";
        for (const char* command :
             {"check-fibers", "verify-diagram", "classify", linear ? "reduce-linear" : "quotient-verify"}) {
            std::string cmd = std::string(HIERDYN_CLI_PATH) + " " + command + " " + HIERDYN_PROBLEMS_DIR + "/" +
                              problem + ".json 2>/dev/null";
            std::string first = capture(cmd);
            bool same = !first.empty();
            for (int run = 1; run < 3; ++run) same &= capture(cmd) == first;
            ++total;
            identical += same;
            if (!same) c.detail << " differs: " << command << " " << problem;
        }
    }
    c.require(identical == total, "byte-identical reports across 3 runs");
    c.detail << " " << identical << "/" << total << " reports identical";
}

}  // namespace

int main()
{
    criterion(1, "circle suite", circle_suite);
    criterion(2, "linear route equivalence", route_equivalence);
    criterion(3, "Jordan/skew-product suite", jordan_suite);
    criterion(4, "Lorenz+Rossler decomposability", decomposability);
    criterion(5, "prolongation identity", prolongation_identity);
    criterion(6, "quotient construction", quotient_construction);
    criterion(7, "bracket algebra", bracket_algebra);
    criterion(8, "determinism", determinism);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
