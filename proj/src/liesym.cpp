#include "hierdyn/liesym.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include <Eigen/SVD>

#include "hierdyn/flow.hpp"

namespace hierdyn {

namespace {

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Runs is_zero on each labelled expression and folds the results into one report.
CheckReport zero_report(std::string name, const std::vector<std::pair<std::string, ScalarExpr>>& exprs,
                        const SymbolList& coords, const Domain& domain, const CheckOptions& options,
                        std::function<bool(const Eigen::VectorXd&)> accept = {})
{
    CheckReport r;
    r.name = std::move(name);
    r.method = Method::Symbolic;
    std::size_t symbolic = 0;
    for (const auto& [label, e] : exprs) {
        ZeroTestOptions zo;
        zo.tol = options.tol;
        zo.samples = options.samples;
        zo.seed = options.seed;
        zo.accept = accept;
        ZeroTestResult z = is_zero(e, coords, domain, zo);
        if (z.kind == ZeroKind::ZeroSymbolic) {
            ++symbolic;
            continue;
        }
        r.method = Method::Numeric;
        r.max_residual = std::max(r.max_residual, z.max_abs);
        if (z.kind == ZeroKind::NonZero && r.verdict != Verdict::Fail) {
            r.verdict = Verdict::Fail;
            r.witness = z.witness;
            r.details = label + " = " + to_string(e) + " is nonzero (|value| " + format_double(z.max_abs) + ")";
        }
    }
    if (r.verdict == Verdict::Pass) {
        r.details =
            std::to_string(exprs.size()) + " expressions vanish (" + std::to_string(symbolic) + " symbolically)";
    }
    return r;
}

void require_same_coords(const SymbolList& a, const SymbolList& b, const char* what)
{
    if (a != b) throw Error(std::string(what) + ": objects are declared on different coordinates");
}

// Draws up to n points of the domain on which `usable` succeeds; gives up
// after 10n attempts.
std::vector<Eigen::VectorXd> draw_points(const Domain& domain, std::uint64_t seed, std::size_t n,
                                         const std::function<bool(const Eigen::VectorXd&)>& usable)
{
    DomainSampler sampler(domain, seed);
    std::vector<Eigen::VectorXd> pts;
    for (std::size_t attempt = 0; attempt < 10 * n && pts.size() < n; ++attempt) {
        Eigen::VectorXd x = sampler.next();
        if (usable(x)) pts.push_back(std::move(x));
    }
    return pts;
}

}  // namespace

CheckReport is_symmetry(const VectorField& v, const VectorField& w, const Domain& domain, const CheckOptions& options)
{
    require_same_coords(v.coords(), w.coords(), "is_symmetry");
    VectorField b = lie_bracket(v, w);
    std::vector<std::pair<std::string, ScalarExpr>> exprs;
    for (std::size_t a = 0; a < b.dimension(); ++a) exprs.emplace_back("[v,w]^" + v.coords()[a], b[a]);
    return zero_report("symmetry", exprs, v.coords(), domain, options);
}

CheckReport closure_check(const VectorField& v, const LieBasis& g, const Domain& domain, const CheckOptions& options)
{
    require_same_coords(v.coords(), g.coords(), "closure_check");
    std::vector<VectorField> brackets;
    brackets.reserve(g.size());
    for (const auto& w : g.generators()) brackets.push_back(lie_bracket(v, w));

    const EvalOptions eval{kSingularEps};
    auto usable = [&](const Eigen::VectorXd& x) {
        try {
            (void)g.span_at(x, eval);
            for (const auto& b : brackets) (void)b(x, eval);
            return true;
        } catch (const DomainError&) {
            return false;
        }
    };
    auto pts = draw_points(domain, options.seed, options.samples, usable);

    CheckReport r;
    r.name = "closure";
    r.method = Method::Numeric;
    if (pts.size() < options.samples) {
        r.verdict = Verdict::Inconclusive;
        r.details = "only " + std::to_string(pts.size()) + " of " + std::to_string(options.samples) +
                    " sample points were regular";
        if (pts.empty()) return r;
    }

    struct Sample {
        double residual = 0.0;
        Eigen::Index rank = 0;
        std::size_t generator = 0;
    };
    std::vector<Sample> out(pts.size());
    parallel_for(pts.size(), options.threads, [&](std::size_t s) {
        const Eigen::VectorXd& x = pts[s];
        Eigen::MatrixXd W = g.span_at(x, eval);
        Sample& o = out[s];
        if (W.cols() == 0) {
            for (std::size_t i = 0; i < brackets.size(); ++i) {
                Eigen::VectorXd b = brackets[i](x, eval);
                double res = b.norm() / (1.0 + b.norm());
                if (res > o.residual) o = {res, 0, i};
            }
            return;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        double smax = sv.size() ? sv[0] : 0.0;
        svd.setThreshold(1e-10);
        o.rank = smax > 0 ? svd.rank() : 0;
        for (std::size_t i = 0; i < brackets.size(); ++i) {
            Eigen::VectorXd b = brackets[i](x, eval);
            Eigen::VectorXd c = svd.solve(b);
            double res = (W * c - b).norm() / (1.0 + b.norm());
            if (res >= o.residual) {
                o.residual = res;
                o.generator = i;
            }
        }
    });

    Eigen::Index ref_rank = 0;
    for (const auto& o : out) ref_rank = std::max(ref_rank, o.rank);
    std::size_t worst_idx = 0;
    for (std::size_t s = 0; s < out.size(); ++s) {
        if (out[s].residual > r.max_residual) {
            r.max_residual = out[s].residual;
            worst_idx = s;
        }
    }
    if (!(r.max_residual < options.tol)) {
        r.verdict = Verdict::Fail;
        r.witness = pts[worst_idx];
        r.details = "[v, w_" + std::to_string(out[worst_idx].generator + 1) +
                    "] leaves the span of the generators (relative residual " + format_double(r.max_residual) + ")";
        return r;
    }
    if (!g.generators().empty()) {
        for (std::size_t s = 0; s < out.size(); ++s) {
            if (out[s].rank < ref_rank || out[s].rank == 0) {
                r.verdict = Verdict::Inconclusive;
                r.witness = pts[s];
                r.details = "generators drop rank from " + std::to_string(ref_rank) + " to " +
                            std::to_string(out[s].rank) + " (action is not regular)";
                return r;
            }
        }
    }
    if (r.verdict == Verdict::Pass)
        r.details = "all brackets lie in the generator span at " + std::to_string(pts.size()) + " points";
    return r;
}

CheckReport invariance_check(const ProjectionMap& pi, const LieBasis& g, const Domain& domain,
                             const CheckOptions& options)
{
    require_same_coords(pi.source_coords(), g.coords(), "invariance_check");
    std::vector<std::pair<std::string, ScalarExpr>> exprs;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t a = 0; a < pi.target_dimension(); ++a) {
            exprs.emplace_back("w_" + std::to_string(i + 1) + "(" + pi.target_coords()[a] + ")",
                               apply(g[i], pi.components()[a]));
        }
    }
    auto in_chart = [&pi](const Eigen::VectorXd& x) { return pi.in_chart(x); };
    return zero_report("invariance", exprs, pi.source_coords(), domain, options, in_chart);
}

CheckReport fiber_consistency_check(const ProjectionMap& pi, const VectorField& v, const LieBasis& g,
                                    const Domain& domain, const CheckOptions& options, const FiberOptions& fiber)
{
    require_same_coords(pi.source_coords(), v.coords(), "fiber_consistency_check");
    require_same_coords(pi.source_coords(), g.coords(), "fiber_consistency_check");
    CheckReport r;
    r.name = "fiber-consistency";
    r.method = Method::Numeric;
    if (g.size() == 0) {
        r.details = "trivial group: fibers of the orbit partition are points";
        return r;
    }

    const EvalOptions eval{kSingularEps};
    auto usable = [&](const Eigen::VectorXd& x) {
        if (!pi.in_chart(x)) return false;
        try {
            (void)pushforward(pi, v, x);
            return true;
        } catch (const DomainError&) {
            return false;
        }
    };
    auto bases = draw_points(domain, options.seed, fiber.fibers, usable);
    if (bases.empty()) {
        r.verdict = Verdict::Inconclusive;
        r.details = "no usable base points in the domain";
        return r;
    }

    IntegratorConfig cfg;
    cfg.rel_tol = 1e-12;
    cfg.abs_tol = 1e-14;

    struct Fiber {
        double residual = 0.0;
        double drift = 0.0;
        std::size_t mates = 0;
        Eigen::VectorXd worst_mate;
    };
    std::vector<Fiber> out(bases.size());
    const auto k = static_cast<Eigen::Index>(g.size());
    parallel_for(bases.size(), options.threads, [&](std::size_t i) {
        const Eigen::VectorXd& x = bases[i];
        Fiber& f = out[i];
        std::seed_seq sq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                         static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(sq);
        std::uniform_real_distribution<double> unif(-fiber.eps_range, fiber.eps_range);
        const Eigen::VectorXd px = pi(x, eval);
        const Eigen::VectorXd vx = pushforward(pi, v, x);
        for (std::size_t attempt = 0; attempt < 20 * fiber.mates_per_fiber && f.mates < fiber.mates_per_fiber;
             ++attempt) {
            Eigen::VectorXd eps(k);
            for (Eigen::Index j = 0; j < k; ++j) eps[j] = unif(rng);
            Eigen::VectorXd y;
            Eigen::VectorXd vy;
            try {
                y = group_flow(g, eps, x, cfg);
                if (!domain.contains(y) || !pi.in_chart(y)) continue;
                Eigen::VectorXd py = pi(y, eval);
                f.drift = std::max(f.drift, pi.target_difference(py, px).norm() / (1.0 + px.norm()));
                vy = pushforward(pi, v, y);
            } catch (const Error&) {
                continue;
            }
            ++f.mates;
            double res = (vy - vx).norm();
            if (res >= f.residual) {
                f.residual = res;
                f.worst_mate = y;
            }
        }
    });

    std::size_t worst_idx = 0, mates = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        mates += out[i].mates;
        if (out[i].residual > r.max_residual) {
            r.max_residual = out[i].residual;
            worst_idx = i;
        }
    }
    // mates that left their fiber say nothing about pi_*(v)
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].drift > 1e-6) {
            r.verdict = Verdict::Inconclusive;
            r.witness = bases[i];
            r.details = "group orbits leave the fibers of pi (relative drift " + format_double(out[i].drift) +
                        "); pi is not invariant";
            return r;
        }
    }
    if (!(r.max_residual < options.tol)) {
        r.verdict = Verdict::Fail;
        r.witness = bases[worst_idx];
        std::ostringstream os;
        os.precision(6);
        os << "pushforward differs by " << r.max_residual << " between base point and fiber mate ("
           << out[worst_idx].worst_mate.transpose() << ")";
        r.details = os.str();
        return r;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].mates == 0) {
            r.verdict = Verdict::Inconclusive;
            r.witness = bases[i];
            r.details = "every fiber mate left the domain or chart";
            return r;
        }
    }
    if (bases.size() < fiber.fibers) {
        r.verdict = Verdict::Inconclusive;
        r.details = "only " + std::to_string(bases.size()) + " usable base points";
        return r;
    }
    r.details = std::to_string(mates) + " fiber mates over " + std::to_string(bases.size()) + " fibers";
    return r;
}

std::string to_string(DynamicsClass c)
{
    return c == DynamicsClass::TrivialDynamics ? "trivial-dynamics" : "nontrivial-dynamics";
}

Classification classify_projection(const ProjectionMap& pi, const VectorField& v, const Domain& domain,
                                   const CheckOptions& options)
{
    require_same_coords(pi.source_coords(), v.coords(), "classify_projection");
    Classification c;
    auto in_chart = [&pi](const Eigen::VectorXd& x) { return pi.in_chart(x); };
    for (const auto& comp : pi.components()) {
        ZeroTestOptions zo;
        zo.tol = options.tol;
        zo.samples = options.samples;
        zo.seed = options.seed;
        zo.accept = in_chart;
        ZeroTestResult z = is_zero(apply(v, comp), v.coords(), domain, zo);
        if (z.kind != ZeroKind::ZeroSymbolic) c.method = Method::Numeric;
        c.max_pushforward = std::max(c.max_pushforward, z.max_abs);
        if (z.kind == ZeroKind::NonZero) {
            c.kind = DynamicsClass::NontrivialDynamics;
            c.witness = z.witness;
            return c;
        }
    }
    return c;
}

CheckReport first_integral_check(const ScalarExpr& F, const VectorField& v, const Domain& domain,
                                 const CheckOptions& options)
{
    return zero_report("first-integral", {{"v(F)", apply(v, F)}}, v.coords(), domain, options);
}

}  // namespace hierdyn
