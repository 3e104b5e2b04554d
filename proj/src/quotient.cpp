#include "hierdyn/quotient.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/LU>

namespace hierdyn {

CrossSection CrossSection::parse(const SymbolList& coords, const std::vector<std::string>& constraints,
                                 const std::vector<std::string>& chart, SymbolList chart_names,
                                 const std::vector<std::string>& guards, std::vector<bool> angular)
{
    CrossSection sec;
    sec.coords = coords;
    for (const auto& s : constraints) sec.constraints.push_back(hierdyn::parse(s, coords));
    for (const auto& s : chart) sec.chart.push_back(hierdyn::parse(s, coords));
    for (const auto& s : guards) sec.guards.push_back(ChartGuard::parse(s, coords));
    if (chart_names.empty()) {
        for (std::size_t i = 0; i < chart.size(); ++i) chart_names.push_back("q" + std::to_string(i + 1));
    }
    if (chart_names.size() != chart.size()) throw QuotientError("section chart names and components differ in number");
    sec.chart_names = std::move(chart_names);
    if (angular.empty()) angular.assign(chart.size(), false);
    if (angular.size() != chart.size()) throw QuotientError("angular flags must match the chart components");
    sec.angular = std::move(angular);
    return sec;
}

bool CrossSection::admits(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (validity && !validity->contains(x)) return false;
    for (const auto& g : guards) {
        if (!g.holds(x, coords)) return false;
    }
    return true;
}

Eigen::VectorXd CrossSection::constraint_values(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    Eigen::VectorXd s(static_cast<Eigen::Index>(constraints.size()));
    std::span<const double> pt(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < constraints.size(); ++i)
        s[static_cast<Eigen::Index>(i)] = evaluate(constraints[i], Binding{coords, pt}, EvalOptions{kSingularEps});
    return s;
}

Eigen::VectorXd CrossSection::chart_values(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    Eigen::VectorXd q(static_cast<Eigen::Index>(chart.size()));
    std::span<const double> pt(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < chart.size(); ++i)
        q[static_cast<Eigen::Index>(i)] = evaluate(chart[i], Binding{coords, pt}, EvalOptions{kSingularEps});
    return q;
}

Eigen::VectorXd CrossSection::chart_difference(const Eigen::Ref<const Eigen::VectorXd>& a,
                                               const Eigen::Ref<const Eigen::VectorXd>& b) const
{
    Eigen::VectorXd d = a - b;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (static_cast<std::size_t>(i) < angular.size() && angular[static_cast<std::size_t>(i)])
            d[i] = std::remainder(d[i], 2 * std::numbers::pi);
    }
    return d;
}

namespace {

constexpr double kMaxNewtonStep = 1.0;

void require_compatible(const LieBasis& g, const CrossSection& sec)
{
    if (g.coords() != sec.coords) throw QuotientError("section and group use different coordinates");
    if (g.size() >= g.dimension() || sec.chart.empty())
        throw QuotientError("trivial quotient: the group orbits are full-dimensional");
    if (!sec.constraints.empty() && sec.constraints.size() != g.size())
        throw QuotientError("the section needs exactly one constraint per generator");
}

struct Evaluated {
    Eigen::VectorXd point;
    Eigen::VectorXd s;
    double r = std::numeric_limits<double>::infinity();
    bool ok = false;
};

class Newton {
public:
    Newton(const LieBasis& g, const CrossSection& sec, const Eigen::VectorXd& x, const CanonicalizeOptions& o)
        : g_(g), sec_(sec), x_(x), o_(o)
    {
    }

    Evaluated eval(const Eigen::VectorXd& eps) const
    {
        Evaluated e;
        try {
            e.point = group_flow(g_, eps, x_, o_.flow);
            e.s = sec_.constraint_values(e.point);
        } catch (const Error&) {
            return e;
        }
        if (!e.s.allFinite()) return e;
        e.r = e.s.norm();
        e.ok = true;
        return e;
    }

    std::optional<Eigen::VectorXd> step(const Eigen::VectorXd& eps, const Evaluated& at) const
    {
        const Eigen::Index k = eps.size();
        Eigen::MatrixXd J(k, k);
        for (Eigen::Index j = 0; j < k; ++j) {
            Eigen::VectorXd ep = eps, em = eps;
            ep[j] += o_.fd_step;
            em[j] -= o_.fd_step;
            Evaluated a = eval(ep), b = eval(em);
            if (!a.ok || !b.ok) return std::nullopt;
            J.col(j) = (a.s - b.s) / (2 * o_.fd_step);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) return std::nullopt;
        return Eigen::VectorXd(-lu.solve(at.s));
    }

    // Damped Newton from eps0. Returns the converged canonical form or nothing.
    std::optional<Canonical> run(Eigen::VectorXd eps, double& last_residual, std::size_t& iterations) const
    {
        Evaluated cur = eval(eps);
        if (!cur.ok) return std::nullopt;
        int stalled = 0;
        for (std::size_t it = 0; it < o_.max_iter; ++it) {
            ++iterations;
            last_residual = cur.r;
            if (cur.r < o_.tol) {
                if (!sec_.admits(cur.point)) return std::nullopt;
                // one polishing step when it helps
                if (auto d = step(eps, cur)) {
                    Evaluated p = eval(eps + *d);
                    if (p.ok && p.r < cur.r && sec_.admits(p.point)) {
                        eps += *d;
                        cur = p;
                    }
                }
                return Canonical{cur.point, eps, cur.r, iterations};
            }
            auto d = step(eps, cur);
            if (!d) return std::nullopt;
            // near-tangent sections give huge steps
            if (d->norm() > kMaxNewtonStep) *d *= kMaxNewtonStep / d->norm();
            bool accepted = false;
            for (double alpha = 1.0; alpha >= 1.0 / 1024; alpha /= 2) {
                Evaluated trial = eval(eps + alpha * *d);
                if (trial.ok && trial.r < (1 - 1e-4 * alpha) * cur.r) {
                    // the residual creeping toward a positive floor means the section is out of reach
                    stalled = trial.r > 0.99 * cur.r ? stalled + 1 : 0;
                    eps += alpha * *d;
                    cur = trial;
                    accepted = true;
                    break;
                }
            }
            if (!accepted || stalled >= 5) return std::nullopt;
        }
        last_residual = cur.r;
        return std::nullopt;
    }

private:
    const LieBasis& g_;
    const CrossSection& sec_;
    const Eigen::VectorXd& x_;
    const CanonicalizeOptions& o_;
};

std::vector<Eigen::VectorXd> starting_parameters(Eigen::Index k)
{
    std::vector<Eigen::VectorXd> starts{Eigen::VectorXd::Zero(k)};
    if (k == 1) {
        for (int j = 1; j <= 16; ++j) {
            starts.push_back(Eigen::VectorXd::Constant(1, 0.25 * j));
            starts.push_back(Eigen::VectorXd::Constant(1, -0.25 * j));
        }
        return starts;
    }
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int j = 0; j < 32; ++j) {
        Eigen::VectorXd e(k);
        for (Eigen::Index i = 0; i < k; ++i) e[i] = unif(rng);
        starts.push_back(e);
    }
    return starts;
}

}  // namespace

Canonical canonicalize(const LieBasis& g, const CrossSection& sec, const Eigen::VectorXd& x,
                       const CanonicalizeOptions& options)
{
    require_compatible(g, sec);
    const auto k = static_cast<Eigen::Index>(g.size());
    if (x.size() != static_cast<Eigen::Index>(g.dimension())) throw QuotientError("point has the wrong dimension");
    if (sec.constraints.empty()) {
        if (!sec.admits(x)) throw QuotientError("point lies outside the chart");
        return Canonical{x, Eigen::VectorXd::Zero(k), 0.0, 0};
    }
    double last = std::numeric_limits<double>::infinity();
    try {
        Eigen::VectorXd s0 = sec.constraint_values(x);
        last = s0.norm();
        if (last < options.tol && sec.admits(x)) return Canonical{x, Eigen::VectorXd::Zero(k), last, 0};
    } catch (const DomainError&) {
    }
    Newton newton(g, sec, x, options);
    std::size_t iterations = 0;
    for (const auto& start : starting_parameters(k)) {
        if (auto c = newton.run(start, last, iterations)) return *c;
    }
    std::ostringstream os;
    os << "canonicalize: no orbit representative found on the section (last residual " << last << ")";
    throw QuotientError(os.str());
}

Eigen::VectorXd quotient_map(const LieBasis& g, const CrossSection& sec, const Eigen::VectorXd& x,
                             const CanonicalizeOptions& options)
{
    return sec.chart_values(canonicalize(g, sec, x, options).point);
}

CheckReport verify_quotient_invariance(const LieBasis& g, const CrossSection& sec, const Domain& domain,
                                       const CheckOptions& options, double delta, const CanonicalizeOptions& canon)
{
    require_compatible(g, sec);
    CheckReport r;
    r.name = "quotient-invariance";
    r.method = Method::Numeric;

    DomainSampler sampler(domain, options.seed);
    std::vector<Eigen::VectorXd> pts;
    std::vector<Eigen::VectorXd> qs;
    for (std::size_t attempt = 0; attempt < 10 * options.samples && pts.size() < options.samples; ++attempt) {
        Eigen::VectorXd x = sampler.next();
        try {
            qs.push_back(quotient_map(g, sec, x, canon));
            pts.push_back(std::move(x));
        } catch (const Error&) {
        }
    }
    if (pts.empty()) {
        r.verdict = Verdict::Inconclusive;
        r.details = "no sample point could be mapped to the section";
        return r;
    }

    struct Sample {
        double residual = 0.0;
        std::size_t generator = 0;
        bool lost = false;
    };
    std::vector<Sample> out(pts.size());
    parallel_for(pts.size(), options.threads, [&](std::size_t s) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            try {
                Eigen::VectorXd y = flow_map(g[i], pts[s], delta, canon.flow);
                Eigen::VectorXd qy = quotient_map(g, sec, y, canon);
                double res = sec.chart_difference(qy, qs[s]).norm() / delta;
                if (res >= out[s].residual) out[s] = {res, i, out[s].lost};
            } catch (const Error&) {
                out[s].lost = true;
            }
        }
    });

    std::size_t worst_idx = 0;
    for (std::size_t s = 0; s < out.size(); ++s) {
        if (out[s].residual > r.max_residual) {
            r.max_residual = out[s].residual;
            worst_idx = s;
        }
    }
    std::ostringstream os;
    os.precision(6);
    if (!(r.max_residual < options.tol)) {
        r.verdict = Verdict::Fail;
        r.witness = pts[worst_idx];
        os << "quotient map changes along w_" << out[worst_idx].generator + 1 << " (rate " << r.max_residual << ")";
        r.details = os.str();
        return r;
    }
    for (std::size_t s = 0; s < out.size(); ++s) {
        if (out[s].lost) {
            r.verdict = Verdict::Inconclusive;
            r.witness = pts[s];
            r.details = "a perturbed point could not be mapped to the section";
            return r;
        }
    }
    if (pts.size() < options.samples) {
        r.verdict = Verdict::Inconclusive;
        os << "only " << pts.size() << " of " << options.samples << " samples reached the section; ";
    }
    os << "max rate of change " << r.max_residual << " over " << pts.size() << " samples";
    r.details = os.str();
    return r;
}

CheckReport partition_agreement(const LieBasis& g, const PointMap& f, const PointMap& h, const Domain& domain,
                                std::size_t pairs, double tol, std::uint64_t seed, const IntegratorConfig& flow)
{
    CheckReport r;
    r.name = "partition-agreement";
    r.method = Method::Numeric;
    DomainSampler sampler(domain, seed);
    // consecutive Halton points are correlated, so partners come from their own stream
    DomainSampler partners(domain, seed + 0x9e3779b97f4a7c15ULL);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto k = static_cast<Eigen::Index>(g.size());
    auto equal = [tol](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return (a - b).norm() < tol * (1.0 + a.norm());
    };
    std::size_t used = 0, same = 0;
    for (std::size_t p = 0; p < pairs; ++p) {
        Eigen::VectorXd x = sampler.next();
        Eigen::VectorXd y;
        if (p % 2 == 0) {
            Eigen::VectorXd eps(k);
            for (Eigen::Index i = 0; i < k; ++i) eps[i] = unif(rng);
            try {
                y = group_flow(g, eps, x, flow);
            } catch (const Error&) {
                continue;
            }
            if (!domain.contains(y)) continue;
        } else {
            y = partners.next();
        }
        Eigen::VectorXd fx, fy, hx, hy;
        try {
            fx = f(x);
            fy = f(y);
            hx = h(x);
            hy = h(y);
        } catch (const Error&) {
            continue;
        }
        ++used;
        bool ef = equal(fx, fy), eh = equal(hx, hy);
        if (ef) ++same;
        if (ef != eh) {
            r.verdict = Verdict::Fail;
            r.witness = x;
            r.max_residual = std::max((fx - fy).norm(), (hx - hy).norm());
            std::ostringstream os;
            os.precision(6);
            os << "maps disagree on whether (" << x.transpose() << ") and (" << y.transpose() << ") share a level set";
            r.details = os.str();
            return r;
        }
    }
    if (used == 0) {
        r.verdict = Verdict::Inconclusive;
        r.details = "no usable pairs";
        return r;
    }
    r.details = std::to_string(used) + " pairs agree (" + std::to_string(same) + " on a common level set)";
    return r;
}

CheckReport section_overlap_check(const LieBasis& g, const CrossSection& a, const CrossSection& b, const Domain& domain,
                                  const CheckOptions& options, const CanonicalizeOptions& canon)
{
    PointMap qa = [&](const Eigen::VectorXd& x) { return quotient_map(g, a, x, canon); };
    PointMap qb = [&](const Eigen::VectorXd& x) { return quotient_map(g, b, x, canon); };
    CheckReport r = partition_agreement(g, qa, qb, domain, options.samples, options.tol, options.seed, canon.flow);
    r.name = "section-overlap";
    return r;
}

}  // namespace hierdyn
