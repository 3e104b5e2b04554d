#include "hierdyn/commands.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <random>

#include "hierdyn/liesym.hpp"
#include "hierdyn/linear.hpp"

namespace hierdyn::cli {

using nlohmann::json;

namespace {

struct Context {
    const ProblemFile& p;
    unsigned threads;
    Report& report;

    CheckOptions options(double tol) const { return {tol, p.samples, p.seed, threads}; }

    const VectorField& field() const
    {
        if (!p.vector_field) throw UsageError("the problem defines no vector_field");
        return *p.vector_field;
    }
    const LieBasis& generators() const
    {
        if (!p.generators) throw UsageError("the problem defines no generators");
        return *p.generators;
    }
    const ProjectionMap& projection() const
    {
        if (!p.projection) throw UsageError("the problem defines no projection");
        return *p.projection;
    }
    const std::vector<CrossSection>& sections() const
    {
        if (p.sections.empty()) throw UsageError("the problem defines no sections");
        return p.sections;
    }

    // Runtime failures inside a check become an Inconclusive entry.
    void add(const std::string& name, const std::function<CheckReport()>& fn) const
    {
        CheckReport r;
        try {
            r = fn();
        } catch (const UsageError&) {
            throw;
        } catch (const Error& e) {
            r = CheckReport{};
            r.verdict = Verdict::Inconclusive;
            r.method = Method::Numeric;
            r.details = e.what();
        }
        r.name = name;
        report.checks.push_back(std::move(r));
    }

    // Initial conditions from the file, else a few domain samples inside the chart.
    std::vector<Eigen::VectorXd> initial_points(std::size_t fallback,
                                                const std::function<bool(const Eigen::VectorXd&)>& ok) const
    {
        if (!p.initial_conditions.empty()) return p.initial_conditions;
        DomainSampler sampler(p.domain, p.seed);
        std::vector<Eigen::VectorXd> pts;
        for (std::size_t attempt = 0; attempt < 100 * fallback && pts.size() < fallback; ++attempt) {
            Eigen::VectorXd x = sampler.next();
            if (ok(x)) pts.push_back(std::move(x));
        }
        return pts;
    }
};

std::string indexed(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i + 1) + "]"; }

void check_symmetry(const Context& c)
{
    const auto& v = c.field();
    const auto& g = c.generators();
    for (std::size_t i = 0; i < g.size(); ++i)
        c.add(indexed("symmetry", i), [&] { return is_symmetry(v, g[i], c.p.domain, c.options(c.p.tolerances.zero)); });
}

void check_closure(const Context& c)
{
    const auto& v = c.field();
    const auto& g = c.generators();
    c.add("closure", [&] { return closure_check(v, g, c.p.domain, c.options(c.p.tolerances.closure)); });
}

void check_invariance(const Context& c)
{
    const auto& pi = c.projection();
    const auto& g = c.generators();
    c.add("invariance", [&] { return invariance_check(pi, g, c.p.domain, c.options(c.p.tolerances.zero)); });
}

void check_fibers(const Context& c)
{
    const auto& pi = c.projection();
    const auto& v = c.field();
    const auto& g = c.generators();
    FiberOptions fo;
    fo.fibers = c.p.fibers;
    c.add("fiber-consistency",
          [&] { return fiber_consistency_check(pi, v, g, c.p.domain, c.options(c.p.tolerances.fiber), fo); });
}

void verify_diagram(const Context& c)
{
    const auto& v = c.field();
    const auto& pi = c.projection();
    if (!c.p.reduced_field && !c.p.generators) throw UsageError("verify-diagram needs a reduced_field or generators");
    auto pts = c.initial_points(4, [&](const Eigen::VectorXd& x) { return pi.in_chart(x); });
    if (pts.empty()) throw UsageError("no initial points inside the projection chart");
    c.report.results["initial_points"] = json::array();
    for (const auto& x : pts) c.report.results["initial_points"].push_back(to_json(x));

    if (c.p.reduced_field) {
        c.add("diagram", [&] {
            return diagram_check(v, pi, *c.p.reduced_field, pts, c.p.t_final, c.p.integrator, c.p.tolerances.diagram,
                                 c.threads);
        });
    }
    if (c.p.generators && c.p.generators->size() > 0) {
        const auto& g = *c.p.generators;
        c.add("fiber-divergence", [&] {
            std::mt19937_64 rng(c.p.seed);
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            IntegratorConfig tight = c.p.integrator;
            tight.rel_tol = std::min(tight.rel_tol, 1e-12);
            tight.abs_tol = std::min(tight.abs_tol, 1e-14);
            CheckReport r;
            r.method = Method::Numeric;
            json pairs = json::array();
            for (const auto& x : pts) {
                for (int mate = 0; mate < 2; ++mate) {
                    Eigen::VectorXd eps(static_cast<Eigen::Index>(g.size()));
                    for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = unif(rng);
                    Eigen::VectorXd y = group_flow(g, eps, x, tight);
                    double d = fiber_divergence(v, pi, x, y, c.p.t_final, c.p.integrator);
                    pairs.push_back({{"x", to_json(x)}, {"y", to_json(y)}, {"divergence", d}});
                    if (d >= r.max_residual) {
                        r.max_residual = d;
                        r.witness = x;
                    }
                }
            }
            c.report.results["fiber_pairs"] = pairs;
            if (!(r.max_residual < c.p.tolerances.diagram)) {
                r.verdict = Verdict::Fail;
                r.details = "images of one fiber separate under the flow";
            } else {
                r.witness.reset();
                r.details = "fibers stay together up to T";
            }
            return r;
        });
    }
}

void classify(const Context& c)
{
    const auto& v = c.field();
    const auto& pi = c.projection();
    Classification cl = classify_projection(pi, v, c.p.domain, c.options(c.p.tolerances.zero));
    c.report.results["classification"] = to_string(cl.kind);
    c.report.results["classification_method"] = to_string(cl.method);
    c.report.results["max_pushforward"] = cl.max_pushforward;
    c.report.results["witness"] = cl.witness ? to_json(*cl.witness) : json(nullptr);
    if (c.p.first_integral) {
        c.add("first-integral",
              [&] { return first_integral_check(*c.p.first_integral, v, c.p.domain, c.options(c.p.tolerances.zero)); });
    }
}

void reduce_linear(const Context& c)
{
    if (!c.p.A) throw UsageError("the problem defines no matrix A");
    const Eigen::MatrixXd& A = *c.p.A;
    const double tol = c.p.tolerances.linear;
    if (c.p.P) {
        const Eigen::MatrixXd& P = *c.p.P;
        try {
            LinearProjection<double> checked(P);
        } catch (const LinearAlgebraError& e) {
            throw UsageError(std::string("matrix P: ") + e.what());
        }
        auto inv = kernel_invariance_check(A, P, tol);
        c.add("kernel-invariance", [&] { return inv.report; });
        c.add("structure-constants", [&] {
            Eigen::MatrixXd W = kernel_basis(P);
            auto sc = structure_constants(A, W);
            CheckReport r;
            r.method = Method::Numeric;
            r.max_residual = sc.residual;
            c.report.results["structure_constants"] = to_json(sc.K);
            if (!(sc.residual < tol)) {
                r.verdict = Verdict::Fail;
                Eigen::MatrixXd R = A * W - W * sc.K;
                Eigen::Index worst_col = 0;
                R.colwise().norm().maxCoeff(&worst_col);
                r.witness = Eigen::VectorXd(W.col(worst_col));
                r.details = "A W is not expressible in the kernel basis";
            } else {
                r.details = "A W = W K";
            }
            return r;
        });
        if (inv.report.passed()) c.report.results["reduced_matrix"] = to_json(reduced_matrix(A, P, tol));
    }
    auto reductions = enumerate_linear_reductions(A, tol);
    json list = json::array();
    for (const auto& r : reductions) {
        list.push_back({{"kernel_dimension", r.W.cols()},
                        {"kernel_basis", to_json(r.W)},
                        {"P", to_json(r.P)},
                        {"B", to_json(r.B)}});
    }
    c.report.results["reductions"] = list;
    if (reductions.empty()) c.report.notes.push_back("no real linear reduction");
}

json canonical_json(const Canonical& k, const CrossSection& sec)
{
    return {{"representative", to_json(k.point)},
            {"eps", to_json(k.eps)},
            {"chart", to_json(sec.chart_values(k.point))},
            {"residual", k.residual}};
}

void quotient_build(const Context& c)
{
    const auto& g = c.generators();
    const auto& secs = c.sections();
    auto pts = c.initial_points(std::min<std::size_t>(c.p.samples, 8), [](const Eigen::VectorXd&) { return true; });
    json out = json::array();
    for (std::size_t s = 0; s < secs.size(); ++s) {
        c.add(indexed("canonicalize", s), [&] {
            CheckReport r;
            r.method = Method::Numeric;
            json entries = json::array();
            std::size_t failed = 0;
            for (const auto& x : pts) {
                json e = {{"point", to_json(x)}};
                try {
                    Canonical k = canonicalize(g, secs[s], x);
                    e.update(canonical_json(k, secs[s]));
                    r.max_residual = std::max(r.max_residual, k.residual);
                } catch (const QuotientError& err) {
                    e["error"] = err.what();
                    if (!r.witness) r.witness = x;
                    ++failed;
                }
                entries.push_back(std::move(e));
            }
            out.push_back({{"section", s + 1}, {"points", entries}});
            if (failed > 0) {
                r.verdict = Verdict::Inconclusive;
                r.details =
                    std::to_string(failed) + " of " + std::to_string(pts.size()) + " points did not reach the section";
            } else {
                r.details = std::to_string(pts.size()) + " points canonicalized";
            }
            return r;
        });
    }
    c.report.results["sections"] = out;
}

void quotient_verify(const Context& c)
{
    const auto& g = c.generators();
    const auto& secs = c.sections();
    const auto opts = c.options(c.p.tolerances.quotient);
    for (std::size_t s = 0; s < secs.size(); ++s)
        c.add(indexed("quotient-invariance", s),
              [&] { return verify_quotient_invariance(g, secs[s], c.p.domain, opts); });
    for (std::size_t a = 0; a < secs.size(); ++a) {
        for (std::size_t b = a + 1; b < secs.size(); ++b) {
            c.add("section-overlap[" + std::to_string(a + 1) + "," + std::to_string(b + 1) + "]",
                  [&] { return section_overlap_check(g, secs[a], secs[b], c.p.domain, opts); });
        }
    }
    if (c.p.projection) {
        const auto& pi = *c.p.projection;
        c.add("partition-agreement", [&] {
            PointMap q = [&](const Eigen::VectorXd& x) { return quotient_map(g, secs.front(), x); };
            PointMap h = [&](const Eigen::VectorXd& x) { return pi(x, EvalOptions{kSingularEps}); };
            return partition_agreement(g, q, h, c.p.domain, c.p.samples, 1e-7, c.p.seed);
        });
    }
}

const std::map<std::string, void (*)(const Context&)>& dispatch()
{
    static const std::map<std::string, void (*)(const Context&)> table = {
        {"check-symmetry", check_symmetry}, {"check-closure", check_closure},   {"check-invariance", check_invariance},
        {"check-fibers", check_fibers},     {"verify-diagram", verify_diagram}, {"classify", classify},
        {"reduce-linear", reduce_linear},   {"quotient-build", quotient_build}, {"quotient-verify", quotient_verify},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names = {"check-symmetry", "check-closure",  "check-invariance",
                                                   "check-fibers",   "verify-diagram", "classify",
                                                   "reduce-linear",  "quotient-build", "quotient-verify"};
    return names;
}

void apply_flags(ProblemFile& problem, const RunFlags& flags)
{
    if (flags.tol) {
        if (!(*flags.tol > 0)) throw UsageError("--tol must be positive");
        problem.tolerances.override_all(*flags.tol);
    }
    if (flags.seed) problem.seed = *flags.seed;
    if (flags.samples) {
        if (*flags.samples == 0) throw UsageError("--samples must be positive");
        problem.samples = *flags.samples;
    }
    if (flags.t_final) {
        if (!(*flags.t_final > 0)) throw UsageError("--t-final must be positive");
        problem.t_final = *flags.t_final;
    }
}

Report execute(const std::string& command, const ProblemFile& problem, unsigned threads)
{
    auto it = dispatch().find(command);
    if (it == dispatch().end()) throw UsageError("unknown command " + command);
    Report report;
    report.command = command;
    report.problem = problem.name;
    report.seed = problem.seed;
    report.config = config_echo(problem);
    Context ctx{problem, threads, report};
    it->second(ctx);
    return report;
}

int run(const std::string& command, const std::string& problem_path, const RunFlags& flags, std::ostream& out,
        std::ostream& err)
{
    try {
        ProblemFile problem = load_problem(problem_path);
        if (problem.name.empty()) problem.name = std::filesystem::path(problem_path).stem().string();
        apply_flags(problem, flags);
        Report report = execute(command, problem, resolve_threads(flags.threads));
        const std::string text = report.to_json().dump(2) + "\n";
        out << text;
        if (flags.report_path) {
            std::ofstream f(*flags.report_path, std::ios::binary);
            if (!f) throw UsageError("cannot write report to " + *flags.report_path);
            f << text;
        }
        report.write_summary(err);
        return report.exit_code();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace hierdyn::cli
