#include "hierdyn/flow.hpp"

#include "hierdyn/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace hierdyn {

void IntegratorConfig::validate() const
{
    if (!(rel_tol > 0) || !(abs_tol > 0)) throw Error("integrator tolerances must be positive");
    if (!(max_step > 0)) throw Error("integrator max_step must be positive");
    if (max_steps == 0) throw Error("integrator max_steps must be positive");
}

IntegrationError::IntegrationError(const std::string& message, double time)
    : Error(message + " (t = " + std::to_string(time) + ")"), time_(time)
{
}

// ---------------------------------------------------------------------------
// Trajectory

void Trajectory::push(double t, Eigen::VectorXd x, Eigen::VectorXd dx)
{
    times_.push_back(t);
    states_.push_back(std::move(x));
    derivatives_.push_back(std::move(dx));
}

Eigen::VectorXd Trajectory::at(double t) const
{
    if (times_.empty()) throw Error("empty trajectory");
    const double dir = times_.back() >= times_.front() ? 1.0 : -1.0;
    const double s = (t - times_.front()) * dir;
    const double span = (times_.back() - times_.front()) * dir;
    if (s < -1e-12 * std::max(1.0, span) || s > span * (1 + 1e-12) + 1e-12)
        throw Error("trajectory queried outside its time span");
    auto it =
        std::lower_bound(times_.begin(), times_.end(), t, [dir](double a, double b) { return a * dir < b * dir; });
    std::size_t i = static_cast<std::size_t>(it - times_.begin());
    if (i < times_.size() && times_[i] == t) return states_[i];
    if (i == 0) return states_.front();
    if (i >= times_.size()) return states_.back();
    const std::size_t a = i - 1, b = i;
    const double h = times_[b] - times_[a];
    const double u = (t - times_[a]) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * states_[a] + h10 * h * derivatives_[a] + h01 * states_[b] + h11 * h * derivatives_[b];
}

void Trajectory::write_csv(std::ostream& os) const
{
    const Eigen::Index m = states_.empty() ? 0 : states_.front().size();
    os << 't';
    for (Eigen::Index i = 1; i <= m; ++i) os << ",x" << i;
    os << '\n';
    auto old = os.precision(17);
    for (std::size_t k = 0; k < times_.size(); ++k) {
        os << times_[k];
        for (Eigen::Index i = 0; i < m; ++i) os << ',' << states_[k][i];
        os << '\n';
    }
    os.precision(old);
}

// ---------------------------------------------------------------------------
// Integrators

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct Stepper {
    const RhsFunction& f;
    double t = 0.0;

    void eval(const Eigen::VectorXd& x, Eigen::VectorXd& dx) const
    {
        try {
            f(x, dx);
        } catch (const DomainError& e) {
            throw IntegrationError(std::string("vector field is singular along the trajectory: ") + e.what(), t);
        }
    }
};

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& x0, const Eigen::VectorXd& x1,
                  const IntegratorConfig& cfg)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        double r = err[i] / sc;
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(err.size(), 1)));
}

std::vector<double> stop_list(double t0, double t1, const std::vector<double>& stops)
{
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    std::vector<double> out;
    for (double s : stops) {
        if ((s - t0) * dir > 0 && (t1 - s) * dir > 0) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [dir](double a, double b) { return a * dir < b * dir; });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    out.push_back(t1);
    return out;
}

double initial_step(Stepper& st, const Eigen::VectorXd& x0, const Eigen::VectorXd& f0, double dir, double span,
                    const IntegratorConfig& cfg)
{
    auto rms = [&](const Eigen::VectorXd& v) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            double sc = cfg.abs_tol + cfg.rel_tol * std::abs(x0[i]);
            acc += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
    };
    double d0 = rms(x0), d1 = rms(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    Eigen::VectorXd x1 = x0 + dir * h0 * f0;
    Eigen::VectorXd f1(x0.size());
    st.eval(x1, f1);
    double d2 = rms(f1 - f0) / h0;
    double dm = std::max(d1, d2);
    double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5);
    return std::min({100 * h0, h1, span, cfg.max_step});
}

void require_finite(const Eigen::VectorXd& x, double t)
{
    if (!x.allFinite()) throw IntegrationError("state became non-finite (blow-up)", t);
}

Trajectory integrate_rk4(Stepper& st, const Eigen::VectorXd& x0, const Eigen::VectorXd& f0, double t0, double t1,
                         const IntegratorConfig& cfg, const std::vector<double>& stops)
{
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    const double h_nominal = std::isfinite(cfg.max_step) ? cfg.max_step : 1e-2;
    Trajectory traj;
    traj.push(t0, x0, f0);
    Eigen::VectorXd x = x0, k1 = f0, k2(x0.size()), k3(x0.size()), k4(x0.size());
    double t = t0;
    std::size_t steps = 0;
    for (double target : stops) {
        while ((target - t) * dir > 0) {
            if (++steps > cfg.max_steps) throw IntegrationError("integrator step budget exhausted", t);
            double remaining = (target - t) * dir;
            bool hit = h_nominal >= remaining * (1 - 1e-12);
            double h = dir * (hit ? remaining : h_nominal);
            st.t = t;
            st.eval(x + 0.5 * h * k1, k2);
            st.eval(x + 0.5 * h * k2, k3);
            st.eval(x + h * k3, k4);
            x += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
            t = hit ? target : t + h;
            require_finite(x, t);
            st.t = t;
            st.eval(x, k1);
            traj.push(t, x, k1);
        }
    }
    return traj;
}

Trajectory integrate_rk45(Stepper& st, const Eigen::VectorXd& x0, const Eigen::VectorXd& f0, double t0, double t1,
                          const IntegratorConfig& cfg, const std::vector<double>& stops)
{
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    const Eigen::Index m = x0.size();
    Trajectory traj;
    traj.push(t0, x0, f0);
    Eigen::VectorXd x = x0, k1 = f0, k2(m), k3(m), k4(m), k5(m), k6(m), k7(m), xn(m), err(m);
    double t = t0;
    double h = initial_step(st, x0, f0, dir, std::abs(t1 - t0), cfg);
    std::size_t steps = 0;
    for (double target : stops) {
        while ((target - t) * dir > 0) {
            if (++steps > cfg.max_steps) throw IntegrationError("integrator step budget exhausted", t);
            double remaining = (target - t) * dir;
            double hs = std::min(h, cfg.max_step);
            bool hit = hs >= remaining * (1 - 1e-12);
            if (hit) hs = remaining;
            const double hd = dir * hs;
            st.t = t;
            st.eval(x + hd * (a21 * k1), k2);
            st.eval(x + hd * (a31 * k1 + a32 * k2), k3);
            st.eval(x + hd * (a41 * k1 + a42 * k2 + a43 * k3), k4);
            st.eval(x + hd * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
            st.eval(x + hd * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
            xn = x + hd * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            bool finite = xn.allFinite();
            double en = std::numeric_limits<double>::infinity();
            if (finite) {
                st.eval(xn, k7);
                err = hd * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
                en = error_norm(err, x, xn, cfg);
                if (!std::isfinite(en)) en = std::numeric_limits<double>::infinity();
            }
            if (en <= 1.0) {
                t = hit ? target : t + hd;
                x = xn;
                k1 = k7;
                traj.push(t, x, k1);
                double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                h = hit ? std::max(h, hs * factor) : hs * factor;
                if (hit && factor < 1.0) h = std::min(h, hs * factor);
            } else {
                h = hs * (std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2);
            }
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                if (!finite) throw IntegrationError("state became non-finite (blow-up)", t);
                throw IntegrationError("step size underflow", t);
            }
        }
    }
    return traj;
}

}  // namespace

Trajectory integrate(const RhsFunction& f, const Eigen::VectorXd& x0, double t0, double t1, const IntegratorConfig& cfg,
                     const std::vector<double>& stops)
{
    cfg.validate();
    if (!x0.allFinite()) throw IntegrationError("initial state is not finite", t0);
    Stepper st{f, t0};
    Eigen::VectorXd f0(x0.size());
    st.eval(x0, f0);
    if (t1 == t0) {
        Trajectory traj;
        traj.push(t0, x0, f0);
        return traj;
    }
    auto list = stop_list(t0, t1, stops);
    if (cfg.method == IntegratorMethod::RK4) return integrate_rk4(st, x0, f0, t0, t1, cfg, list);
    return integrate_rk45(st, x0, f0, t0, t1, cfg, list);
}

Trajectory integrate(const VectorField& v, const Eigen::VectorXd& x0, double t0, double t1, const IntegratorConfig& cfg,
                     const std::vector<double>& stops)
{
    if (x0.size() != static_cast<Eigen::Index>(v.dimension()))
        throw Error("integrate: initial state has wrong dimension");
    RhsFunction f = [&v](const Eigen::VectorXd& x, Eigen::VectorXd& dx) { v.evaluate(x, dx); };
    return integrate(f, x0, t0, t1, cfg, stops);
}

std::vector<Eigen::VectorXd> integrate_at(const VectorField& v, const Eigen::VectorXd& x0,
                                          const std::vector<double>& times, const IntegratorConfig& cfg)
{
    if (times.empty()) return {};
    Trajectory traj = integrate(v, x0, times.front(), times.back(), cfg, times);
    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    std::size_t k = 0;
    for (double t : times) {
        while (k < traj.size() && traj.times()[k] != t) ++k;
        if (k == traj.size()) {
            out.push_back(traj.at(t));
            k = 0;
        } else {
            out.push_back(traj.states()[k]);
        }
    }
    return out;
}

Eigen::VectorXd flow_map(const VectorField& v, const Eigen::VectorXd& x0, double t, const IntegratorConfig& cfg)
{
    if (t == 0.0) return x0;
    return integrate(v, x0, 0.0, t, cfg).back();
}

Eigen::VectorXd group_flow(const LieBasis& g, const Eigen::Ref<const Eigen::VectorXd>& eps, const Eigen::VectorXd& x0,
                           const IntegratorConfig& cfg)
{
    if (eps.size() != static_cast<Eigen::Index>(g.size()))
        throw Error("group_flow: parameter count differs from basis size");
    Eigen::VectorXd x = x0;
    for (std::size_t i = g.size(); i-- > 0;) x = flow_map(g[i], x, eps[static_cast<Eigen::Index>(i)], cfg);
    return x;
}

std::vector<double> checkpoints(double T)
{
    std::vector<double> ts(17);
    for (int j = 0; j <= 16; ++j) ts[static_cast<std::size_t>(j)] = T * j / 16.0;
    ts.back() = T;
    return ts;
}

// ---------------------------------------------------------------------------
// Commuting-diagram checks

namespace {

struct DiagramSample {
    double trajectory_residual = 0.0;
    double relatedness_residual = 0.0;
    bool left_chart = false;
    std::string chart_message;
};

}  // namespace

CheckReport diagram_check(const VectorField& v, const ProjectionMap& pi, const VectorField& w_reduced,
                          const std::vector<Eigen::VectorXd>& initial_points, double T, const IntegratorConfig& cfg,
                          double tol, unsigned threads)
{
    if (pi.source_coords() != v.coords())
        throw Error("diagram_check: projection source differs from field coordinates");
    if (pi.target_coords() != w_reduced.coords())
        throw Error("diagram_check: reduced field must live on the projection's target coordinates");
    if (initial_points.empty()) throw Error("diagram_check: no initial points");

    const auto ts = checkpoints(T);
    std::vector<DiagramSample> samples(initial_points.size());
    parallel_for(initial_points.size(), threads, [&](std::size_t i) {
        const Eigen::VectorXd& x0 = initial_points[i];
        DiagramSample& s = samples[i];
        auto upper = integrate_at(v, x0, ts, cfg);
        Eigen::VectorXd y0;
        try {
            y0 = pi(x0, EvalOptions{kSingularEps});
        } catch (const Error& e) {
            s.left_chart = true;
            s.chart_message = e.what();
            return;
        }
        auto lower = integrate_at(w_reduced, y0, ts, cfg);
        for (std::size_t j = 0; j < ts.size(); ++j) {
            try {
                Eigen::VectorXd py = pi(upper[j], EvalOptions{kSingularEps});
                s.trajectory_residual = std::max(s.trajectory_residual, pi.target_difference(py, lower[j]).norm());
                Eigen::VectorXd push = pushforward(pi, v, upper[j]);
                s.relatedness_residual = std::max(s.relatedness_residual, (push - w_reduced(py)).norm());
            } catch (const Error& e) {
                s.left_chart = true;
                s.chart_message = e.what();
                return;
            }
        }
    });

    CheckReport r;
    r.name = "diagram";
    r.method = Method::Numeric;
    double traj_max = 0.0, rel_max = 0.0;
    std::size_t worst_idx = 0;
    double worst_val = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.left_chart) {
            r.verdict = worst(r.verdict, Verdict::Inconclusive);
            if (!r.witness) r.witness = initial_points[i];
            r.details = "trajectory left the chart: " + s.chart_message;
            continue;
        }
        traj_max = std::max(traj_max, s.trajectory_residual);
        rel_max = std::max(rel_max, s.relatedness_residual);
        double val = std::max(s.trajectory_residual, s.relatedness_residual);
        if (val > worst_val) {
            worst_val = val;
            worst_idx = i;
        }
    }
    r.max_residual = std::max(traj_max, rel_max);
    if (!(r.max_residual < tol)) {
        r.verdict = Verdict::Fail;
        r.witness = initial_points[worst_idx];
    }
    std::ostringstream os;
    os.precision(6);
    os << "trajectory residual " << traj_max << ", relatedness residual " << rel_max << " over T=" << T << " at "
       << ts.size() << " checkpoints";
    if (r.details.empty())
        r.details = os.str();
    else
        r.details = os.str() + "; " + r.details;
    return r;
}

double fiber_divergence(const VectorField& v, const ProjectionMap& pi, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& y, double T, const IntegratorConfig& cfg)
{
    if (pi.target_difference(pi(x), pi(y)).norm() >= 1e-10)
        throw Error("fiber_divergence: points do not lie on the same fiber");
    if (x == y) return 0.0;
    const auto ts = checkpoints(T);
    auto tx = integrate_at(v, x, ts, cfg);
    auto ty = integrate_at(v, y, ts, cfg);
    double sup = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) sup = std::max(sup, pi.target_difference(pi(tx[j]), pi(ty[j])).norm());
    return sup;
}

}  // namespace hierdyn
