#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "hierdyn/check.hpp"
#include "hierdyn/vector_field.hpp"

namespace hierdyn {

enum class IntegratorMethod { RK4, RK45 };

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::RK45;
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    /// Upper bound on |h| for RK45; the fixed step for RK4 (1e-2 when unbounded).
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_steps = 1'000'000;

    void validate() const;
};

class IntegrationError : public Error {
public:
    IntegrationError(const std::string& message, double time);
    double time() const { return time_; }

private:
    double time_;
};

/// Accepted integration steps with cubic Hermite interpolation in between.
class Trajectory {
public:
    Trajectory() = default;

    void push(double t, Eigen::VectorXd x, Eigen::VectorXd dx);

    const std::vector<double>& times() const { return times_; }
    const std::vector<Eigen::VectorXd>& states() const { return states_; }
    std::size_t size() const { return times_.size(); }
    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    const Eigen::VectorXd& back() const { return states_.back(); }

    /// State at t (t within the covered span, either direction of integration).
    Eigen::VectorXd at(double t) const;

    /// CSV with header "t,x1,...,xm".
    void write_csv(std::ostream& os) const;

private:
    std::vector<double> times_;
    std::vector<Eigen::VectorXd> states_;
    std::vector<Eigen::VectorXd> derivatives_;
};

using RhsFunction = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& dx)>;

/// Integrates x' = f(x) from t0 to t1 (t1 < t0 runs backwards). Every time in
/// `stops` lying in the span is hit exactly by an accepted step.
Trajectory integrate(const RhsFunction& f, const Eigen::VectorXd& x0, double t0, double t1,
                     const IntegratorConfig& cfg = {}, const std::vector<double>& stops = {});

Trajectory integrate(const VectorField& v, const Eigen::VectorXd& x0, double t0, double t1,
                     const IntegratorConfig& cfg = {}, const std::vector<double>& stops = {});

/// States at the given times, which must be monotone and start at t0.
std::vector<Eigen::VectorXd> integrate_at(const VectorField& v, const Eigen::VectorXd& x0,
                                          const std::vector<double>& times, const IntegratorConfig& cfg = {});

/// exp(t v)(x0).
Eigen::VectorXd flow_map(const VectorField& v, const Eigen::VectorXd& x0, double t, const IntegratorConfig& cfg = {});

/// exp(eps_1 w_1) o ... o exp(eps_k w_k)(x0).
Eigen::VectorXd group_flow(const LieBasis& g, const Eigen::Ref<const Eigen::VectorXd>& eps, const Eigen::VectorXd& x0,
                           const IntegratorConfig& cfg = {});

/// The 17 evenly spaced checkpoints 0, T/16, ..., T.
std::vector<double> checkpoints(double T);

/// Verifies pi o exp(t v) = exp(t w_reduced) o pi along trajectories from each
/// x0, plus pointwise pi-relatedness pi_*(v) = w_reduced o pi at the samples.
CheckReport diagram_check(const VectorField& v, const ProjectionMap& pi, const VectorField& w_reduced,
                          const std::vector<Eigen::VectorXd>& initial_points, double T,
                          const IntegratorConfig& cfg = {}, double tol = 1e-6, unsigned threads = 1);

/// sup over checkpoints of |pi(exp(t v) x) - pi(exp(t v) y)| for x, y on one fiber.
double fiber_divergence(const VectorField& v, const ProjectionMap& pi, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& y, double T, const IntegratorConfig& cfg = {});

}  // namespace hierdyn
