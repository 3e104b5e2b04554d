#pragma once

#include <functional>
#include <optional>

#include "hierdyn/check.hpp"
#include "hierdyn/flow.hpp"
#include "hierdyn/vector_field.hpp"

namespace hierdyn {

class QuotientError : public Error {
public:
    using Error::Error;
};

/// Transversal slice {s_1 = ... = s_k = 0} of the group orbits together with
/// chart coordinates read off on it. With no constraints the chart is applied
/// to points directly, which is how a closed-form candidate is expressed.
struct CrossSection {
    SymbolList coords;
    std::vector<ScalarExpr> constraints;
    std::vector<ScalarExpr> chart;
    SymbolList chart_names;
    std::vector<ChartGuard> guards;
    /// Chart components compared modulo 2*pi.
    std::vector<bool> angular;
    std::optional<Domain> validity;

    static CrossSection parse(const SymbolList& coords, const std::vector<std::string>& constraints,
                              const std::vector<std::string>& chart, SymbolList chart_names = {},
                              const std::vector<std::string>& guards = {}, std::vector<bool> angular = {});

    std::size_t chart_dimension() const { return chart.size(); }
    /// Guards hold and x lies in the validity box (if any).
    bool admits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd constraint_values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::VectorXd chart_values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Chart difference with angular components wrapped onto (-pi, pi].
    Eigen::VectorXd chart_difference(const Eigen::Ref<const Eigen::VectorXd>& a,
                                     const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

struct CanonicalizeOptions {
    double tol = 1e-10;
    std::size_t max_iter = 50;
    /// Finite-difference step for the Jacobian of s o Phi in eps.
    double fd_step = 1e-6;
    IntegratorConfig flow{IntegratorMethod::RK45, 1e-12, 1e-14};
};

struct Canonical {
    Eigen::VectorXd point;
    Eigen::VectorXd eps;
    double residual = 0.0;
    std::size_t iterations = 0;
};

/// Finds eps with s(Phi_eps(x)) = 0 by Newton's method, falling back to
/// damped steps and then to other starting parameters. The representative
/// must satisfy the section guards.
Canonical canonicalize(const LieBasis& g, const CrossSection& sec, const Eigen::VectorXd& x,
                       const CanonicalizeOptions& options = {});

/// Chart coordinates of the orbit representative of x.
Eigen::VectorXd quotient_map(const LieBasis& g, const CrossSection& sec, const Eigen::VectorXd& x,
                             const CanonicalizeOptions& options = {});

/// Pass iff |q(exp(delta w_i) x) - q(x)| / delta < tol for every generator at
/// every sample, q being the quotient map.
CheckReport verify_quotient_invariance(const LieBasis& g, const CrossSection& sec, const Domain& domain,
                                       const CheckOptions& options = {}, double delta = 1e-4,
                                       const CanonicalizeOptions& canon = {});

using PointMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Compares the partitions induced by two maps on pairs (x, y), half of them
/// on a common orbit (y = Phi_eps(x), eps in [-1,1]^k) and half independent.
/// Pass iff "f(x) = f(y)" and "h(x) = h(y)" (each to tol) agree on every pair.
/// Pairs where either map throws are skipped.
CheckReport partition_agreement(const LieBasis& g, const PointMap& f, const PointMap& h, const Domain& domain,
                                std::size_t pairs, double tol, std::uint64_t seed = 0,
                                const IntegratorConfig& flow = {IntegratorMethod::RK45, 1e-12, 1e-14});

/// Pairwise consistency of two sections on their sampled overlap.
CheckReport section_overlap_check(const LieBasis& g, const CrossSection& a, const CrossSection& b, const Domain& domain,
                                  const CheckOptions& options = {}, const CanonicalizeOptions& canon = {});

}  // namespace hierdyn
