#pragma once

#include <optional>

#include "hierdyn/check.hpp"
#include "hierdyn/sampling.hpp"
#include "hierdyn/vector_field.hpp"

namespace hierdyn {

/// Pass iff every component of [v, w] vanishes on the domain.
CheckReport is_symmetry(const VectorField& v, const VectorField& w, const Domain& domain,
                        const CheckOptions& options = {});

/// Pass iff [v, w_i] lies in span{w_j} at every sampled point, with
/// point-dependent coefficients. The residual is relative:
/// |[v,w_i] - W c| / (1 + |[v,w_i]|). Samples where the generators lose rank
/// make the result Inconclusive.
CheckReport closure_check(const VectorField& v, const LieBasis& g, const Domain& domain,
                          const CheckOptions& options = {});

/// Pass iff w_i(pi^a) = 0 for every generator and component, on the chart.
CheckReport invariance_check(const ProjectionMap& pi, const LieBasis& g, const Domain& domain,
                             const CheckOptions& options = {});

struct FiberOptions {
    std::size_t fibers = 16;
    std::size_t mates_per_fiber = 4;
    /// Group parameters are drawn from [-eps_range, eps_range]^k.
    double eps_range = 0.5;
};

/// Flows each sampled base point along random group elements and compares
/// pi_*(v) at the base point and its fiber mates (absolute tolerance).
CheckReport fiber_consistency_check(const ProjectionMap& pi, const VectorField& v, const LieBasis& g,
                                    const Domain& domain, const CheckOptions& options = {},
                                    const FiberOptions& fiber = {});

enum class DynamicsClass { TrivialDynamics, NontrivialDynamics };

std::string to_string(DynamicsClass c);

struct Classification {
    DynamicsClass kind = DynamicsClass::TrivialDynamics;
    Method method = Method::Symbolic;
    /// Largest |pi_*(v)| seen while sampling (0 when decided symbolically).
    double max_pushforward = 0.0;
    /// A point with nonzero pushforward, for NontrivialDynamics.
    std::optional<Eigen::VectorXd> witness;
};

/// TrivialDynamics iff pi_*(v) vanishes on the chart, i.e. every component of
/// pi is a first integral of v.
Classification classify_projection(const ProjectionMap& pi, const VectorField& v, const Domain& domain,
                                   const CheckOptions& options = {});

/// Pass iff v(F) = 0 on the domain.
CheckReport first_integral_check(const ScalarExpr& F, const VectorField& v, const Domain& domain,
                                 const CheckOptions& options = {});

}  // namespace hierdyn
