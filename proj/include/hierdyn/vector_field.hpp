#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hierdyn/expr.hpp"

namespace hierdyn {

/// Magnitude below which denominators count as singular in sampled checks.
inline constexpr double kSingularEps = 1e-12;

class ChartError : public Error {
public:
    using Error::Error;
};

/// Autonomous vector field sum_a c^a(x) d/dx^a on named coordinates.
class VectorField {
public:
    VectorField(SymbolList coords, std::vector<ScalarExpr> components);

    /// Parses one expression per coordinate. Symbols outside `coords` (in
    /// particular a time variable) are rejected.
    static VectorField parse(const SymbolList& coords, const std::vector<std::string>& components);
    static VectorField zero(const SymbolList& coords);

    const SymbolList& coords() const { return coords_; }
    const std::vector<ScalarExpr>& components() const { return components_; }
    const ScalarExpr& operator[](std::size_t i) const { return components_[i]; }
    std::size_t dimension() const { return coords_.size(); }

    Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const;
    void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out,
                  EvalOptions options = {}) const;

    /// Symbolic Jacobian d c^a / d x^b evaluated at x.
    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const;

    std::vector<std::string> to_strings() const;

private:
    SymbolList coords_;
    std::vector<ScalarExpr> components_;
    struct JacobianCache;
    std::shared_ptr<const std::vector<CompiledExpr>> compiled_;
    std::shared_ptr<JacobianCache> jacobian_;
};

/// Ordered generators of a Lie algebra of vector fields sharing coordinates.
/// May be empty (the trivial group).
class LieBasis {
public:
    LieBasis(SymbolList coords, std::vector<VectorField> generators);

    const SymbolList& coords() const { return coords_; }
    const std::vector<VectorField>& generators() const { return generators_; }
    const VectorField& operator[](std::size_t i) const { return generators_[i]; }
    std::size_t size() const { return generators_.size(); }
    std::size_t dimension() const { return coords_.size(); }

    /// m x k matrix whose columns are the generators evaluated at x.
    Eigen::MatrixXd span_at(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const;

private:
    SymbolList coords_;
    std::vector<VectorField> generators_;
};

/// Inequality restricting where a chart is valid, e.g. "y != 0" or "x > 0.1".
struct ChartGuard {
    enum class Relation { NotZero, Positive, NonNegative, Negative, NonPositive };

    ScalarExpr expr;  // compared with zero
    Relation relation = Relation::NotZero;
    std::string text;

    static ChartGuard parse(const std::string& text, const SymbolList& coords);
    bool holds(const Eigen::Ref<const Eigen::VectorXd>& x, const SymbolList& coords) const;
};

/// Smooth map pi: M -> N given by n component expressions in m source
/// coordinates, n <= m, valid where every guard holds.
class ProjectionMap {
public:
    ProjectionMap(SymbolList source, SymbolList target, std::vector<ScalarExpr> components,
                  std::vector<ChartGuard> guards = {}, std::vector<bool> angular = {});

    static ProjectionMap parse(const SymbolList& source, const SymbolList& target,
                               const std::vector<std::string>& components, const std::vector<std::string>& guards = {},
                               std::vector<bool> angular = {});
    static ProjectionMap linear(const SymbolList& source, const Eigen::Ref<const Eigen::MatrixXd>& P);

    const SymbolList& source_coords() const { return source_; }
    const SymbolList& target_coords() const { return target_; }
    const std::vector<ScalarExpr>& components() const { return components_; }
    const std::vector<ChartGuard>& guards() const { return guards_; }
    /// Components that are angles, compared modulo 2*pi.
    const std::vector<bool>& angular() const { return angular_; }
    std::size_t source_dimension() const { return source_.size(); }
    std::size_t target_dimension() const { return target_.size(); }

    bool in_chart(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Throws ChartError outside the chart and DomainError at singularities.
    Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const;
    Eigen::MatrixXd jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options = {}) const;
    /// Central finite-difference Jacobian (independent of the symbolic one).
    Eigen::MatrixXd jacobian_fd(const Eigen::Ref<const Eigen::VectorXd>& x, double step = 1e-6) const;

    /// Difference of two target points, wrapping angular components onto (-pi, pi].
    Eigen::VectorXd target_difference(const Eigen::Ref<const Eigen::VectorXd>& a,
                                      const Eigen::Ref<const Eigen::VectorXd>& b) const;

private:
    void require_chart(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    SymbolList source_;
    SymbolList target_;
    std::vector<ScalarExpr> components_;
    std::vector<ChartGuard> guards_;
    std::vector<bool> angular_;
    std::shared_ptr<const std::vector<CompiledExpr>> compiled_;
    std::shared_ptr<const std::vector<CompiledExpr>> jacobian_;
};

/// First prolongation of an autonomous field on jet coordinates
/// (t, x^1..x^m, xdot^1..xdot^m). The t component is always zero.
struct ProlongedField {
    VectorField field;
    std::size_t base_dimension = 0;
    std::string time_symbol;
    SymbolList velocity_symbols;
};

/// w(F) = sum_b w^b dF/dx^b, simplified.
ScalarExpr apply(const VectorField& w, const ScalarExpr& F);

/// [v, w]^a = v(w^a) - w(v^a).
VectorField lie_bracket(const VectorField& v, const VectorField& w);

/// Linear combination sum_i c_i X_i of fields on shared coordinates.
VectorField combine(const std::vector<VectorField>& fields, const std::vector<double>& coefficients);

struct PushforwardOptions {
    /// Compare the symbolic Jacobian with finite differences and throw on mismatch.
    bool cross_check = false;
    EvalOptions eval{kSingularEps};
};

/// pi_*(v|_x) = Dpi(x) v(x).
Eigen::VectorXd pushforward(const ProjectionMap& pi, const VectorField& v, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const PushforwardOptions& options = {});

ProlongedField prolong1(const VectorField& w);

/// pr1 w [xdot - xi(x)] with xdot replaced by xi(x), the field of v.
VectorField prolong_apply_to_system(const VectorField& w, const VectorField& v);

/// Fraction of sampled points at which the numeric Jacobian of pi has full row rank.
double constant_rank_fraction(const ProjectionMap& pi, const Domain& domain, std::size_t samples,
                              std::uint64_t seed = 0, double rank_tol = 1e-8);

}  // namespace hierdyn
