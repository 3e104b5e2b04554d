#include "hierdyn/vector_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <mutex>
#include <set>

#include <Eigen/SVD>

namespace hierdyn {

namespace {

void require_unique(const SymbolList& coords, const char* what)
{
    if (coords.empty()) throw Error(std::string(what) + ": coordinate list is empty");
    std::set<std::string> seen(coords.begin(), coords.end());
    if (seen.size() != coords.size()) throw Error(std::string(what) + ": duplicate coordinate names");
}

void require_symbols(const ScalarExpr& e, const SymbolList& coords)
{
    for (const auto& s : symbols_of(e)) {
        if (std::find(coords.begin(), coords.end(), s) == coords.end()) throw UndeclaredSymbolError(s);
    }
}

std::shared_ptr<const std::vector<CompiledExpr>> compile_all(const std::vector<ScalarExpr>& exprs,
                                                             const SymbolList& coords)
{
    auto out = std::make_shared<std::vector<CompiledExpr>>();
    out->reserve(exprs.size());
    for (const auto& e : exprs) out->emplace_back(e, coords);
    return out;
}

// Row-major n x m table of partial derivatives.
std::shared_ptr<const std::vector<CompiledExpr>> compile_jacobian(const std::vector<ScalarExpr>& exprs,
                                                                  const SymbolList& coords)
{
    std::vector<ScalarExpr> d;
    d.reserve(exprs.size() * coords.size());
    for (const auto& e : exprs) {
        for (const auto& s : coords) d.push_back(differentiate(e, s));
    }
    return compile_all(d, coords);
}

std::string fresh_symbol(std::string base, const std::set<std::string>& taken)
{
    while (taken.count(base)) base += '_';
    return base;
}

}  // namespace

// ---------------------------------------------------------------------------
// VectorField

struct VectorField::JacobianCache {
    std::once_flag once;
    std::shared_ptr<const std::vector<CompiledExpr>> table;
};

VectorField::VectorField(SymbolList coords, std::vector<ScalarExpr> components)
    : coords_(std::move(coords)), components_(std::move(components))
{
    require_unique(coords_, "vector field");
    if (components_.size() != coords_.size())
        throw Error("vector field: " + std::to_string(components_.size()) + " components for " +
                    std::to_string(coords_.size()) + " coordinates");
    for (const auto& c : components_) require_symbols(c, coords_);
    compiled_ = compile_all(components_, coords_);
    jacobian_ = std::make_shared<JacobianCache>();
}

VectorField VectorField::parse(const SymbolList& coords, const std::vector<std::string>& components)
{
    std::vector<ScalarExpr> exprs;
    exprs.reserve(components.size());
    for (const auto& c : components) exprs.push_back(hierdyn::parse(c, coords));
    return VectorField(coords, std::move(exprs));
}

VectorField VectorField::zero(const SymbolList& coords)
{
    return VectorField(coords, std::vector<ScalarExpr>(coords.size(), ScalarExpr(0.0)));
}

void VectorField::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out,
                           EvalOptions options) const
{
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < compiled_->size(); ++i)
        out[static_cast<Eigen::Index>(i)] = (*compiled_)[i](xs, options);
}

Eigen::VectorXd VectorField::operator()(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options) const
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(dimension()));
    evaluate(x, out, options);
    return out;
}

Eigen::MatrixXd VectorField::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options) const
{
    std::call_once(jacobian_->once, [&] { jacobian_->table = compile_jacobian(components_, coords_); });
    const auto& table = *jacobian_->table;
    const auto m = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd J(m, m);
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) J(i, j) = table[static_cast<std::size_t>(i * m + j)](xs, options);
    return J;
}

std::vector<std::string> VectorField::to_strings() const
{
    std::vector<std::string> out;
    for (const auto& c : components_) out.push_back(to_string(c));
    return out;
}

// ---------------------------------------------------------------------------
// LieBasis

LieBasis::LieBasis(SymbolList coords, std::vector<VectorField> generators)
    : coords_(std::move(coords)), generators_(std::move(generators))
{
    require_unique(coords_, "Lie basis");
    for (const auto& g : generators_) {
        if (g.coords() != coords_) throw Error("Lie basis: generator coordinates differ from basis coordinates");
    }
}

Eigen::MatrixXd LieBasis::span_at(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options) const
{
    Eigen::MatrixXd W(static_cast<Eigen::Index>(dimension()), static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) W.col(static_cast<Eigen::Index>(i)) = generators_[i](x, options);
    return W;
}

// ---------------------------------------------------------------------------
// ChartGuard

ChartGuard ChartGuard::parse(const std::string& text, const SymbolList& coords)
{
    struct Rel {
        const char* token;
        Relation relation;
    };
    static constexpr Rel kRelations[] = {
        {"!=", Relation::NotZero}, {">=", Relation::NonNegative}, {"<=", Relation::NonPositive},
        {">", Relation::Positive}, {"<", Relation::Negative},
    };
    for (const auto& r : kRelations) {
        auto pos = text.find(r.token);
        if (pos == std::string::npos) continue;
        ScalarExpr lhs = hierdyn::parse(text.substr(0, pos), coords);
        ScalarExpr rhs = hierdyn::parse(text.substr(pos + std::char_traits<char>::length(r.token)), coords);
        return ChartGuard{simplify(lhs - rhs), r.relation, text};
    }
    throw ParseError("chart guard needs one of !=, >=, <=, >, <", 0);
}

bool ChartGuard::holds(const Eigen::Ref<const Eigen::VectorXd>& x, const SymbolList& coords) const
{
    double v = 0.0;
    try {
        v = evaluate(expr, Binding{coords, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))},
                     EvalOptions{kSingularEps});
    } catch (const DomainError&) {
        return false;
    }
    switch (relation) {
    case Relation::NotZero: return std::abs(v) > kSingularEps;
    case Relation::Positive: return v > 0;
    case Relation::NonNegative: return v >= 0;
    case Relation::Negative: return v < 0;
    case Relation::NonPositive: return v <= 0;
    }
    return false;
}

// ---------------------------------------------------------------------------
// ProjectionMap

ProjectionMap::ProjectionMap(SymbolList source, SymbolList target, std::vector<ScalarExpr> components,
                             std::vector<ChartGuard> guards, std::vector<bool> angular)
    : source_(std::move(source)),
      target_(std::move(target)),
      components_(std::move(components)),
      guards_(std::move(guards)),
      angular_(std::move(angular))
{
    require_unique(source_, "projection source");
    require_unique(target_, "projection target");
    if (components_.size() != target_.size()) throw Error("projection: component count differs from target dimension");
    if (target_.size() > source_.size()) throw Error("projection: target dimension exceeds source dimension");
    if (angular_.empty()) angular_.assign(target_.size(), false);
    if (angular_.size() != target_.size()) throw Error("projection: angular flags do not match target dimension");
    for (const auto& c : components_) require_symbols(c, source_);
    for (const auto& g : guards_) require_symbols(g.expr, source_);
    compiled_ = compile_all(components_, source_);
    jacobian_ = compile_jacobian(components_, source_);
}

ProjectionMap ProjectionMap::parse(const SymbolList& source, const SymbolList& target,
                                   const std::vector<std::string>& components, const std::vector<std::string>& guards,
                                   std::vector<bool> angular)
{
    std::vector<ScalarExpr> exprs;
    for (const auto& c : components) exprs.push_back(hierdyn::parse(c, source));
    std::vector<ChartGuard> gs;
    for (const auto& g : guards) gs.push_back(ChartGuard::parse(g, source));
    return ProjectionMap(source, target, std::move(exprs), std::move(gs), std::move(angular));
}

ProjectionMap ProjectionMap::linear(const SymbolList& source, const Eigen::Ref<const Eigen::MatrixXd>& P)
{
    if (P.cols() != static_cast<Eigen::Index>(source.size())) throw Error("linear projection: column count mismatch");
    SymbolList target;
    std::vector<ScalarExpr> exprs;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        target.push_back("p" + std::to_string(i + 1));
        ScalarExpr row(0.0);
        bool first = true;
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            if (P(i, j) == 0.0) continue;
            ScalarExpr term = ScalarExpr(P(i, j)) * ScalarExpr::symbol(source[static_cast<std::size_t>(j)]);
            row = first ? term : row + term;
            first = false;
        }
        exprs.push_back(row);
    }
    return ProjectionMap(source, target, std::move(exprs));
}

bool ProjectionMap::in_chart(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    return std::all_of(guards_.begin(), guards_.end(), [&](const ChartGuard& g) { return g.holds(x, source_); });
}

void ProjectionMap::require_chart(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (x.size() != static_cast<Eigen::Index>(source_.size())) throw Error("projection: point has wrong dimension");
    for (const auto& g : guards_) {
        if (!g.holds(x, source_)) throw ChartError("point violates chart guard '" + g.text + "'");
    }
}

Eigen::VectorXd ProjectionMap::operator()(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options) const
{
    require_chart(x);
    Eigen::VectorXd y(static_cast<Eigen::Index>(target_.size()));
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < compiled_->size(); ++i) y[static_cast<Eigen::Index>(i)] = (*compiled_)[i](xs, options);
    return y;
}

Eigen::MatrixXd ProjectionMap::jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, EvalOptions options) const
{
    require_chart(x);
    const auto n = static_cast<Eigen::Index>(target_.size());
    const auto m = static_cast<Eigen::Index>(source_.size());
    Eigen::MatrixXd J(n, m);
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) J(i, j) = (*jacobian_)[static_cast<std::size_t>(i * m + j)](xs, options);
    return J;
}

Eigen::MatrixXd ProjectionMap::jacobian_fd(const Eigen::Ref<const Eigen::VectorXd>& x, double step) const
{
    const auto n = static_cast<Eigen::Index>(target_.size());
    const auto m = static_cast<Eigen::Index>(source_.size());
    Eigen::MatrixXd J(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double h = step * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = target_difference((*this)(xp), (*this)(xm)) / (2 * h);
    }
    return J;
}

Eigen::VectorXd ProjectionMap::target_difference(const Eigen::Ref<const Eigen::VectorXd>& a,
                                                 const Eigen::Ref<const Eigen::VectorXd>& b) const
{
    Eigen::VectorXd d = a - b;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (angular_[static_cast<std::size_t>(i)]) d[i] = std::remainder(d[i], 2 * std::numbers::pi);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Operations

ScalarExpr apply(const VectorField& w, const ScalarExpr& F)
{
    for (const auto& s : symbols_of(F)) {
        if (std::find(w.coords().begin(), w.coords().end(), s) == w.coords().end())
            throw Error("apply: symbol '" + s + "' is not a coordinate of the vector field");
    }
    std::optional<ScalarExpr> sum;
    for (std::size_t b = 0; b < w.dimension(); ++b) {
        if (w[b].is_constant(0.0)) continue;
        ScalarExpr d = differentiate(F, w.coords()[b]);
        if (d.is_constant(0.0)) continue;
        ScalarExpr term = w[b] * d;
        sum = sum ? *sum + term : term;
    }
    return sum ? simplify(*sum) : ScalarExpr(0.0);
}

VectorField lie_bracket(const VectorField& v, const VectorField& w)
{
    if (v.coords() != w.coords()) throw Error("lie_bracket: coordinate lists differ");
    std::vector<ScalarExpr> out;
    out.reserve(v.dimension());
    for (std::size_t a = 0; a < v.dimension(); ++a) out.push_back(simplify(apply(v, w[a]) - apply(w, v[a])));
    return VectorField(v.coords(), std::move(out));
}

VectorField combine(const std::vector<VectorField>& fields, const std::vector<double>& coefficients)
{
    if (fields.empty() || fields.size() != coefficients.size()) throw Error("combine: size mismatch");
    const auto& coords = fields.front().coords();
    std::vector<ScalarExpr> out(coords.size(), ScalarExpr(0.0));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].coords() != coords) throw Error("combine: coordinate lists differ");
        for (std::size_t a = 0; a < coords.size(); ++a) out[a] = out[a] + ScalarExpr(coefficients[i]) * fields[i][a];
    }
    for (auto& e : out) e = simplify(e);
    return VectorField(coords, std::move(out));
}

Eigen::VectorXd pushforward(const ProjectionMap& pi, const VectorField& v, const Eigen::Ref<const Eigen::VectorXd>& x,
                            const PushforwardOptions& options)
{
    if (pi.source_coords() != v.coords()) throw Error("pushforward: projection and field use different coordinates");
    Eigen::MatrixXd J = pi.jacobian(x, options.eval);
    if (options.cross_check) {
        Eigen::MatrixXd Jfd = pi.jacobian_fd(x);
        double err = (J - Jfd).norm();
        if (err > 1e-5 * (1.0 + J.norm()))
            throw Error("pushforward: symbolic Jacobian disagrees with finite differences (" + std::to_string(err) +
                        ")");
    }
    return J * v(x, options.eval);
}

ProlongedField prolong1(const VectorField& w)
{
    std::set<std::string> taken(w.coords().begin(), w.coords().end());
    std::string time = fresh_symbol("t", taken);
    taken.insert(time);
    SymbolList velocities;
    for (const auto& c : w.coords()) {
        std::string v = fresh_symbol(c + "_dot", taken);
        taken.insert(v);
        velocities.push_back(v);
    }
    SymbolList jet{time};
    jet.insert(jet.end(), w.coords().begin(), w.coords().end());
    jet.insert(jet.end(), velocities.begin(), velocities.end());

    std::vector<ScalarExpr> comps{ScalarExpr(0.0)};
    comps.insert(comps.end(), w.components().begin(), w.components().end());
    for (std::size_t a = 0; a < w.dimension(); ++a) {
        std::optional<ScalarExpr> sum;
        for (std::size_t b = 0; b < w.dimension(); ++b) {
            ScalarExpr d = differentiate(w[a], w.coords()[b]);
            if (d.is_constant(0.0)) continue;
            ScalarExpr term = ScalarExpr::symbol(velocities[b]) * d;
            sum = sum ? *sum + term : term;
        }
        comps.push_back(sum ? simplify(*sum) : ScalarExpr(0.0));
    }
    return ProlongedField{VectorField(jet, std::move(comps)), w.dimension(), time, velocities};
}

VectorField prolong_apply_to_system(const VectorField& w, const VectorField& v)
{
    if (v.coords() != w.coords()) throw Error("prolong_apply_to_system: coordinate lists differ");
    ProlongedField pr = prolong1(w);
    const std::size_t m = w.dimension();
    std::vector<ScalarExpr> out;
    out.reserve(m);
    for (std::size_t a = 0; a < m; ++a) {
        // Delta^a = xdot^a - xi^a(x) on the jet space
        ScalarExpr delta = ScalarExpr::symbol(pr.velocity_symbols[a]) - v[a];
        ScalarExpr acted = apply(pr.field, delta);
        for (std::size_t b = 0; b < m; ++b) acted = substitute(acted, pr.velocity_symbols[b], v[b]);
        out.push_back(simplify(acted));
    }
    return VectorField(v.coords(), std::move(out));
}

double constant_rank_fraction(const ProjectionMap& pi, const Domain& domain, std::size_t samples, std::uint64_t seed,
                              double rank_tol)
{
    DomainSampler sampler(domain, seed);
    std::size_t usable = 0, full = 0;
    for (std::size_t attempt = 0; attempt < samples * 10 && usable < samples; ++attempt) {
        Eigen::VectorXd x = sampler.next();
        Eigen::MatrixXd J;
        try {
            J = pi.jacobian(x, EvalOptions{kSingularEps});
        } catch (const Error&) {
            continue;
        }
        ++usable;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
        const auto& s = svd.singularValues();
        if (s.size() > 0 && s[s.size() - 1] > rank_tol * std::max(1.0, s[0])) ++full;
    }
    if (usable == 0) throw SamplingError("constant_rank_fraction: no usable sample points");
    return static_cast<double>(full) / static_cast<double>(usable);
}

}  // namespace hierdyn
