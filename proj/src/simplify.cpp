// Rule-based simplifier.
//
// Expressions are brought into a sum of monomials c * prod(atom^r) where an
// atom is a symbol, a function application with a simplified argument, or a
// sum that cannot be expanded (negative or fractional power). Atoms are keyed
// by their printed form, which makes like-term merging exact.

#include <cmath>
#include <map>
#include <vector>

#include "eval_kernels.hpp"
#include "hierdyn/expr.hpp"

namespace hierdyn {

namespace {

struct Factor {
    std::string key;
    Rational exp;

    friend bool operator==(const Factor&, const Factor&) = default;
    friend bool operator<(const Factor& a, const Factor& b)
    {
        if (a.key != b.key) return a.key < b.key;
        return a.exp < b.exp;
    }
};

using Monomial = std::vector<Factor>;

struct Poly {
    std::map<Monomial, double> terms;

    bool empty() const { return terms.empty(); }
    void add(const Monomial& m, double c)
    {
        if (c == 0.0) return;
        auto [it, inserted] = terms.emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms.erase(it);
        }
    }
    bool single() const { return terms.size() == 1; }
    bool is_constant() const { return terms.empty() || (single() && terms.begin()->first.empty()); }
    double constant_value() const { return terms.empty() ? 0.0 : terms.begin()->second; }
};

constexpr std::size_t kMaxTerms = 4096;
constexpr std::int64_t kMaxExpandPower = 8;

class Simplifier {
public:
    ScalarExpr run(const ScalarExpr& e) { return from_poly(to_poly(e)); }

private:
    std::map<std::string, ScalarExpr> atoms_;

    std::string intern(const ScalarExpr& atom)
    {
        std::string key = atom.op() == Op::Symbol ? atom.name() : to_string(atom);
        atoms_.emplace(key, atom);
        return key;
    }

    Poly constant(double c)
    {
        Poly p;
        p.add({}, c);
        return p;
    }

    Poly atom_power(const ScalarExpr& atom, Rational r)
    {
        Poly p;
        if (r.num == 0) {
            p.add({}, 1.0);
            return p;
        }
        p.add({Factor{intern(atom), r}}, 1.0);
        return p;
    }

    // c^r that cannot be folded stays a single opaque atom so later exponent
    // arithmetic never turns it back into a foldable constant.
    Poly opaque_power(double c, Rational r) { return atom_power(pow(ScalarExpr(c), r), Rational(1)); }

    Poly scale(Poly p, double s)
    {
        if (s == 0.0) return {};
        for (auto& [m, c] : p.terms) c *= s;
        return p;
    }

    Poly add(Poly a, const Poly& b, double sign = 1.0)
    {
        for (const auto& [m, c] : b.terms) a.add(m, sign * c);
        return a;
    }

    static Monomial merge(const Monomial& a, const Monomial& b)
    {
        Monomial out;
        out.reserve(a.size() + b.size());
        std::size_t i = 0, j = 0;
        while (i < a.size() || j < b.size()) {
            if (j == b.size() || (i < a.size() && a[i].key < b[j].key)) {
                out.push_back(a[i++]);
            } else if (i == a.size() || b[j].key < a[i].key) {
                out.push_back(b[j++]);
            } else {
                Rational r = a[i].exp + b[j].exp;
                if (r.num != 0) out.push_back({a[i].key, r});
                ++i;
                ++j;
            }
        }
        return out;
    }

    // Applies rules that can only be seen once exponents are known:
    // |u|^(2k) -> u^(2k) and expansion of sum atoms raised to a positive
    // integer power.
    Poly normalize_term(const Monomial& m, double c)
    {
        Poly rest;
        Monomial kept;
        std::vector<Poly> expand;
        for (const Factor& f : m) {
            const ScalarExpr& atom = atoms_.at(f.key);
            if (atom.op() == Op::Abs && f.exp.is_integer() && f.exp.num % 2 == 0) {
                expand.push_back(power(to_poly(atom.arg(0)), f.exp));
            } else if (is_sum(atom) && f.exp.is_integer() && f.exp.num > 0 && f.exp.num <= kMaxExpandPower) {
                expand.push_back(power(to_poly(atom), f.exp));
            } else {
                kept.push_back(f);
            }
        }
        rest.add(kept, c);
        for (const Poly& p : expand) rest = multiply(rest, p);
        return rest;
    }

    static bool is_sum(const ScalarExpr& e) { return e.op() == Op::Add || e.op() == Op::Sub || e.op() == Op::Neg; }

    Poly multiply(const Poly& a, const Poly& b)
    {
        if (a.empty() || b.empty()) return {};
        if (a.terms.size() * b.terms.size() > kMaxTerms) {
            Poly p;
            Monomial m =
                merge({Factor{intern(from_poly(a)), Rational(1)}}, {Factor{intern(from_poly(b)), Rational(1)}});
            p.add(m, 1.0);
            return p;
        }
        Poly out;
        for (const auto& [ma, ca] : a.terms) {
            for (const auto& [mb, cb] : b.terms) {
                Monomial m = merge(ma, mb);
                bool needs_fix = false;
                for (const Factor& f : m) {
                    const ScalarExpr& atom = atoms_.at(f.key);
                    if ((atom.op() == Op::Abs && f.exp.is_integer() && f.exp.num % 2 == 0) ||
                        (is_sum(atom) && f.exp.is_integer() && f.exp.num > 0)) {
                        needs_fix = true;
                        break;
                    }
                }
                if (needs_fix)
                    out = add(std::move(out), normalize_term(m, ca * cb));
                else
                    out.add(m, ca * cb);
            }
        }
        return out;
    }

    Poly reciprocal(const Poly& p) { return power(p, Rational(-1)); }

    Poly power(const Poly& p, Rational r)
    {
        if (r.num == 0) return constant(1.0);
        if (r == Rational(1)) return p;
        if (p.empty()) {
            if (r.num > 0) return {};
            return opaque_power(0.0, r);
        }
        if (p.is_constant()) {
            double c = p.constant_value();
            try {
                double v = detail::apply_pow(c, r, 0.0);
                if (std::isfinite(v)) return constant(v);
            } catch (const DomainError&) {
            }
            return opaque_power(c, r);
        }
        if (p.single()) {
            const auto& [m, c] = *p.terms.begin();
            bool combine = r.is_integer();
            if (!combine && c > 0) {
                combine = true;
                for (const Factor& f : m) {
                    if (f.exp.num % 2 == 0) combine = false;
                }
            }
            if (combine) {
                Monomial out;
                for (const Factor& f : m) out.push_back({f.key, f.exp * r});
                return normalize_term(out, detail::apply_pow(c, r, 0.0));
            }
            return atom_power(from_poly(p), r);
        }
        if (r.is_integer() && r.num > 0 && r.num <= kMaxExpandPower) {
            Poly acc = p;
            for (std::int64_t i = 1; i < r.num; ++i) acc = multiply(acc, p);
            return acc;
        }
        return atom_power(from_poly(p), r);
    }

    Poly function(Op op, const ScalarExpr& arg)
    {
        Poly pa = to_poly(arg);
        ScalarExpr sa = from_poly(pa);
        if (sa.is_constant()) {
            try {
                double v = detail::apply_unary(op, sa.value(), 0.0);
                if (std::isfinite(v)) return constant(v);
            } catch (const DomainError&) {
            }
        }
        if (op == Op::Abs) {
            if (sa.op() == Op::Abs) return pa;
            // |c * prod(a_i^(2k_i))| with c > 0 is the monomial itself
            if (pa.single() && pa.terms.begin()->second > 0) {
                bool even = true;
                for (const Factor& f : pa.terms.begin()->first) {
                    if (!(f.exp.is_integer() && f.exp.num % 2 == 0)) even = false;
                }
                if (even) return pa;
            }
        }
        return atom_power(ScalarExpr::unary(op, sa), Rational(1));
    }

    Poly to_poly(const ScalarExpr& e)
    {
        switch (e.op()) {
        case Op::Const: return constant(e.value());
        case Op::Symbol: return atom_power(e, Rational(1));
        case Op::Neg: return scale(to_poly(e.arg(0)), -1.0);
        case Op::Add: return add(to_poly(e.arg(0)), to_poly(e.arg(1)));
        case Op::Sub: return add(to_poly(e.arg(0)), to_poly(e.arg(1)), -1.0);
        case Op::Mul: return multiply(to_poly(e.arg(0)), to_poly(e.arg(1)));
        case Op::Div: return multiply(to_poly(e.arg(0)), reciprocal(to_poly(e.arg(1))));
        case Op::Pow: return power(to_poly(e.arg(0)), e.exponent());
        case Op::Sqrt: return power(to_poly(e.arg(0)), Rational(1, 2));
        case Op::Atan2: {
            ScalarExpr y = from_poly(to_poly(e.arg(0)));
            ScalarExpr x = from_poly(to_poly(e.arg(1)));
            if (y.is_constant() && x.is_constant()) {
                try {
                    return constant(detail::apply_binary(Op::Atan2, y.value(), x.value(), 0.0));
                } catch (const DomainError&) {
                }
            }
            return atom_power(atan2(y, x), Rational(1));
        }
        default: return function(e.op(), e.arg(0));
        }
    }

    ScalarExpr factor_expr(const Factor& f, bool negate_exp)
    {
        const ScalarExpr& atom = atoms_.at(f.key);
        Rational r = negate_exp ? Rational(-f.exp.num, f.exp.den) : f.exp;
        if (r == Rational(1)) return atom;
        return pow(atom, r);
    }

    ScalarExpr from_poly(const Poly& p)
    {
        if (p.empty()) return ScalarExpr(0.0);
        std::vector<std::pair<const Monomial*, double>> order;
        order.reserve(p.terms.size());
        for (const auto& [m, c] : p.terms) {
            if (!m.empty()) order.emplace_back(&m, c);
        }
        if (p.terms.begin()->first.empty()) order.emplace_back(&p.terms.begin()->first, p.terms.begin()->second);

        std::optional<ScalarExpr> acc;
        for (const auto& [mp, c] : order) {
            const Monomial& m = *mp;
            std::optional<ScalarExpr> num, den;
            for (const Factor& f : m) {
                if (f.exp.num > 0)
                    num = num ? *num * factor_expr(f, false) : factor_expr(f, false);
                else
                    den = den ? *den * factor_expr(f, true) : factor_expr(f, true);
            }
            double mag = std::abs(c);
            ScalarExpr term = num ? (mag == 1.0 ? *num : ScalarExpr(mag) * *num) : ScalarExpr(mag);
            if (den) term = term / *den;
            if (!acc && m.empty())
                acc = ScalarExpr(c);
            else if (!acc)
                acc = c < 0 ? -term : term;
            else
                acc = c < 0 ? *acc - term : *acc + term;
        }
        return *acc;
    }
};

}  // namespace

ScalarExpr simplify(const ScalarExpr& e) { return Simplifier{}.run(e); }

}  // namespace hierdyn
