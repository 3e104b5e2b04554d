#pragma once

#include <cmath>

#include "hierdyn/expr.hpp"

namespace hierdyn::detail {

inline double apply_pow(double a, Rational r, double eps)
{
    if (r.num < 0 && std::abs(a) <= eps) throw DomainError("negative power of zero");
    if (r.den == 1) return std::pow(a, static_cast<double>(r.num));
    if (a < 0) {
        if (r.den % 2 == 0) throw DomainError("even root of a negative number");
        // odd root: real branch
        double m = std::pow(-a, r.value());
        return (r.num % 2 == 0) ? m : -m;
    }
    return std::pow(a, r.value());
}

inline double apply_unary(Op op, double a, double eps)
{
    switch (op) {
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::tan(a);
    case Op::Exp: return std::exp(a);
    case Op::Log:
        if (a <= eps) throw DomainError("log of a nonpositive number");
        return std::log(a);
    case Op::Abs: return std::abs(a);
    case Op::Sqrt:
        if (a < 0) throw DomainError("sqrt of a negative number");
        return std::sqrt(a);
    case Op::Atan: return std::atan(a);
    default: throw Error("not a unary operator");
    }
}

inline double apply_binary(Op op, double a, double b, double eps)
{
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
        if (std::abs(b) <= eps) throw DomainError("division by zero");
        return a / b;
    case Op::Atan2:
        if (std::abs(a) <= eps && std::abs(b) <= eps) throw DomainError("atan2 at the origin");
        return std::atan2(a, b);
    default: throw Error("not a binary operator");
    }
}

}  // namespace hierdyn::detail
