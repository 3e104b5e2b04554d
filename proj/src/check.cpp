#include "hierdyn/check.hpp"

namespace hierdyn {

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::string to_string(Method m) { return m == Method::Symbolic ? "symbolic" : "numeric"; }

Verdict worst(Verdict a, Verdict b)
{
    auto rank = [](Verdict v) { return v == Verdict::Fail ? 2 : v == Verdict::Inconclusive ? 1 : 0; };
    return rank(a) >= rank(b) ? a : b;
}

}  // namespace hierdyn
