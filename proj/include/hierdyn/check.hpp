#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace hierdyn {

enum class Verdict { Pass, Fail, Inconclusive };
enum class Method { Symbolic, Numeric };

std::string to_string(Verdict v);
std::string to_string(Method m);

/// Outcome of one decision procedure.
///
/// A Fail always carries a witness point; a numeric Pass has max_residual
/// below the tolerance it was run with.
struct CheckReport {
    std::string name;
    Verdict verdict = Verdict::Pass;
    Method method = Method::Symbolic;
    double max_residual = 0.0;
    std::optional<Eigen::VectorXd> witness;
    std::string details;

    bool passed() const { return verdict == Verdict::Pass; }
};

/// Sampling controls shared by the numeric checks.
struct CheckOptions {
    double tol = 1e-9;
    std::size_t samples = 128;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Worst verdict first: Fail over Inconclusive over Pass.
Verdict worst(Verdict a, Verdict b);

}  // namespace hierdyn
