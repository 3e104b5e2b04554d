#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "hierdyn/error.hpp"

namespace hierdyn {

class SamplingError : public Error {
public:
    using Error::Error;
};

/// Axis-aligned sampling box with optional excluded balls around declared
/// singular loci (e.g. the origin for a scaling action).
struct Domain {
    struct Ball {
        Eigen::VectorXd center;
        double radius = 0.0;
    };

    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::vector<Ball> excluded;

    Domain() = default;
    Domain(Eigen::VectorXd lo_, Eigen::VectorXd hi_);

    static Domain cube(Eigen::Index dim, double lo, double hi);

    Eigen::Index dimension() const { return lo.size(); }
    bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Maps u in [0,1)^d affinely onto the box.
    Eigen::VectorXd map_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const;
};

/// Randomly shifted Halton sequence (Cranley-Patterson rotation seeded by
/// `seed`). Dimension is limited by the prime table (32).
class HaltonSequence {
public:
    HaltonSequence(Eigen::Index dim, std::uint64_t seed);

    /// Next point of [0,1)^dim.
    Eigen::VectorXd next();

private:
    Eigen::Index dim_;
    std::uint64_t index_ = 1;
    Eigen::VectorXd shift_;
};

/// Draws points of `domain` from a HaltonSequence, skipping excluded balls.
class DomainSampler {
public:
    DomainSampler(const Domain& domain, std::uint64_t seed);
    Eigen::VectorXd next();

private:
    Domain domain_;
    HaltonSequence seq_;
};

/// Number of worker threads used when a caller asks for `requested`
/// (0 means hardware concurrency).
unsigned resolve_threads(unsigned requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown on the calling thread, lowest index first.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace hierdyn
