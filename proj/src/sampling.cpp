#include "hierdyn/sampling.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <thread>

namespace hierdyn {

namespace {

constexpr std::array<int, 32> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,  31,  37,  41,  43,  47,  53,
                                         59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

double radical_inverse(std::uint64_t i, int base)
{
    double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

}  // namespace

Domain::Domain(Eigen::VectorXd lo_, Eigen::VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_))
{
    if (lo.size() != hi.size()) throw SamplingError("domain bounds have different dimensions");
    if (lo.size() == 0) throw SamplingError("domain must have at least one dimension");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (!(hi[i] > lo[i])) throw SamplingError("domain box must have positive volume");
    }
}

Domain Domain::cube(Eigen::Index dim, double lo, double hi)
{
    return Domain(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
}

bool Domain::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const
{
    if (x.size() != lo.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    for (const auto& ball : excluded) {
        if ((x - ball.center).norm() < ball.radius) return false;
    }
    return true;
}

Eigen::VectorXd Domain::map_unit(const Eigen::Ref<const Eigen::VectorXd>& u) const
{
    return lo + (hi - lo).cwiseProduct(u);
}

HaltonSequence::HaltonSequence(Eigen::Index dim, std::uint64_t seed) : dim_(dim), shift_(dim)
{
    if (dim <= 0 || dim > static_cast<Eigen::Index>(kPrimes.size()))
        throw SamplingError("Halton sequence supports 1 to 32 dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    // seed 0 keeps the plain sequence
    for (Eigen::Index i = 0; i < dim; ++i) shift_[i] = seed == 0 ? 0.0 : unif(rng);
}

Eigen::VectorXd HaltonSequence::next()
{
    Eigen::VectorXd u(dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) {
        double v = radical_inverse(index_, kPrimes[static_cast<std::size_t>(i)]) + shift_[i];
        u[i] = v - std::floor(v);
    }
    ++index_;
    return u;
}

DomainSampler::DomainSampler(const Domain& domain, std::uint64_t seed) : domain_(domain), seq_(domain.dimension(), seed)
{
}

Eigen::VectorXd DomainSampler::next()
{
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Eigen::VectorXd x = domain_.map_unit(seq_.next());
        if (domain_.contains(x)) return x;
    }
    throw SamplingError("excluded regions cover the sampling domain");
}

unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    threads = std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace hierdyn
