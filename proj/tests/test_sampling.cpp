#include <atomic>
#include <stdexcept>

#include <gtest/gtest.h>

#include "hierdyn/sampling.hpp"

using namespace hierdyn;

TEST(Halton, StaysInUnitCubeAndIsSeeded)
{
    HaltonSequence a(3, 7), b(3, 7), c(3, 8);
    bool differs = false;
    for (int i = 0; i < 500; ++i) {
        Eigen::VectorXd u = a.next();
        EXPECT_TRUE((u.array() >= 0.0).all() && (u.array() < 1.0).all());
        EXPECT_EQ(u, b.next());
        if (u != c.next()) differs = true;
    }
    EXPECT_TRUE(differs);
}

TEST(Halton, IsLowDiscrepancy)
{
    // every cell of a 4x4 grid gets close to its share of 1024 points
    HaltonSequence h(2, 1);
    int counts[4][4] = {};
    for (int i = 0; i < 1024; ++i) {
        Eigen::VectorXd u = h.next();
        ++counts[static_cast<int>(u(0) * 4)][static_cast<int>(u(1) * 4)];
    }
    for (auto& row : counts)
        for (int c : row) EXPECT_NEAR(c, 64, 8);
}

TEST(Halton, DimensionLimit)
{
    EXPECT_THROW(HaltonSequence(0, 0), Error);
    EXPECT_THROW(HaltonSequence(1000, 0), Error);
}

TEST(Domain, ContainsAndExclusion)
{
    Domain d = Domain::cube(2, -1, 1);
    d.excluded.push_back({Eigen::Vector2d(0, 0), 0.5});
    EXPECT_TRUE(d.contains(Eigen::Vector2d(0.9, 0.0)));
    EXPECT_FALSE(d.contains(Eigen::Vector2d(0.1, 0.1)));
    EXPECT_FALSE(d.contains(Eigen::Vector2d(1.5, 0.0)));

    DomainSampler s(d, 3);
    for (int i = 0; i < 300; ++i) {
        Eigen::VectorXd x = s.next();
        EXPECT_TRUE(d.contains(x));
        EXPECT_GE(x.norm(), 0.5);
    }
}

TEST(Domain, MapUnit)
{
    Domain d(Eigen::Vector2d(0.5, -1), Eigen::Vector2d(2, 1));
    EXPECT_EQ(d.map_unit(Eigen::Vector2d(0, 0)), Eigen::Vector2d(0.5, -1));
    EXPECT_EQ(d.map_unit(Eigen::Vector2d(0.5, 0.5)), Eigen::Vector2d(1.25, 0));
}

TEST(Domain, RejectsBadBoxes)
{
    EXPECT_THROW(Domain(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), Error);
    EXPECT_THROW(Domain(Eigen::Vector2d(0, 0), Eigen::Vector3d(1, 1, 1)), Error);
}

TEST(Domain, FullyExcludedBoxStarvesSampler)
{
    Domain d = Domain::cube(2, -1, 1);
    d.excluded.push_back({Eigen::Vector2d(0, 0), 10.0});
    DomainSampler s(d, 0);
    EXPECT_THROW((void)s.next(), SamplingError);
}

TEST(ParallelFor, VisitsEveryIndexOnce)
{
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, RethrowsLowestIndexFirst)
{
    for (unsigned threads : {1u, 3u, 8u}) {
        try {
            parallel_for(100, threads, [](std::size_t i) {
                if (i == 17 || i == 80) throw std::runtime_error(std::to_string(i));
            });
            FAIL();
        } catch (const std::runtime_error& e) {
            EXPECT_STREQ(e.what(), "17");
        }
    }
}

TEST(ParallelFor, ResolveThreads)
{
    EXPECT_EQ(resolve_threads(3), 3u);
    EXPECT_GE(resolve_threads(0), 1u);
}
