#include "epigen/parallel.hpp"
#include "epigen/random.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <set>
#include <stdexcept>

using namespace epigen;

TEST(Stream, SameKeySameSequence)
{
    Stream a(42, StreamTag::individual, 7), b(42, StreamTag::individual, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a(), b());
    }
}

TEST(Stream, DifferentKeysDiffer)
{
    std::set<std::uint64_t> first;
    for (std::uint64_t idx = 0; idx < 1000; ++idx) {
        first.insert(Stream(1, StreamTag::tree, idx)());
    }
    first.insert(Stream(2, StreamTag::tree, 0)());
    first.insert(Stream(1, StreamTag::chain, 0)());
    EXPECT_EQ(first.size(), 1002u);
}

TEST(Stream, DeriveDoesNotAdvanceParent)
{
    Stream a(5), b(5);
    (void)a.derive(StreamTag::palm, 3)();
    EXPECT_EQ(a(), b());
    EXPECT_EQ(a.derive(StreamTag::palm, 3)(), b.derive(StreamTag::palm, 3)());
}

TEST(Stream, UniformRanges)
{
    Stream s(9);
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        const double v = s.uniform_open0();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_GT(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(Stream, BelowIsUniform)
{
    Stream s(3);
    std::vector<int> count(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        ++count[s.below(7)];
    }
    for (int c : count) {
        // binomial sd ~ 92
        EXPECT_NEAR(c, n / 7, 460);
    }
}

class PoissonMoments : public ::testing::TestWithParam<double>
{
};

TEST_P(PoissonMoments, MeanAndVariance)
{
    const double mean = GetParam();
    Stream s(11, StreamTag::test, static_cast<std::uint64_t>(mean * 100));
    const int n = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double k = static_cast<double>(s.poisson(mean));
        sum += k;
        sq += k * k;
    }
    const double m = sum / n;
    const double v = sq / n - m * m;
    EXPECT_NEAR(m, mean, 5 * std::sqrt(mean / n));
    EXPECT_NEAR(v, mean, 0.05 * mean + 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Means, PoissonMoments, ::testing::Values(0.0, 0.3, 1.5, 12.0, 45.0));

TEST(Stream, ExponentialMean)
{
    Stream s(1);
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        sum += s.exponential(2.0);
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * 0.5 / std::sqrt(n));
}

TEST(Parallel, ResultsIndependentOfWorkerCount)
{
    auto run = [] {
        return parallel_map<std::uint64_t>(257, [](std::size_t i) {
            Stream s(123, StreamTag::test, i);
            std::uint64_t x = 0;
            for (int k = 0; k < 100; ++k) {
                x ^= s();
            }
            return x;
        });
    };
    setenv("EPI_THREADS", "1", 1);
    const auto one = run();
    setenv("EPI_THREADS", "4", 1);
    const auto four = run();
    unsetenv("EPI_THREADS");
    EXPECT_EQ(one, four);
}

TEST(Parallel, WorkerCountHonoursCap)
{
    setenv("EPI_THREADS", "1", 1);
    EXPECT_EQ(worker_count(), 1u);
    unsetenv("EPI_THREADS");
    EXPECT_GE(worker_count(), 1u);
}

TEST(Parallel, PropagatesExceptions)
{
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) {
                         throw std::runtime_error("boom");
                     }
                 }),
                 std::runtime_error);
}

TEST(Parallel, RunsEveryIndexOnce)
{
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
}
