#include "epigen/error.hpp"
#include "epigen/poisson_tree.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace epigen;

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

struct Scenario {
    IntensityKernel tau = IntensityKernel::exponential(1.5, 1.0);
    InitialCondition ic{0.05, AgeDensity::exponential(0.5), tau};
};

/// Full recursion over every vertex whose accumulated edge length stays within rem, with no pruning
/// by the best value found so far. Returns the geodesic value if it is at most rem, else inf.
double exhaustive(const TreeParams& p, const Stream& node, double rem)
{
    const auto kids = expand_node(p, node);
    double best     = inf;
    for (std::size_t i = 0; i < kids.size(); ++i) {
        const auto& k = kids[i];
        if (k.length > rem) {
            continue;
        }
        double cand = k.length;
        if (!k.initial) {
            const double sub = exhaustive(p, child_stream(node, i), rem - k.length);
            if (sub == inf) {
                continue;
            }
            cand += sub;
        }
        if (k.s <= (*p.contact)(cand)) {
            best = std::min(best, cand);
        }
    }
    return best;
}

} // namespace

TEST(PoissonTree, PrunedSearchMatchesExhaustiveSearch)
{
    Scenario s;
    const auto c = ContactRate::piecewise_constant({1.0, 2.0}, {1.0, 0.4, 0.8});
    TreeParams p(s.tau, c, s.ic, 3.0);
    p.node_cap           = 1'000'000;
    std::size_t finite   = 0;
    for (std::uint64_t i = 0; i < 1500; ++i) {
        const auto root   = tree_root(5, i);
        const auto g      = sample_geodesic(p, root);
        const double want = exhaustive(p, root, p.horizon);
        if (want == inf) {
            EXPECT_TRUE(g.censored) << i;
        }
        else {
            ++finite;
            ASSERT_FALSE(g.censored) << i;
            EXPECT_EQ(g.sigma, want) << i;
        }
    }
    EXPECT_GT(finite, 100u);
}

TEST(PoissonTree, IterativeDeepeningAgreesWithSinglePass)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 4.0);
    TreeParams q            = p;
    q.iterative_deepening   = true;
    for (std::uint64_t i = 0; i < 500; ++i) {
        const auto a = sample_geodesic(p, tree_root(2, i));
        const auto b = sample_geodesic(q, tree_root(2, i));
        EXPECT_EQ(a.censored, b.censored);
        if (!a.censored) {
            EXPECT_EQ(a.sigma, b.sigma);
        }
    }
}

TEST(PoissonTree, PathTimesDecreaseToNegativeAge)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 5.0);
    for (std::uint64_t i = 0; i < 300; ++i) {
        const auto g = sample_geodesic(p, tree_root(3, i));
        if (g.censored) {
            continue;
        }
        ASSERT_GE(g.path_times.size(), 2u);
        EXPECT_EQ(g.path_times.front(), g.sigma);
        for (std::size_t k = 1; k < g.path_times.size(); ++k) {
            EXPECT_LT(g.path_times[k], g.path_times[k - 1]);
        }
        EXPECT_LT(g.path_times.back(), 0.0);
        for (std::size_t k = 0; k + 1 < g.path_times.size(); ++k) {
            EXPECT_GE(g.path_times[k], 0.0);
        }
    }
}

TEST(PoissonTree, SameRootIsDeterministic)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 5.0);
    for (std::uint64_t i = 0; i < 50; ++i) {
        const auto a = sample_geodesic(p, tree_root(8, i));
        const auto b = sample_geodesic(p, tree_root(8, i));
        EXPECT_EQ(a.path_times, b.path_times);
        EXPECT_EQ(a.nodes_expanded, b.nodes_expanded);
    }
}

TEST(PoissonTree, ZeroContactRateIsAlwaysCensored)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(0.0), s.ic, 5.0);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto g = sample_geodesic(p, tree_root(4, i));
        EXPECT_TRUE(g.censored);
        EXPECT_EQ(g.sigma, inf);
    }
    const auto est = estimate_B(p, {1.0, 5.0}, 500, 1);
    EXPECT_EQ(est.estimate[0], 0.0);
    EXPECT_EQ(est.estimate[1], 0.0);
}

TEST(PoissonTree, NodeCapThrows)
{
    Scenario s;
    const auto tau = IntensityKernel::exponential(8.0, 1.0);
    InitialCondition ic(1e-6, AgeDensity::exponential(0.5), tau);
    TreeParams p(tau, ContactRate::constant(1.0), ic, 30.0);
    p.node_cap = 50;
    bool threw = false;
    for (std::uint64_t i = 0; i < 20 && !threw; ++i) {
        try {
            sample_geodesic(p, tree_root(1, i));
        }
        catch (const Error& e) {
            threw = std::string(e.what()).find("node cap") != std::string::npos;
        }
    }
    EXPECT_TRUE(threw);
}

TEST(PoissonTree, EstimateIsMonotoneAndBounded)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 6.0);
    const auto est = estimate_B(p, {0.5, 1.0, 2.0, 4.0, 6.0}, 4000, 12);
    for (std::size_t k = 1; k < est.estimate.size(); ++k) {
        EXPECT_LE(est.estimate[k - 1], est.estimate[k]);
    }
    EXPECT_LE(est.estimate.back(), s.ic.s0());
    EXPECT_GT(est.estimate.back(), 0.0);
}

TEST(PoissonTree, OffspringCountsHavePoissonMeans)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 5.0);
    double ns = 0, ni = 0;
    const std::size_t n = 20000;
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& k : expand_node(p, tree_root(6, i))) {
            (k.initial ? ni : ns) += 1.0;
        }
    }
    EXPECT_NEAR(ns / n, p.s0r0, 5 * std::sqrt(p.s0r0 / n));
    EXPECT_NEAR(ni / n, p.i0r0bar, 5 * std::sqrt(p.i0r0bar / n));
}

TEST(PoissonTree, ConditioningWindowTooNarrowThrows)
{
    Scenario s;
    TreeParams p(s.tau, ContactRate::constant(1.0), s.ic, 5.0);
    EXPECT_THROW(conditioned_paths(p, 2.0, 1e-6, 100, 1), Error);
    EXPECT_THROW(conditioned_paths(p, 2.0, 0.0, 100, 1), Error);
}
