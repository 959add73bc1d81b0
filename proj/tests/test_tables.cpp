#include "epigen/tables.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace epigen;

TEST(InverseCdfTable, UniformDensityQuantiles)
{
    InverseCdfTable t(0.0, 0.5, {2.0, 2.0, 2.0});
    EXPECT_DOUBLE_EQ(t.total(), 2.0);
    EXPECT_DOUBLE_EQ(t.quantile_mass(0.5), 0.25);
    EXPECT_DOUBLE_EQ(t.quantile_mass(2.0), 1.0);
    EXPECT_DOUBLE_EQ(t.cumulative(0.75), 1.5);
}

TEST(InverseCdfTable, LinearDensityIsInvertedExactly)
{
    // f(x) = x on [0, 1]: F(x) = x^2 / 2, quantile sqrt(2 m)
    InverseCdfTable t(0.0, 0.25, {0.0, 0.25, 0.5, 0.75, 1.0});
    for (double m : {0.01, 0.1, 0.2, 0.3, 0.45, 0.5}) {
        EXPECT_NEAR(t.quantile_mass(m), std::sqrt(2 * m), 1e-14);
    }
}

TEST(InverseCdfTable, QuantileInvertsCumulative)
{
    std::vector<double> v;
    for (int k = 0; k <= 100; ++k) {
        v.push_back(std::exp(-0.05 * k) * (1 + 0.5 * std::sin(0.3 * k)));
    }
    InverseCdfTable t(-1.0, 0.1, v);
    for (double x = -1.0; x <= t.upper(); x += 0.037) {
        EXPECT_NEAR(t.quantile_mass(t.cumulative(x)), x, 1e-10);
    }
}

TEST(InverseCdfTable, SamplesMatchShape)
{
    // triangular density on [0, 2] peaked at 1
    InverseCdfTable t(0.0, 1.0, {0.0, 1.0, 0.0});
    Stream s(4);
    const int n = 200000;
    std::vector<double> x(n);
    for (auto& v : x) {
        v = t.sample(s);
    }
    std::sort(x.begin(), x.end());
    double d = 0;
    for (int i = 0; i < n; ++i) {
        const double u = x[i];
        const double F = u < 1 ? u * u / 2 : 1 - (2 - u) * (2 - u) / 2;
        d              = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
    }
    EXPECT_LT(d, 1.95 / std::sqrt(n));
}

TEST(InverseCdfTable, SamplesAvoidZeroMassStart)
{
    InverseCdfTable t(0.0, 1.0, {0.0, 1.0});
    Stream s(8);
    for (int i = 0; i < 100000; ++i) {
        ASSERT_GT(t.sample(s), 0.0);
    }
}
