#include "epigen/courses.hpp"
#include "epigen/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace epigen;

namespace
{

template <class Fn>
std::string error_of(Fn&& fn)
{
    try {
        fn();
    }
    catch (const Error& e) {
        return e.what();
    }
    return "";
}

/// P(X(a) = k) for a chain on stages with the given transitions, by RK4 on the forward equation.
std::vector<double> forward_equation(std::size_t n, const std::vector<Transition>& tr, double age)
{
    std::vector<double> p(n, 0.0);
    p[0]          = 1.0;
    const int m   = 20000;
    const double h = age / m;
    auto deriv    = [&](const std::vector<double>& x) {
        std::vector<double> d(n, 0.0);
        for (const auto& t : tr) {
            d[t.from] -= t.rate * x[t.from];
            d[t.to] += t.rate * x[t.from];
        }
        return d;
    };
    for (int i = 0; i < m; ++i) {
        auto k1 = deriv(p);
        std::vector<double> y(n);
        for (std::size_t j = 0; j < n; ++j) y[j] = p[j] + h / 2 * k1[j];
        auto k2 = deriv(y);
        for (std::size_t j = 0; j < n; ++j) y[j] = p[j] + h / 2 * k2[j];
        auto k3 = deriv(y);
        for (std::size_t j = 0; j < n; ++j) y[j] = p[j] + h * k3[j];
        auto k4 = deriv(y);
        for (std::size_t j = 0; j < n; ++j) p[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
    }
    return p;
}

} // namespace

TEST(CompartmentSet, RejectsCyclesAndUnknownNames)
{
    EXPECT_EQ(error_of([] { CompartmentSet({"A", "B"}, {{0, 1}, {1, 0}}); }), "compartment graph has a cycle");
    const CompartmentSet s({"S", "I", "R"}, {{0, 1}, {1, 2}});
    EXPECT_EQ(s.index("R"), 2u);
    EXPECT_EQ(error_of([&] { (void)s.index("Q"); }), "unknown compartment: Q");
    EXPECT_TRUE(s.is_absorbing(2));
    EXPECT_FALSE(s.is_absorbing(1));
    EXPECT_TRUE(s.has_edge(1, 2));
}

TEST(MarkovSir, MarginalsAndKernel)
{
    const auto m = CourseModel::markov_sir(1.5, 1.0);
    const auto I = m.compartments().index("I");
    const auto R = m.compartments().index("R");
    for (double a : {0.0, 0.3, 2.0}) {
        EXPECT_NEAR(m.marginal_p(a, I), std::exp(-a), 1e-10);
        EXPECT_NEAR(m.marginal_p(a, R), 1 - std::exp(-a), 1e-10);
        EXPECT_NEAR(m.tau()(a), 1.5 * std::exp(-a), 1e-12);
    }
}

TEST(MarkovSeir, MarginalsClosedForm)
{
    const double b = 0.9, l = 0.5, g = 0.3;
    const auto m   = CourseModel::markov_seir(b, l, g);
    for (double a : {0.5, 2.0, 7.0}) {
        const auto p = m.marginal_all(a);
        EXPECT_NEAR(p[0], std::exp(-l * a), 1e-10);
        EXPECT_NEAR(p[1], l / (g - l) * (std::exp(-l * a) - std::exp(-g * a)), 1e-10);
        EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
    }
}

TEST(MarkovGeneral, KernelMatchesForwardEquation)
{
    // E -> I1 or I2 -> R with different infectivities
    const std::vector<Stage> st{{"E", 0.0}, {"I1", 2.0}, {"I2", 0.5}, {"R", 0.0}};
    const std::vector<Transition> tr{{0, 1, 0.6}, {0, 2, 0.4}, {1, 3, 1.5}, {2, 3, 0.5}};
    const auto m = CourseModel::markov(st, tr);
    for (double a : {0.5, 1.0, 4.0}) {
        const auto p = forward_equation(4, tr, a);
        EXPECT_NEAR(m.tau()(a), 2.0 * p[1] + 0.5 * p[2], 1e-5);
        EXPECT_NEAR(m.marginal_p(a, 2), p[2], 1e-8);
    }
}

TEST(Markov, AbsorbingInfectiousStageHasInfiniteR0)
{
    EXPECT_EQ(error_of([] { CourseModel::markov({{"I", 1.0}}, {}); }), "R0 infinite");
}

TEST(CourseModel, SampledCoursesSatisfyInvariants)
{
    const auto m = CourseModel::markov_seir(0.9, 0.5, 0.3);
    const auto I = m.compartments().index("I");
    for (std::uint64_t i = 0; i < 2000; ++i) {
        Stream s(5, StreamTag::test, i);
        const auto c = m.sample(s, 30.0);
        ASSERT_TRUE(c.satisfies_invariants(m.compartments()));
        for (double a : c.atoms) {
            ASSERT_LE(a, 30.0);
            ASSERT_EQ(c.compartment_at(a), I);
        }
    }
}

TEST(CourseModel, EmpiricalTauMatchesKernel)
{
    const auto m   = CourseModel::markov_seir(0.9, 0.5, 0.3);
    const auto est = empirical_tau(m, 40000, AgeGrid{0.5, 10.0}, Stream(21));
    int outside    = 0;
    for (std::size_t k = 0; k < est.estimate.size(); ++k) {
        // bin average of tau by Simpson
        const double lo = est.step * static_cast<double>(k), hi = lo + est.step;
        const double avg = (m.tau()(lo) + 4 * m.tau()(0.5 * (lo + hi)) + m.tau()(hi)) / 6;
        if (std::abs(est.estimate[k] - avg) > 4 * est.standard_error[k]) {
            ++outside;
        }
    }
    EXPECT_LE(outside, 1);
}

TEST(CourseModel, PoissonModelAtomCounts)
{
    const auto m = CourseModel::poisson(IntensityKernel::exponential(1.5, 1.0));
    double sum   = 0;
    const int n  = 50000;
    for (int i = 0; i < n; ++i) {
        Stream s(8, StreamTag::test, static_cast<std::uint64_t>(i));
        sum += static_cast<double>(m.sample(s).atoms.size());
    }
    EXPECT_NEAR(sum / n, 1.5, 5 * std::sqrt(1.5 / n));
}

TEST(Palm, MarkovSirRemainingInfectiousPeriod)
{
    // Palm at age a: infectious at a and, by memorylessness, the exit age is a + Exp(gamma)
    const auto m = CourseModel::markov_sir(1.5, 1.0);
    const auto I = m.compartments().index("I");
    const double a = 1.3;
    const int n    = 40000;
    double sum     = 0;
    for (int i = 0; i < n; ++i) {
        Stream s(12, StreamTag::palm, static_cast<std::uint64_t>(i));
        const auto c = m.sample_palm(a, s, 40.0);
        ASSERT_EQ(c.compartment_at(a), I);
        ASSERT_TRUE(std::binary_search(c.atoms.begin(), c.atoms.end(), a));
        sum += c.exit_age(I);
    }
    EXPECT_NEAR(sum / n, a + 1.0, 5.0 / std::sqrt(n));
}

TEST(Palm, ExactAgreesWithWindowedRejection)
{
    // SEIR: compare the mean time spent in E under both samplers
    const auto m    = CourseModel::markov_seir(0.9, 0.5, 0.3);
    const auto E    = m.compartments().index("E");
    const double a  = 4.0;
    const int n     = 20000;
    double se = 0, se2 = 0, sw = 0, sw2 = 0;
    for (int i = 0; i < n; ++i) {
        Stream s1(31, StreamTag::palm, static_cast<std::uint64_t>(i));
        Stream s2(32, StreamTag::palm, static_cast<std::uint64_t>(i));
        const double x = m.sample_palm(a, s1, 40.0).exit_age(E);
        const double y = m.sample_palm_windowed(a, 0.05, s2, 40.0).exit_age(E);
        se += x;
        se2 += x * x;
        sw += y;
        sw2 += y * y;
    }
    const double me = se / n, mw = sw / n;
    const double sd = std::sqrt((se2 / n - me * me + sw2 / n - mw * mw) / n);
    EXPECT_NEAR(me, mw, 4 * sd);
}

TEST(Palm, UndefinedWhereTauVanishes)
{
    const auto m = CourseModel::markov_seir(0.9, 0.5, 0.3);
    Stream s(1);
    EXPECT_EQ(error_of([&] { m.sample_palm(0.0, s, 40.0); }), "Palm undefined at a");
}

TEST(CustomModel, MarginalUnavailable)
{
    const auto tau = IntensityKernel::exponential(1.0, 1.0);
    const auto m   = CourseModel::custom(tau, CompartmentSet({"I"}, {}), [](Stream&, double) {
        DiseaseCourse c;
        c.path.push_back({0.0, 0});
        return c;
    });
    EXPECT_EQ(error_of([&] { (void)m.marginal_p(1.0, 0); }), "marginal unavailable; use empirical");
}
