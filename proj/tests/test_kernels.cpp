#include "epigen/error.hpp"
#include "epigen/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

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

double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000)
{
    const double h = (b - a) / n;
    double s       = f(a) + f(b);
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4 : 2) * f(a + h * i);
    }
    return s * h / 3;
}

} // namespace

TEST(IntensityKernel, ExponentialClosedForms)
{
    const auto tau = IntensityKernel::exponential(1.5, 1.0);
    EXPECT_DOUBLE_EQ(tau(0.0), 1.5);
    EXPECT_NEAR(tau(2.0), 1.5 * std::exp(-2.0), 1e-15);
    EXPECT_NEAR(tau.r0(), 1.5, 1e-12);
    EXPECT_NEAR(tau.laplace(0.5), 1.5 / 1.5, 1e-12);
    EXPECT_NEAR(tau.cumulative(1.0), 1.5 * (1 - std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(tau.tail_mass(1.0), 1.5 * std::exp(-1.0), 1e-12);
    EXPECT_NEAR(tau.mean_generation_time(), 1.0, 1e-9);
    EXPECT_EQ(tau.laplace(-2.0), std::numeric_limits<double>::infinity());
}

TEST(IntensityKernel, SeirMatchesQuadrature)
{
    const auto tau = IntensityKernel::seir(0.9, 0.5, 0.3);
    auto f         = [](double a) { return 0.9 * 0.5 / 0.2 * (std::exp(-0.3 * a) - std::exp(-0.5 * a)); };
    for (double a : {0.0, 0.5, 3.0, 10.0}) {
        EXPECT_NEAR(tau(a), f(a), 1e-14);
    }
    EXPECT_NEAR(tau.r0(), 3.0, 1e-10);
    EXPECT_NEAR(tau.r0(), simpson(f, 0, 200), 1e-8);
}

TEST(IntensityKernel, SeirEqualRatesLimit)
{
    const auto tau = IntensityKernel::seir(2.0, 1.0, 1.0);
    EXPECT_NEAR(tau(1.5), 2.0 * 1.5 * std::exp(-1.5), 1e-14);
    EXPECT_NEAR(tau.r0(), 2.0, 1e-12);
}

TEST(IntensityKernel, TabulatedIntegratesLikeTrapezoid)
{
    std::vector<double> v;
    for (int k = 0; k <= 4000; ++k) {
        v.push_back(1.5 * std::exp(-0.01 * k));
    }
    const auto tau = IntensityKernel::tabulated(0.01, v);
    EXPECT_NEAR(tau.r0(), 1.5, 1e-4);
    EXPECT_NEAR(tau(0.005), 0.5 * (v[0] + v[1]), 1e-14);
    EXPECT_EQ(tau(41.0), 0.0);
    const auto with_tail = IntensityKernel::tabulated(0.01, v, 1.0);
    EXPECT_GT(with_tail(41.0), 0.0);
    EXPECT_NEAR(with_tail.r0(), 1.5, 1e-4);
}

TEST(IntensityKernel, Errors)
{
    EXPECT_EQ(error_of([] { IntensityKernel::tabulated(0.1, {1.0, -0.5, 0.0}); }), "tau must be nonnegative");
    EXPECT_THROW(IntensityKernel::exponential(-1.0, 1.0), Error);
    EXPECT_EQ(error_of([] { IntensityKernel::exp_sum({{1.0, 0.0, 0}}); }), "R0 infinite");
}

TEST(Malthusian, ExponentialFamily)
{
    EXPECT_NEAR(malthusian_parameter(IntensityKernel::exponential(1.5, 1.0)).alpha, 0.5, 1e-9);
    EXPECT_NEAR(malthusian_parameter(IntensityKernel::exponential(0.5, 1.0)).alpha, -0.5, 1e-9);
    EXPECT_NEAR(malthusian_parameter(IntensityKernel::exponential(1.0, 1.0)).alpha, 0.0, 1e-9);
}

TEST(Malthusian, SeirQuadraticRoot)
{
    // (lambda + alpha)(gamma + alpha) = beta lambda
    const double b = 0.9, l = 0.5, g = 0.3;
    const double alpha = 0.5 * (-(l + g) + std::sqrt((l - g) * (l - g) + 4 * b * l));
    EXPECT_NEAR(malthusian_parameter(IntensityKernel::seir(b, l, g)).alpha, alpha, 1e-9);
}

TEST(Malthusian, NoRootInBracket)
{
    EXPECT_EQ(error_of([] { malthusian_parameter(IntensityKernel::zero()); }), "no Malthusian parameter in bracket");
}

TEST(BarTau, ClosedFormAgainstQuadrature)
{
    const auto tau = IntensityKernel::exponential(1.5, 1.0);
    const auto g   = AgeDensity::exponential(0.5);
    const auto tb  = bar_tau(tau, g);
    for (double u : {0.0, 0.7, 3.0}) {
        const double q = simpson([&](double a) { return 0.5 * std::exp(-0.5 * a) * 1.5 * std::exp(-(a + u)); }, 0, 80);
        EXPECT_NEAR(tb(u), q, 1e-10);
    }
    EXPECT_NEAR(tb.r0(), 0.5, 1e-10);
}

TEST(BarTau, TabulatedPathAgreesWithClosedForm)
{
    std::vector<double> v;
    for (int k = 0; k <= 4000; ++k) {
        v.push_back(1.5 * std::exp(-0.01 * k));
    }
    const auto tb = bar_tau(IntensityKernel::tabulated(0.01, v), AgeDensity::exponential(0.5));
    EXPECT_NEAR(tb(1.0), 0.5 * std::exp(-1.0), 2e-4);
    EXPECT_NEAR(tb.r0(), 0.5, 2e-4);
}

TEST(BackwardDensity, IsAProbabilityDensity)
{
    const auto tau = IntensityKernel::seir(0.9, 0.5, 0.3);
    const double a = malthusian_parameter(tau).alpha;
    const auto r   = backward_density(tau, a);
    EXPECT_NEAR(r.r0(), 1.0, 1e-8);
    EXPECT_NEAR(r(2.0), std::exp(-a * 2.0) * tau(2.0), 1e-12);
    EXPECT_THROW(backward_density(tau, a + 0.1), Error);
}

TEST(ContactRate, PiecewiseConstantIsRightContinuous)
{
    const auto c = ContactRate::piecewise_constant({4, 8}, {1.0, 0.3, 0.8});
    EXPECT_EQ(c(0.0), 1.0);
    EXPECT_EQ(c(3.999), 1.0);
    EXPECT_EQ(c(4.0), 0.3);
    EXPECT_EQ(c(8.0), 0.8);
    EXPECT_EQ(c(1e6), 0.8);
    EXPECT_EQ(c.terminal(), 0.8);
    EXPECT_EQ(c.last_breakpoint(), 8.0);
    EXPECT_EQ(c.max_on(4.5, 7.0), 0.3);
    EXPECT_EQ(c.max_on(3.0, 5.0), 1.0);
    EXPECT_EQ(c.max_on(5.0, 9.0), 0.8);
    EXPECT_FALSE(c.is_constant());
    EXPECT_TRUE(ContactRate::constant(0.4).is_constant());
}

TEST(ContactRate, PiecewiseLinear)
{
    const auto c = ContactRate::piecewise_linear({0, 2, 4}, {1.0, 0.0, 0.5});
    EXPECT_NEAR(c(1.0), 0.5, 1e-15);
    EXPECT_NEAR(c(3.0), 0.25, 1e-15);
    EXPECT_EQ(c(10.0), 0.5);
    EXPECT_NEAR(c.max_on(1.0, 3.0), 0.5, 1e-15);
}

TEST(ContactRate, RejectsValuesOutsideUnitInterval)
{
    EXPECT_EQ(error_of([] { ContactRate::constant(1.2); }), "contact rate outside [0,1]");
    EXPECT_EQ(error_of([] { ContactRate::piecewise_constant({1}, {0.5, -0.1}); }), "contact rate outside [0,1]");
    EXPECT_THROW(ContactRate::piecewise_constant({1, 2}, {0.5, 0.5}), Error);
}

TEST(AgeDensity, ExponentialAndTabulated)
{
    const auto g = AgeDensity::exponential(0.5);
    EXPECT_NEAR(g(2.0), 0.5 * std::exp(-1.0), 1e-15);
    EXPECT_NEAR(g.mean(), 2.0, 1e-6);
    const auto h = AgeDensity::tabulated(1.0, {1.0, 1.0, 1.0});
    EXPECT_NEAR(h(0.5), 0.5, 1e-15);
    EXPECT_NEAR(h.mean(), 1.0, 1e-12);
    Stream s(3);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        sum += g.sample(s);
    }
    EXPECT_NEAR(sum / 1e5, 2.0, 5 * 2.0 / std::sqrt(1e5));
}

TEST(InitialCondition, RequiresOpenUnitInterval)
{
    const auto tau = IntensityKernel::exponential(1.5, 1.0);
    for (double i0 : {0.0, 1.0, -0.1}) {
        EXPECT_EQ(error_of([&] { InitialCondition(i0, AgeDensity::exponential(0.5), tau); }),
                  "I0 in (0,1) required");
    }
}

TEST(InitialCondition, JointLawMoments)
{
    // z ~ Exp(rho + gamma) and, given z, w ~ Exp(gamma)
    const auto tau = IntensityKernel::exponential(1.5, 1.0);
    InitialCondition ic(0.01, AgeDensity::exponential(0.5), tau);
    Stream s(17);
    const int n = 200000;
    double sz = 0, sw = 0;
    for (int i = 0; i < n; ++i) {
        const auto [w, z] = sample_joint_g(ic, s);
        sz += z;
        sw += w;
    }
    EXPECT_NEAR(sz / n, 1.0 / 1.5, 5 * (1.0 / 1.5) / std::sqrt(n));
    EXPECT_NEAR(sw / n, 1.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(ic.joint_density(0.5, 1.0), 0.5 * std::exp(-0.5) * 1.5 * std::exp(-1.5) / 0.5, 1e-10);
}
