#include "epigen/courses.hpp"
#include "epigen/error.hpp"
#include "epigen/limit_solver.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace epigen;

namespace
{

/// SIR ODE S' = -beta c S I, I' = beta c S I - gamma I by RK4; returns S at multiples of `every` steps.
std::vector<double> ode_s(double beta, double gamma, double s0, double i_init, double horizon, double h, int every,
                          const ContactRate& c)
{
    double S = s0, I = i_init;
    std::vector<double> out;
    const auto n = static_cast<long>(std::llround(horizon / h));
    auto f       = [&](double t, double s, double i, double& ds, double& di) {
        ds = -beta * c(t) * s * i;
        di = -ds - gamma * i;
    };
    for (long k = 0; k <= n; ++k) {
        if (k % every == 0) {
            out.push_back(S);
        }
        const double t = h * static_cast<double>(k);
        double a1, b1, a2, b2, a3, b3, a4, b4;
        f(t, S, I, a1, b1);
        f(t + h / 2, S + h / 2 * a1, I + h / 2 * b1, a2, b2);
        f(t + h / 2, S + h / 2 * a2, I + h / 2 * b2, a3, b3);
        f(t + h, S + h * a3, I + h * b3, a4, b4);
        S += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4);
        I += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4);
    }
    return out;
}

struct Reference {
    IntensityKernel tau = IntensityKernel::exponential(1.5, 1.0);
    InitialCondition ic{0.01, AgeDensity::exponential(0.5), tau};
};

} // namespace

TEST(SolveDelay, MatchesSirOde)
{
    Reference r;
    const auto sol = solve_delay(r.tau, ContactRate::constant(1.0), r.ic, 10.0, 5e-3);
    const auto S   = ode_s(1.5, 1.0, 0.99, 0.01 / 3, 10.0, 5e-4, 10, ContactRate::constant(1.0));
    double err     = 0;
    for (std::size_t k = 0; k < sol.size(); ++k) {
        err = std::max(err, std::abs(sol.S[k] - S[k]));
    }
    EXPECT_LT(err, 1e-5);
}

TEST(SolveDelay, MatchesSirOdeWithPiecewiseContact)
{
    Reference r;
    const auto c   = ContactRate::piecewise_constant({4, 8}, {1.0, 0.3, 0.8});
    const auto sol = solve_delay(r.tau, c, r.ic, 16.0, 1e-2);
    // the ODE step hits every breakpoint exactly
    const auto S   = ode_s(1.5, 1.0, 0.99, 0.01 / 3, 16.0, 1e-3, 10, c);
    double err     = 0;
    for (std::size_t k = 0; k < sol.size(); ++k) {
        err = std::max(err, std::abs(sol.S[k] - S[k]));
    }
    EXPECT_LT(err, 1e-4);
}

TEST(SolveDelay, SecondOrderConvergence)
{
    Reference r;
    const auto c  = ContactRate::constant(1.0);
    const auto S  = ode_s(1.5, 1.0, 0.99, 0.01 / 3, 10.0, 1e-4, 1000, c);
    auto err_at   = [&](double h) {
        const auto sol = solve_delay(r.tau, c, r.ic, 10.0, h);
        const auto per = static_cast<std::size_t>(std::llround(0.1 / h));
        double e       = 0;
        for (std::size_t m = 0; m < S.size(); ++m) {
            e = std::max(e, std::abs(sol.S[m * per] - S[m]));
        }
        return e;
    };
    const double e1 = err_at(2e-2), e2 = err_at(1e-2);
    EXPECT_GT(e1 / e2, 3.0);
}

TEST(SolveDelay, ResidualsAndIdentities)
{
    Reference r;
    const auto sol = solve_delay(r.tau, ContactRate::constant(1.0), r.ic, 25.0, 1e-2);
    EXPECT_LT(sol.delay_residual(), 1e-12);
    EXPECT_LT(sol.renewal_residual(), 1e-10);
    for (std::size_t k = 0; k < sol.size(); k += 100) {
        EXPECT_NEAR(sol.S[k] + sol.B[k], 0.99, 1e-12);
        EXPECT_GE(sol.b[k], 0.0);
        if (k > 0) {
            EXPECT_GE(sol.B[k], sol.B[k - 100]);
        }
    }
    EXPECT_NEAR(sol.b_at(-2.0), 0.01 * 0.5 * std::exp(-1.0), 1e-15);
    EXPECT_THROW(sol.b_at(26.0), Error);
}

TEST(SolveDelay, NoTransmissionGivesNoIncidence)
{
    Reference r;
    const auto zero = IntensityKernel::zero(r.tau.grid());
    const auto ic0  = InitialCondition(0.01, AgeDensity::exponential(0.5), zero);
    const auto a    = solve_delay(zero, ContactRate::constant(1.0), ic0, 5.0, 1e-2);
    const auto b    = solve_delay(r.tau, ContactRate::constant(0.0), r.ic, 5.0, 1e-2);
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a.B[k], 0.0);
        EXPECT_EQ(b.B[k], 0.0);
    }
}

TEST(Picard, AgreesWithMarchingAndContracts)
{
    Reference r;
    const auto c     = ContactRate::constant(1.0);
    const auto march = solve_delay(r.tau, c, r.ic, 10.0, 1e-2);
    const auto pic   = solve_delay_picard(r.tau, c, r.ic, 10.0, 1e-2);
    ASSERT_TRUE(pic.converged);
    double d = 0;
    for (std::size_t k = 0; k < march.size(); ++k) {
        d = std::max(d, std::abs(march.B[k] - pic.B[k]));
    }
    EXPECT_LT(d, 5e-5);
    // weighted increments shrink geometrically after the first few sweeps
    const auto& w = pic.weighted_increments;
    ASSERT_GT(w.size(), 6u);
    for (std::size_t i = 3; i + 1 < w.size() && w[i] > 1e-12; ++i) {
        EXPECT_LT(w[i + 1], w[i]);
    }
}

TEST(FinalSize, LimitOfLongHorizon)
{
    Reference r;
    const double fs = final_size(r.ic.r0_bar(), r.tau.r0(), 0.01, 1.0);
    // independent bisection of B = S0 (1 - exp(-(I0 R0_bar + R0 B)))
    double lo = 0, hi = 0.99;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.99 * (1 - std::exp(-(0.01 * 0.5 + 1.5 * mid))) - mid > 0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(fs, lo + 0.01, 1e-10);
    const auto sol = solve_delay(r.tau, ContactRate::constant(1.0), r.ic, 60.0, 1e-2);
    EXPECT_NEAR(sol.B.back() + 0.01, fs, 1e-4);
}

TEST(FinalSize, SubcriticalAndErrors)
{
    const double fs = final_size(0.2, 0.5, 0.01, 1.0);
    EXPECT_GT(fs, 0.01);
    EXPECT_LT(fs, 0.02);
    EXPECT_THROW(final_size(0.5, 1.5, 0.0, 1.0), Error);
    EXPECT_THROW(final_size(0.5, 1.5, 0.01, 1.5), Error);
}

TEST(FinalSize, AfterLastBreakpoint)
{
    Reference r;
    const auto c    = ContactRate::piecewise_constant({4, 8}, {1.0, 0.3, 0.8});
    const auto sol  = solve_delay(r.tau, c, r.ic, 150.0, 1e-2);
    const auto sol2 = solve_delay(r.tau, c, r.ic, 20.0, 1e-2);
    EXPECT_NEAR(final_size_after(sol), sol.B.back() + 0.01, 1e-4);
    EXPECT_NEAR(final_size_after(sol2), final_size_after(sol), 1e-9);
    EXPECT_NEAR(final_size_after(sol2, 12.0), final_size_after(sol), 1e-4);
    EXPECT_THROW(final_size_after(sol2, 5.0), Error);
}

TEST(CompartmentCurves, SumToEverInfected)
{
    Reference r;
    const auto model = CourseModel::markov_sir(1.5, 1.0);
    const auto sol   = solve_delay(model.tau(), ContactRate::constant(1.0), r.ic, 20.0, 1e-2);
    const std::vector<double> t{0.0, 3.0, 7.5, 20.0};
    const auto cur   = compartment_curves(sol, model, t);
    for (std::size_t m = 0; m < t.size(); ++m) {
        EXPECT_NEAR(cur[0][m] + cur[1][m], 1 - sol.S_at(t[m]), 1e-6);
    }
    // at t = 0 the I fraction is I0 P(infectious at age Z) = I0 rho / (rho + gamma)
    EXPECT_NEAR(cur[0][0], 0.01 / 3, 1e-6);
}

TEST(Linearized, EquilibriumInitialAgesGiveExactExponential)
{
    const auto tau = IntensityKernel::exponential(1.5, 1.0);
    const InitialCondition ic(1e-3, AgeDensity::exponential(0.5), tau);
    const auto lin = solve_linearized(tau, ContactRate::constant(1.0), ic, 5.0, 1e-3);
    for (double t : {0.0, 1.0, 4.0}) {
        EXPECT_NEAR(lin.at(t) / (1e-3 * 0.5 * std::exp(0.5 * t)), 1.0, 1e-5);
    }
}
