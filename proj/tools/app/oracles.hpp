#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"
#include "epigen/limit_solver.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace epigen::app
{

/// Classical SIR ODE S' = -beta c S I, I' = beta c S I - gamma I by RK4 with step h. The initial
/// infecteds have ages ~ Exp(g_rate), so I(0) = I0 g_rate / (g_rate + gamma). Returns S and I at
/// multiples of report_step up to the horizon.
struct OdeTrajectory {
    double report_step = 0.0;
    std::vector<double> S;
    std::vector<double> I;
};

OdeTrajectory sir_ode(double beta, double gamma, double i0, double g_rate, const std::function<double(double)>& c,
                      double horizon, double h, double report_step);

/// Largest root of B = s0 (1 - exp(-(a + kappa B))) on [0, s0] by bisection.
double final_size_bisection(double s0, double a, double kappa);

/// Final fraction ever infected of the SIR ODE started from (S, I) at t0 with constant contact c after t0.
double sir_final_size_from(double s, double i, double r0c);

/// Infection times of every individual computed by repeatedly resolving the earliest admissible
/// contact from already infected individuals, using the same per-individual courses and contact
/// draws as the simulator. never_infected for individuals that are not reached before the horizon.
std::vector<double> brute_force_infection_times(const CourseModel& model, std::size_t population,
                                                const ContactRate& c, const InitialCondition& ic, double horizon,
                                                std::uint64_t seed);

/// Density of R_0 - R_1 for a spine whose endpoint R_0 has density proportional to b on [lo, hi]:
/// f(u) = int_lo^hi S(t) c(t) b(t - u) tau(u) dt / int_lo^hi b(t) dt, by the trapezoid rule in t.
std::function<double(double)> window_increment_density(const LimitSolution& sol, double lo, double hi,
                                                       std::size_t panels = 400);

} // namespace epigen::app
