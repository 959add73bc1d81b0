#include "oracles.hpp"

#include "epigen/error.hpp"
#include "epigen/forward_sim.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace epigen::app
{

OdeTrajectory sir_ode(double beta, double gamma, double i0, double g_rate, const std::function<double(double)>& c,
                      double horizon, double h, double report_step)
{
    const auto per   = static_cast<long>(std::llround(report_step / h));
    const auto steps = static_cast<long>(std::llround(horizon / h));
    if (per <= 0 || std::abs(static_cast<double>(per) * h - report_step) > 1e-9 * report_step) {
        throw Error("report step must be a multiple of the ODE step");
    }
    double S = 1.0 - i0;
    double I = i0 * g_rate / (g_rate + gamma);
    OdeTrajectory out;
    out.report_step = report_step;
    auto f          = [&](double t, double s, double i, double& ds, double& di) {
        const double force = beta * c(t) * s * i;
        ds                 = -force;
        di                 = force - gamma * i;
    };
    for (long k = 0; k <= steps; ++k) {
        if (k % per == 0) {
            out.S.push_back(S);
            out.I.push_back(I);
        }
        if (k == steps) {
            break;
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

double final_size_bisection(double s0, double a, double kappa)
{
    auto G    = [&](double x) { return s0 * (1.0 - std::exp(-(a + kappa * x))) - x; };
    double lo = 0.0, hi = s0;
    if (G(hi) > 0.0) {
        return hi;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (G(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double sir_final_size_from(double s, double i, double r0c)
{
    // S_inf = s exp(-r0c (s + i - S_inf)); write S_inf = s - x and solve for the further infections x
    auto G    = [&](double x) { return s * (1.0 - std::exp(-r0c * (i + x))) - x; };
    double lo = 0.0, hi = s;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (G(mid) > 0.0 ? lo : hi) = mid;
    }
    return 1.0 - (s - 0.5 * (lo + hi));
}

std::vector<double> brute_force_infection_times(const CourseModel& model, std::size_t population,
                                                const ContactRate& c, const InitialCondition& ic, double horizon,
                                                std::uint64_t seed)
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<IndividualRecord> ind(population);
    std::vector<std::vector<ContactDraw>> draws(population);
    std::vector<double> sigma(population, inf);
    std::vector<bool> resolved(population, false);
    for (std::size_t x = 0; x < population; ++x) {
        ind[x]   = draw_individual(model, ic, horizon, seed, x);
        draws[x] = contact_draws(seed, x, ind[x].course.atoms.size(), population);
        if (ind[x].initially_infected()) {
            sigma[x]    = ind[x].infection_time;
            resolved[x] = true;
        }
    }
    // sigma_x = min over resolved y and atoms j of y aimed at x with an accepted contact time in (0, T]
    for (;;) {
        double best        = inf;
        std::size_t target = population;
        for (std::size_t y = 0; y < population; ++y) {
            if (!resolved[y] || sigma[y] == inf) {
                continue;
            }
            const auto& atoms = ind[y].course.atoms;
            for (std::size_t j = 0; j < atoms.size(); ++j) {
                const std::size_t x = draws[y][j].target;
                if (x == y || resolved[x]) {
                    continue;
                }
                const double t = sigma[y] + atoms[j];
                if (t > 0.0 && t <= horizon && draws[y][j].s <= c(t) && t < best) {
                    best   = t;
                    target = x;
                }
            }
        }
        if (target == population) {
            break;
        }
        sigma[target]    = best;
        resolved[target] = true;
    }
    return sigma;
}

std::function<double(double)> window_increment_density(const LimitSolution& sol, double lo, double hi,
                                                       std::size_t panels)
{
    if (!(hi > lo) || panels == 0) {
        throw Error("window needs hi > lo");
    }
    const double h = (hi - lo) / static_cast<double>(panels);
    double norm    = 0.0;
    for (std::size_t k = 0; k <= panels; ++k) {
        const double w = (k == 0 || k == panels) ? 0.5 : 1.0;
        norm += w * sol.b_at(lo + h * static_cast<double>(k));
    }
    norm *= h;
    auto sp = std::make_shared<const LimitSolution>(sol);
    return [sp, lo, h, panels, norm](double u) {
        if (u < 0.0) {
            return 0.0;
        }
        double s = 0.0;
        for (std::size_t k = 0; k <= panels; ++k) {
            const double t = lo + h * static_cast<double>(k);
            const double w = (k == 0 || k == panels) ? 0.5 : 1.0;
            s += w * sp->S_at(t) * sp->contact()(t) * sp->b_at(t - u);
        }
        return s * h * sp->tau()(u) / norm;
    };
}

} // namespace epigen::app
