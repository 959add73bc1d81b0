#include "epigen/limit_solver.hpp"

#include "epigen/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace epigen
{

namespace
{

std::size_t interval_count(double horizon, double step)
{
    if (!(step > 0.0) || !(horizon > 0.0)) {
        throw Error("solver needs positive horizon and step");
    }
    const double n = horizon / step;
    if (n > 5e7) {
        throw Error("solver grid too large");
    }
    return static_cast<std::size_t>(std::llround(std::ceil(n - 1e-9)));
}

struct GridInputs {
    std::vector<double> tau_rev; // tau at t_{n-1-i}
    std::vector<double> tau_bar;
    std::vector<double> c;
    /// left limits of c, used for the right endpoint of each quadrature interval
    std::vector<double> c_minus;
    double tau0 = 0.0;
};

GridInputs tabulate_inputs(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double step,
                           std::size_t n)
{
    GridInputs in;
    in.tau_rev.resize(n);
    in.tau_bar.resize(n);
    in.c.resize(n);
    in.c_minus.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t       = step * static_cast<double>(k);
        in.tau_rev[n - 1 - k] = tau(t);
        in.tau_bar[k]        = ic.tau_bar()(t);
        in.c[k]              = c(t);
        in.c_minus[k]        = c.left_limit(t);
    }
    in.tau0 = in.tau_rev[n - 1];
    return in;
}

// Delta * (b_0 tau_k / 2 + sum_{j=1}^{k-1} b_j tau_{k-j}) for k >= 1
double history(const std::vector<double>& b, const std::vector<double>& tau_rev, std::size_t k, double step)
{
    const std::size_t n = tau_rev.size();
    const double head   = 0.5 * b[0] * tau_rev[n - 1 - k];
    const double body   = std::inner_product(b.begin() + 1, b.begin() + static_cast<std::ptrdiff_t>(k),
                                             tau_rev.begin() + static_cast<std::ptrdiff_t>(n - k), 0.0);
    return step * (head + body);
}

} // namespace

// ---------------------------------------------------------------------------------------------
// LimitSolution

LimitSolution::LimitSolution(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double step,
                             std::size_t intervals)
    : b(intervals + 1, 0.0)
    , B(intervals + 1, 0.0)
    , S(intervals + 1, ic.s0())
    , J(intervals + 1, 0.0)
    , step_{step}
    , tau_{std::make_shared<IntensityKernel>(tau)}
    , c_{std::make_shared<ContactRate>(c)}
    , ic_{std::make_shared<InitialCondition>(ic)}
{
}

void LimitSolution::check_time(double t) const
{
    if (t > horizon() * (1.0 + 1e-12) + 1e-12) {
        throw Error("time " + std::to_string(t) + " outside solver horizon");
    }
}

namespace
{

double interpolate(const std::vector<double>& v, double step, double t)
{
    const double u = t / step;
    if (u <= 0.0) {
        return v.front();
    }
    const auto i = static_cast<std::size_t>(u);
    if (i + 1 >= v.size()) {
        return v.back();
    }
    const double r = u - static_cast<double>(i);
    return v[i] + r * (v[i + 1] - v[i]);
}

} // namespace

double LimitSolution::b_at(double t) const
{
    if (t < 0.0) {
        return ic_->i0() * ic_->g()(-t);
    }
    check_time(t);
    return interpolate(b, step_, t);
}

double LimitSolution::B_at(double t) const
{
    if (t <= 0.0) {
        return 0.0;
    }
    check_time(t);
    return interpolate(B, step_, t);
}

double LimitSolution::S_at(double t) const { return ic_->s0() - B_at(t); }

double LimitSolution::n_at(double t, double a) const
{
    if (t < 0.0 || a < 0.0) {
        throw Error("n(t, a) needs t, a >= 0");
    }
    check_time(t);
    return b_at(t - a);
}

double LimitSolution::renewal_residual() const
{
    const std::size_t n = b.size();
    double worst        = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = time(k);
        double conv    = ic_->i0() * ic_->tau_bar()(t);
        if (k > 0) {
            double s = 0.5 * (b[0] * (*tau_)(t) + b[k] * (*tau_)(0.0));
            for (std::size_t j = 1; j < k; ++j) {
                s += b[j] * (*tau_)(time(k - j));
            }
            conv += step_ * s;
        }
        worst = std::max(worst, std::abs(b[k] - (*c_)(t) * S[k] * conv));
    }
    return worst;
}

double LimitSolution::delay_residual() const
{
    double psi   = 0.0;
    double worst = 0.0;
    for (std::size_t k = 1; k < b.size(); ++k) {
        psi += 0.5 * step_ * ((*c_)(time(k - 1)) * J[k - 1] + (*c_)(time(k)) * J[k]);
        worst = std::max(worst, std::abs(B[k] + ic_->s0() * std::expm1(-psi)));
    }
    return worst;
}

double GridFunction::at(double t) const
{
    if (t < 0.0 || t > time(values.size() - 1) * (1.0 + 1e-12)) {
        throw Error("time outside grid");
    }
    return interpolate(values, step, t);
}

// ---------------------------------------------------------------------------------------------
// marching

LimitSolution solve_delay(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double horizon,
                          double step, SolverOptions options)
{
    const std::size_t intervals = interval_count(horizon, step);
    const std::size_t n         = intervals + 1;
    LimitSolution sol(tau, c, ic, step, intervals);
    const GridInputs in = tabulate_inputs(tau, c, ic, step, n);
    const double s0     = ic.s0();
    const double i0     = ic.i0();

    sol.J[0] = i0 * in.tau_bar[0];
    sol.b[0] = in.c[0] * s0 * sol.J[0];
    // exp(-int_{t_{k-1}}^{t_k} c J / 2) contributed by the left endpoint
    for (std::size_t k = 1; k < n; ++k) {
        const double left = sol.S[k - 1] * std::exp(-0.5 * step * in.c[k - 1] * sol.J[k - 1]);
        const double C    = history(sol.b, in.tau_rev, k, step) + i0 * in.tau_bar[k];
        const double K    = 0.5 * step * in.tau0 * in.c[k] * left;
        const double q    = 0.5 * step * in.c_minus[k];

        double x = C / std::max(1.0 - K, 0.5);
        bool ok  = false;
        for (int it = 0; it < options.newton_max; ++it) {
            const double e  = std::exp(-q * x);
            const double f  = x - C - K * x * e;
            const double df = 1.0 - K * e * (1.0 - q * x);
            const double dx = f / df;
            x -= dx;
            if (std::abs(dx) <= options.newton_tol * std::max(1.0, std::abs(x))) {
                ok = true;
                break;
            }
        }
        if (!ok || !std::isfinite(x)) {
            throw Error("solver: Newton iteration did not converge at step " + std::to_string(k));
        }
        sol.J[k] = x;
        sol.S[k] = left * std::exp(-q * x);
        sol.b[k] = in.c[k] * sol.S[k] * x;
        sol.B[k] = s0 - sol.S[k];
    }
    return sol;
}

GridFunction solve_linearized(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic,
                              double horizon, double step)
{
    const std::size_t n = interval_count(horizon, step) + 1;
    const GridInputs in = tabulate_inputs(tau, c, ic, step, n);
    GridFunction out{step, std::vector<double>(n, 0.0)};
    auto& b = out.values;
    b[0]    = in.c[0] * ic.i0() * in.tau_bar[0];
    for (std::size_t k = 1; k < n; ++k) {
        const double C     = history(b, in.tau_rev, k, step) + ic.i0() * in.tau_bar[k];
        const double denom = 1.0 - 0.5 * step * in.tau0 * in.c[k];
        if (!(denom > 0.0)) {
            throw Error("linearized solver: step too large at step " + std::to_string(k));
        }
        b[k] = in.c[k] * C / denom;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Picard verification mode

PicardResult solve_delay_picard(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic,
                                double horizon, double step, double tol, int max_iterations)
{
    const std::size_t n = interval_count(horizon, step) + 1;
    const GridInputs in = tabulate_inputs(tau, c, ic, step, n);
    const double s0     = ic.s0();

    // w_i = (tau_i + tau_{i+1}) / 2, stored reversed
    std::vector<double> w_rev(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        w_rev[n - 2 - i] = 0.5 * (in.tau_rev[n - 1 - i] + in.tau_rev[n - 2 - i]);
    }

    PicardResult out;
    double alpha = 0.0;
    try {
        alpha = malthusian_parameter(tau).alpha;
    }
    catch (const Error&) {
        alpha = 0.0;
    }
    out.gamma = std::max(alpha, 0.0) + 1.0;

    std::vector<double> B(n, 0.0), next(n, 0.0), dB(n, 0.0), inner(n, 0.0), inner_minus(n, 0.0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        for (std::size_t j = 1; j < n; ++j) {
            dB[j] = B[j] - B[j - 1];
        }
        for (std::size_t m = 0; m < n; ++m) {
            double s = ic.i0() * in.tau_bar[m];
            if (m > 0) {
                s += std::inner_product(dB.begin() + 1, dB.begin() + static_cast<std::ptrdiff_t>(m + 1),
                                        w_rev.begin() + static_cast<std::ptrdiff_t>(n - 1 - m), 0.0);
            }
            inner[m]       = in.c[m] * s;
            inner_minus[m] = in.c_minus[m] * s;
        }
        double psi     = 0.0;
        double sup     = 0.0;
        double weighted = 0.0;
        next[0]        = 0.0;
        for (std::size_t m = 1; m < n; ++m) {
            psi += 0.5 * step * (inner[m - 1] + inner_minus[m]);
            next[m]        = -s0 * std::expm1(-psi);
            const double d = std::abs(next[m] - B[m]);
            sup            = std::max(sup, d);
            weighted       = std::max(weighted, d * std::exp(-out.gamma * step * static_cast<double>(m)));
        }
        B.swap(next);
        out.iterations = iter + 1;
        out.sup_increments.push_back(sup);
        out.weighted_increments.push_back(weighted);
        if (sup <= tol) {
            out.converged = true;
            break;
        }
    }
    out.B = std::move(B);
    return out;
}

// ---------------------------------------------------------------------------------------------
// compartments

std::vector<std::vector<double>> compartment_curves(const LimitSolution& sol, const CourseModel& model,
                                                    const std::vector<double>& times)
{
    const double h        = sol.step();
    const std::size_t K   = sol.size() - 1;
    const auto& g         = sol.initial().g();
    const auto m_u        = static_cast<std::size_t>(std::ceil(g.support_max() / h));
    std::vector<std::size_t> idx;
    std::size_t k_max = 0;
    for (double t : times) {
        if (t < 0.0) {
            throw Error("compartment curve needs t >= 0");
        }
        const auto k = static_cast<std::size_t>(std::llround(t / h));
        if (k > K) {
            throw Error("time outside solver horizon");
        }
        idx.push_back(k);
        k_max = std::max(k_max, k);
    }
    const auto p = model.marginal_table(h, k_max + m_u + 1);

    std::vector<double> gw(m_u + 1);
    for (std::size_t u = 0; u <= m_u; ++u) {
        gw[u] = sol.initial().i0() * g(h * static_cast<double>(u)) * h * ((u == 0 || u == m_u) ? 0.5 : 1.0);
    }

    std::vector<std::vector<double>> out(p.size(), std::vector<double>(times.size(), 0.0));
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& pi = p[i];
        for (std::size_t m = 0; m < idx.size(); ++m) {
            const std::size_t k = idx[m];
            double v            = 0.0;
            if (k > 0) {
                v += 0.5 * h * (sol.b[k] * pi[0] + sol.b[0] * pi[k]);
                for (std::size_t j = 1; j < k; ++j) {
                    v += h * sol.b[k - j] * pi[j];
                }
            }
            for (std::size_t u = 0; u <= m_u; ++u) {
                v += gw[u] * pi[k + u];
            }
            out[i][m] = v;
        }
    }
    return out;
}

std::vector<double> compartment_curve(const LimitSolution& sol, const CourseModel& model, std::size_t compartment,
                                      const std::vector<double>& times)
{
    if (compartment >= model.compartments().size()) {
        throw Error("unknown compartment");
    }
    return compartment_curves(sol, model, times)[compartment];
}

// ---------------------------------------------------------------------------------------------
// final size

double solve_final_size_equation(double s0, double a, double kappa, double tol, int max_iterations)
{
    // G(B) = s0 (1 - exp(-(a + kappa B))) - B is concave with G(s0) <= 0, so Newton from s0
    // decreases monotonically to the largest root.
    double x = s0;
    for (int it = 0; it < max_iterations; ++it) {
        const double e  = std::exp(-(a + kappa * x));
        const double G  = -s0 * std::expm1(-(a + kappa * x)) - x;
        const double dG = s0 * kappa * e - 1.0;
        double dx;
        if (dG < -1e-12) {
            dx = G / dG;
        }
        else {
            // flat or increasing: fall back to a plain fixed-point step
            dx = -G;
        }
        double nx = std::clamp(x - dx, 0.0, s0);
        if (std::abs(nx - x) <= tol) {
            return nx;
        }
        x = nx;
    }
    throw Error("final size iteration did not converge");
}

double final_size(double r0_bar, double r0, double i0, double c, double tol)
{
    if (!(i0 > 0.0 && i0 < 1.0)) {
        throw Error("I0 in (0,1) required");
    }
    if (!(c >= 0.0 && c <= 1.0)) {
        throw Error("contact rate outside [0,1]");
    }
    return solve_final_size_equation(1.0 - i0, c * i0 * r0_bar, c * r0, tol) + i0;
}

double final_size_after(const LimitSolution& sol, double t0)
{
    const ContactRate& c = sol.contact();
    if (t0 < c.last_breakpoint()) {
        throw Error("final size needs a constant contact rate after t0");
    }
    const double h      = sol.step();
    const auto k0       = static_cast<std::size_t>(std::ceil(t0 / h - 1e-9));
    if (k0 >= sol.size()) {
        throw Error("final size: t0 beyond solver horizon");
    }
    const double t      = h * static_cast<double>(k0);
    const double s0     = sol.initial().s0();
    const double cstar  = c.terminal();
    const auto& tau     = sol.tau();
    double history_mass = 0.0;
    if (k0 > 0) {
        history_mass = 0.5 * h * (sol.b[0] * tau.tail_mass(t) + sol.b[k0] * tau.r0());
        for (std::size_t j = 1; j < k0; ++j) {
            history_mass += h * sol.b[j] * tau.tail_mass(t - h * static_cast<double>(j));
        }
    }
    const double psi   = std::log(s0 / sol.S[k0]);
    const double a     = psi + cstar * (history_mass - tau.r0() * sol.B[k0] +
                                     sol.initial().i0() * sol.initial().tau_bar().tail_mass(t));
    return solve_final_size_equation(s0, a, cstar * tau.r0()) + sol.initial().i0();
}

double final_size_after(const LimitSolution& sol) { return final_size_after(sol, sol.contact().last_breakpoint()); }

} // namespace epigen
