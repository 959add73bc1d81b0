#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"

#include <cstddef>
#include <memory>
#include <vector>

namespace epigen
{

struct SolverOptions {
    double newton_tol = 1e-15;
    int newton_max    = 100;
};

/// Grid solution of the delay equation: incidence b, cumulative incidence B and susceptible
/// fraction S at t_k = k step, k = 0 .. K, together with the force of infection
/// J(t) = int_{-inf}^t b(a) tau(t - a) da (with b(-u) = I0 g(u)).
class LimitSolution
{
public:
    LimitSolution(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double step,
                  std::size_t intervals);

    double step() const { return step_; }
    double horizon() const { return step_ * static_cast<double>(b.size() - 1); }
    std::size_t size() const { return b.size(); }
    double time(std::size_t k) const { return step_ * static_cast<double>(k); }

    const IntensityKernel& tau() const { return *tau_; }
    const ContactRate& contact() const { return *c_; }
    const InitialCondition& initial() const { return *ic_; }

    /// Linear interpolation on the grid; for t < 0 b(t) = I0 g(-t). Throws beyond the horizon.
    double b_at(double t) const;
    double B_at(double t) const;
    double S_at(double t) const;

    /// n(t, a) = b(t - a) for a <= t, I0 g(a - t) otherwise.
    double n_at(double t, double a) const;

    /// max_k |b_k - c_k S_k J_k| with J recomputed by the trapezoid convolution.
    double renewal_residual() const;

    /// max_k |B_k - S0 (1 - exp(-Psi_k))| with Psi the trapezoid integral of c J.
    double delay_residual() const;

    std::vector<double> b, B, S, J;

private:
    void check_time(double t) const;

    double step_;
    std::shared_ptr<const IntensityKernel> tau_;
    std::shared_ptr<const ContactRate> c_;
    std::shared_ptr<const InitialCondition> ic_;
};

/// Marches the renewal equation b = c S (b * tau) on [0, T] with a trapezoid convolution. At each
/// step the unknown J_k solves the scalar equation J = C + K J exp(-q J) that couples the
/// tau(0)-weight of the new incidence with the exponential update S_k = S_{k-1} exp(-int c J);
/// it is solved by Newton's method. Throws with the step index if Newton does not converge.
LimitSolution solve_delay(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double horizon,
                          double step, SolverOptions options = {});

struct GridFunction {
    double step = 0.0;
    std::vector<double> values;

    double time(std::size_t k) const { return step * static_cast<double>(k); }
    double at(double t) const;
};

/// Same marching scheme with S = 1.
GridFunction solve_linearized(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic,
                              double horizon, double step);

struct PicardResult {
    std::vector<double> B;
    int iterations = 0;
    bool converged = false;
    /// per iteration: sup |B_{n+1} - B_n| and the same weighted by exp(-gamma t)
    std::vector<double> sup_increments;
    std::vector<double> weighted_increments;
    double gamma = 0.0;
};

/// Fixed-point iteration B -> Phi(B) of the delay equation started from B = 0, with a
/// Stieltjes-trapezoid inner integral and a trapezoid outer integral.
PicardResult solve_delay_picard(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic,
                                double horizon, double step, double tol = 1e-13, int max_iterations = 1000);

/// t -> int_0^inf n(t, a) p(a, i) da at the grid points nearest to the requested times.
std::vector<double> compartment_curve(const LimitSolution& sol, const CourseModel& model, std::size_t compartment,
                                      const std::vector<double>& times);

/// All compartments at once: result[i][m] for compartment i at times[m].
std::vector<std::vector<double>> compartment_curves(const LimitSolution& sol, const CourseModel& model,
                                                    const std::vector<double>& times);

/// Root of B = S0 (1 - exp(-(A + kappa B))) in [0, S0].
double solve_final_size_equation(double s0, double a, double kappa, double tol = 1e-12, int max_iterations = 10000);

/// Total infected fraction B_inf + I0 for a constant contact rate.
double final_size(double r0_bar, double r0, double i0, double c, double tol = 1e-12);

/// Total infected fraction B_inf + I0 when c is constant from time t0 on, continuing the
/// solution's history on [0, t0]. t0 defaults to the last contact-rate breakpoint.
double final_size_after(const LimitSolution& sol, double t0);
double final_size_after(const LimitSolution& sol);

} // namespace epigen
