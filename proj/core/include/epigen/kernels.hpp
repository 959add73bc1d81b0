#pragma once

#include "epigen/random.hpp"
#include "epigen/tables.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace epigen
{

/// Uniform age grid [0, max_age] with spacing step.
struct AgeGrid {
    double step    = 0.01;
    double max_age = 40.0;

    std::size_t size() const;
    double at(std::size_t i) const { return step * static_cast<double>(i); }
};

/// Default grid: step 0.01 over 40 mean generation times.
AgeGrid default_age_grid(double mean_generation_time, double step = 0.01);

/// coef * a^power * exp(-rate * a), power in {0, 1}.
struct ExpTerm {
    double coef;
    double rate;
    int power = 0;
};

/// Mean intensity tau(a) of the infection point process.
///
/// Either an analytic sum of exponential terms (the builtin exponential and SEIR families)
/// or a table on a uniform grid, linearly interpolated, with an optional exponential tail
/// beyond the last node. Immutable after construction.
class IntensityKernel
{
public:
    /// tau(a) = beta * exp(-gamma * a)
    static IntensityKernel exponential(double beta, double gamma, std::optional<AgeGrid> grid = {});

    /// tau(a) = beta * lambda / (lambda - gamma) * (exp(-gamma a) - exp(-lambda a))
    static IntensityKernel seir(double beta, double lambda, double gamma, std::optional<AgeGrid> grid = {});

    static IntensityKernel exp_sum(std::vector<ExpTerm> terms, std::optional<AgeGrid> grid = {});

    /// Values at ages 0, step, 2 step, ...; beyond the last node tau is zero, or continues as
    /// values.back() * exp(-tail_rate * (a - max_age)) when tail_rate is given.
    static IntensityKernel tabulated(double step, std::vector<double> values,
                                     std::optional<double> tail_rate = {});

    static IntensityKernel zero(AgeGrid grid = {});

    double operator()(double a) const;

    /// R0, the total mass.
    double r0() const { return r0_; }

    /// Integral of tau over [0, a].
    double cumulative(double a) const;

    /// Integral of tau over [a, infinity).
    double tail_mass(double a) const;

    /// Laplace transform at s; +infinity when the integral diverges.
    double laplace(double s) const;

    double mean_generation_time() const { return mean_age_; }

    const AgeGrid& grid() const { return grid_; }
    bool is_analytic() const { return analytic_; }
    bool has_tail() const { return tail_rate_.has_value(); }
    std::optional<double> tail_rate() const { return tail_rate_; }
    std::span<const ExpTerm> terms() const { return terms_; }

    /// Values on the grid nodes.
    std::span<const double> table() const { return sampler_->values(); }

    /// Inverse-CDF table of tau restricted to [0, max_age] (unnormalized).
    const InverseCdfTable& sampler() const { return *sampler_; }

    /// Draw from the generation-time law nu = tau / R0 (restricted to the grid range).
    double sample_generation_time(Stream& rng) const { return sampler_->sample(rng); }

    /// Same kernel re-tabulated on a different grid (analytic kernels keep their terms).
    IntensityKernel on_grid(AgeGrid grid) const;

private:
    IntensityKernel() = default;
    void finalize();

    AgeGrid grid_;
    bool analytic_ = false;
    std::vector<ExpTerm> terms_;
    std::optional<double> tail_rate_;
    std::shared_ptr<const InverseCdfTable> sampler_;
    double r0_       = 0.0;
    double mean_age_ = 0.0;
};

/// Contact rate c(t) with values in [0, 1]; right-continuous, finitely many breakpoints,
/// constant after the last one.
class ContactRate
{
public:
    enum class Shape { piecewise_constant, piecewise_linear };

    static ContactRate constant(double c);

    /// values.size() == breakpoints.size() + 1; values[i] holds on [breakpoints[i-1], breakpoints[i]).
    static ContactRate piecewise_constant(std::vector<double> breakpoints, std::vector<double> values);

    /// Linear interpolation between knots (times[0] == 0), constant after the last knot.
    static ContactRate piecewise_linear(std::vector<double> times, std::vector<double> values);

    double operator()(double t) const;
    /// lim c(s) as s increases to t; equals c(t) except at jumps.
    double left_limit(double t) const;

    /// Supremum of c over [lo, hi].
    double max_on(double lo, double hi) const;

    Shape shape() const { return shape_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& values() const { return values_; }
    double terminal() const { return values_.back(); }
    double last_breakpoint() const { return breakpoints_.empty() ? 0.0 : breakpoints_.back(); }
    bool is_constant() const;

private:
    Shape shape_ = Shape::piecewise_constant;
    std::vector<double> breakpoints_;
    std::vector<double> values_{1.0};
};

/// Probability density on the half-line: exponential or tabulated (linear interpolation).
class AgeDensity
{
public:
    static AgeDensity exponential(double rate);

    /// Normalized internally by the trapezoid mass.
    static AgeDensity tabulated(double step, std::vector<double> values);

    double operator()(double a) const;
    double sample(Stream& rng) const;

    bool is_exponential() const { return exponential_; }
    double rate() const { return rate_; }
    double max_value() const { return max_value_; }
    double mean() const { return mean_; }

    /// Beyond this age the density is zero (tabulated) or below exp(-50) relative (exponential).
    double support_max() const;

    const InverseCdfTable& table() const { return *table_; }

private:
    bool exponential_ = false;
    double rate_      = 0.0;
    double max_value_ = 0.0;
    double mean_      = 0.0;
    std::shared_ptr<const InverseCdfTable> table_;
};

/// Initial state: a fraction I0 infected with ages drawn from g, and the derived quantities
/// tau_bar(u) = int g(a) tau(a+u) da, R0_bar and the joint law G(w, z) = g(z) tau(w+z) / R0_bar.
class InitialCondition
{
public:
    InitialCondition(double i0, AgeDensity g, const IntensityKernel& tau);

    double i0() const { return i0_; }
    double s0() const { return 1.0 - i0_; }
    const AgeDensity& g() const { return g_; }
    const IntensityKernel& tau() const { return *tau_; }
    const IntensityKernel& tau_bar() const { return *tau_bar_; }
    double r0_bar() const { return tau_bar_->r0(); }

    /// G(w, z).
    double joint_density(double w, double z) const;

    /// Marginal law of the initial age z of an (I) individual whose contact is retained.
    const InverseCdfTable& z_marginal() const { return *z_marginal_; }

private:
    double i0_;
    AgeDensity g_;
    std::shared_ptr<const IntensityKernel> tau_;
    std::shared_ptr<const IntensityKernel> tau_bar_;
    std::shared_ptr<const InverseCdfTable> z_marginal_;
};

struct MalthusianSolve {
    double alpha    = 0.0;
    double residual = 0.0;
    std::pair<double, double> bracket{-5.0, 5.0};
    int iterations = 0;
};

double basic_reproduction_number(const IntensityKernel& tau);

/// Root of int exp(-alpha a) tau(a) da = 1 by bisection.
MalthusianSolve malthusian_parameter(const IntensityKernel& tau, std::pair<double, double> bracket = {-5.0, 5.0},
                                     double tol = 1e-10);

/// tau_bar(u) = int_0^inf g(a) tau(a + u) da, on tau's grid. Closed form when tau is analytic and
/// g exponential, trapezoid quadrature otherwise.
IntensityKernel bar_tau(const IntensityKernel& tau, const AgeDensity& g);

/// Backward generation-time density u -> exp(-alpha u) tau(u).
IntensityKernel backward_density(const IntensityKernel& tau, double alpha, double tol = 1e-6);

/// One draw (w, z) from G.
std::pair<double, double> sample_joint_g(const InitialCondition& ic, Stream& rng);

} // namespace epigen
