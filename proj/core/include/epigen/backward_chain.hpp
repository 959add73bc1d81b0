#pragma once

#include "epigen/kernels.hpp"
#include "epigen/limit_solver.hpp"
#include "epigen/random.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

namespace epigen
{

/// Inputs shared by the backward samplers: the incidence b on a grid (extended to negative times by
/// b(-u) = I0 g(u)), the survival probability l(x) = S(x) c(x) used for killing, tau and alpha.
class BackwardModel
{
public:
    /// b, S and c from a solution of the delay equation.
    static BackwardModel from_solution(const LimitSolution& sol);

    /// b from the linearized equation and S = 1, so l(x) = c(x).
    static BackwardModel linearized(const GridFunction& b_lin, const IntensityKernel& tau, const ContactRate& c,
                                    const InitialCondition& ic);

    double b(double x) const;
    double survival(double x) const;
    /// b(x) exp(-alpha x)
    double harmonic(double x) const { return b(x) * std::exp(-alpha_ * x); }

    double alpha() const { return alpha_; }
    double horizon() const { return step_ * static_cast<double>(force_.size() - 1); }
    double step() const { return step_; }
    const IntensityKernel& tau() const { return *tau_; }
    const InitialCondition& initial() const { return *ic_; }
    const IntensityKernel& renewal_density() const { return *renewal_; }

    /// An upper bound of b on (-inf, x].
    double b_bound(double x) const;

    /// int Q(x, y) dy by quadrature independent of the marching scheme.
    double q_row_integral(double x) const;

private:
    BackwardModel() = default;
    void finish();

    double step_ = 0.0;
    /// S J on the grid; b = c S J is interpolated through this continuous factor so that jumps of c stay sharp
    std::vector<double> force_;
    std::vector<double> s_;
    std::vector<double> prefix_max_;
    double alpha_ = std::numeric_limits<double>::quiet_NaN();
    std::shared_ptr<const IntensityKernel> tau_;
    std::shared_ptr<const ContactRate> c_;
    std::shared_ptr<const InitialCondition> ic_;
    std::shared_ptr<const IntensityKernel> renewal_;
};

inline constexpr std::size_t not_killed = std::numeric_limits<std::size_t>::max();

/// R_0 = t > R_1 > ... with i.i.d. increments of density exp(-alpha a) tau(a), stopped at the first
/// index L with R_L <= 0. kill_index K is the index of the state at which the chain was killed.
struct RenewalChain {
    double start = 0.0;
    std::vector<double> times;
    std::size_t stop_index = 0;
    std::size_t kill_index = not_killed;

    bool survived() const { return kill_index == not_killed || kill_index >= stop_index; }
};

/// Renewal chain without killing.
RenewalChain sample_renewal(double t, const IntensityKernel& renewal_density, Stream& rng);
RenewalChain sample_renewal(double t, double alpha, const IntensityKernel& tau, Stream& rng);

/// At each state x > 0 (index < L) the chain survives with probability l(x); records the first failure.
void apply_killing(RenewalChain& chain, const BackwardModel& m, Stream& rng);

/// Killed renewal chain: times stored up to min(L, K).
RenewalChain sample_killed_renewal(double t, const BackwardModel& m, Stream& rng);

struct HChain {
    std::vector<double> times;
};

/// h-transformed chain from t: transitions Q(x, y) = S(x) c(x) b(y) tau(x - y) / b(x) on y < x,
/// sampled exactly by proposing x - y ~ nu and accepting with probability b(y) / b_bound(x).
HChain sample_h_chain(double t, const BackwardModel& m, Stream& rng);

/// One transition of the h-chain from x.
double sample_h_step(double x, const BackwardModel& m, Stream& rng);

struct MartingaleReport {
    double t = 0.0;
    double reference = 0.0; // b(t) exp(-alpha t)
    std::vector<double> mean;
    std::vector<double> standard_error;
    std::size_t samples = 0;
};

/// Per-k means of M_k = b(R_{k^L}) exp(-alpha R_{k^L}) 1{K >= k} over killed renewal chains.
MartingaleReport martingale_diagnostic(double t, const BackwardModel& m, std::size_t n_samples, std::size_t k_max,
                                       std::uint64_t seed);

struct SurvivalReport {
    double t = 0.0;
    double b = 0.0;
    double survival = 0.0;
    double survival_se = 0.0;
    /// I0 alpha exp(alpha t) P and its standard error
    double scaled = 0.0;
    double scaled_se = 0.0;
    /// alpha exp(alpha t) P without the initial-fraction factor
    double literal = 0.0;
    double literal_se = 0.0;
    std::size_t samples = 0;
};

/// Compares b(t) with I0 alpha e^{alpha t} P(not killed before reaching 0). Requires g = Exp(alpha):
/// throws "representation requires equilibrium g" otherwise.
SurvivalReport survival_representation_check(double t, const BackwardModel& m, std::size_t n_samples,
                                             std::uint64_t seed);

struct WeightedSamples {
    std::vector<double> values;
    std::vector<double> weights;
};

/// First increments of killed renewal chains from t, weighted by 1{survived} b(R_L) e^{-alpha R_L} / (b(t) e^{-alpha t}).
WeightedSamples reweighted_first_increments(double t, const BackwardModel& m, std::size_t n_samples,
                                            std::uint64_t seed);

/// First increments t - R_1 of n h-chains started at t.
std::vector<double> h_chain_first_increments(double t, const BackwardModel& m, std::size_t n_samples,
                                             std::uint64_t seed);

/// First increments R_0 - R_1 of h-chains whose start R_0 is drawn from b restricted to [lo, hi].
std::vector<double> h_chain_window_first_increments(double lo, double hi, const BackwardModel& m,
                                                    std::size_t n_samples, std::uint64_t seed);

/// Full h-chain paths with starts drawn from b restricted to [lo, hi].
std::vector<std::vector<double>> h_chain_window_paths(double lo, double hi, const BackwardModel& m,
                                                      std::size_t n_samples, std::uint64_t seed);

} // namespace epigen
