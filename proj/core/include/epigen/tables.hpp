#pragma once

#include "epigen/random.hpp"

#include <cstddef>
#include <vector>

namespace epigen
{

/// Piecewise-linear density on a uniform grid with an inverse-CDF sampler.
///
/// Node values need not be normalized. Masses are exact integrals of the piecewise-linear
/// interpolant (i.e. composite trapezoid), and quantiles invert that interpolant exactly by
/// solving the per-cell quadratic, so sampling matches the tabulated shape to machine precision.
class InverseCdfTable
{
public:
    InverseCdfTable() = default;
    InverseCdfTable(double origin, double step, std::vector<double> values);

    bool empty() const { return values_.empty(); }
    double origin() const { return origin_; }
    double step() const { return step_; }
    double upper() const { return origin_ + step_ * static_cast<double>(values_.size() - 1); }
    const std::vector<double>& values() const { return values_; }

    /// Total (unnormalized) mass.
    double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

    double density(double x) const;

    /// Mass of [origin, x].
    double cumulative(double x) const;

    /// Smallest x with cumulative(x) = mass (mass clamped to [0, total]).
    double quantile_mass(double mass) const;

    double sample(Stream& rng) const { return quantile_mass(rng.uniform_open0() * total()); }

private:
    double origin_ = 0.0;
    double step_   = 1.0;
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

} // namespace epigen
