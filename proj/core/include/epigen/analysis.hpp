#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace epigen
{

/// Normalized histogram on [lo, lo + width * bins); density[k] integrates to the mass of bin k.
/// Mass falling outside the grid is kept in `outside` so that distances still see it.
struct Histogram {
    double lo = 0.0;
    double width = 1.0;
    std::vector<double> density;
    double outside = 0.0;

    std::size_t bins() const { return density.size(); }
    double hi() const { return lo + width * static_cast<double>(density.size()); }
    double center(std::size_t k) const { return lo + width * (static_cast<double>(k) + 0.5); }
    double mass() const;
};

Histogram make_histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins);
Histogram make_weighted_histogram(const std::vector<double>& samples, const std::vector<double>& weights, double lo,
                                  double hi, std::size_t bins);

/// Bin averages of a density f by Simpson's rule; mass outside the grid is 1 - (mass inside).
Histogram histogram_of_density(const std::function<double(double)>& f, double lo, double hi, std::size_t bins,
                               std::size_t panels_per_bin = 32);

/// sum |h1 - h2| * width plus the difference of the outside masses. Throws on mismatched grids.
double l1_histogram_distance(const Histogram& h1, const Histogram& h2);

/// sup_x |F_n(x) - F(x)| over the sample points, checking both one-sided limits.
double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf);

struct ComparisonReport {
    std::string statistic;
    double value = 0.0;
    double threshold = 0.0;
    double standard_error = 0.0;
    bool pass = false;
    std::vector<std::size_t> sample_counts;
    std::string digest;
};

/// Builds a report with pass = (value <= threshold).
ComparisonReport make_report(std::string statistic, double value, double threshold, double standard_error,
                             std::vector<std::size_t> sample_counts = {}, std::string digest = {});

/// Simulation replica r of a scenario: the seed is taken from the (seed, replica, r) stream.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t replica);

/// Evenly spaced reporting times t_0 = 0, ..., t_{n-1} = horizon.
std::vector<double> reporting_grid(double horizon, std::size_t points = 64);

struct LlnScenario {
    CourseModel model;
    ContactRate contact;
    InitialCondition initial;
    double horizon = 25.0;
    double step = 1e-3;
    /// compartments entering the sup; empty means all
    std::vector<std::size_t> compartments;
    std::size_t grid_points = 64;
    std::string digest;
};

struct LlnReport {
    std::vector<std::size_t> sizes;
    /// deviations[i][r]: sup over grid and compartments for size i, replica r
    std::vector<std::vector<double>> deviations;
    std::vector<double> mean_deviation;
    /// least-squares slope of log mean deviation against log N
    double exponent = 0.0;
    /// fraction of replicas whose deviation at the largest N is below the one at the smallest N
    double paired_fraction = 0.0;
    std::vector<ComparisonReport> reports;
};

/// For each N runs `replicas` simulations and measures the sup-over-grid deviation of compartment
/// fractions from the limit curves.
LlnReport lln_convergence_report(const LlnScenario& scenario, const std::vector<std::size_t>& sizes,
                                 std::size_t replicas, std::uint64_t seed);

/// Sup over times and the selected compartments of |sim - limit|; both indexed [compartment][time].
double sup_deviation(const std::vector<std::vector<double>>& sim, const std::vector<std::vector<double>>& limit,
                     const std::vector<std::size_t>& compartments);

struct MeanAndError {
    double mean = 0.0;
    double standard_error = 0.0;
};

MeanAndError mean_and_error(const std::vector<double>& values);

} // namespace epigen
