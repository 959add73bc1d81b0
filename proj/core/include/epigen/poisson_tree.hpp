#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"
#include "epigen/random.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace epigen
{

/// Parameters of the two-type Poisson Galton-Watson tree: every (S) vertex has Poisson(S0 R0)
/// (S)-children with edge lengths ~ nu and Poisson(I0 R0_bar) (I)-leaves with (w, z) ~ G.
struct TreeParams {
    TreeParams(const IntensityKernel& tau, const ContactRate& c, const InitialCondition& ic, double horizon);

    std::shared_ptr<const IntensityKernel> tau;
    std::shared_ptr<const ContactRate> contact;
    std::shared_ptr<const InitialCondition> initial;
    double s0r0      = 0.0;
    double i0r0bar   = 0.0;
    double horizon   = 0.0;
    std::size_t node_cap = 10'000;
    /// Explore with budgets mean_generation_time * 2^k up to the horizon instead of one pass.
    bool iterative_deepening = false;
    /// Decorate the geodesic with Palm courses of this model.
    std::shared_ptr<const CourseModel> palm_model;
};

struct TreeChild {
    /// W for (S)-children, W_bar for (I)-leaves
    double length;
    /// uniform acceptance variable: the edge is active iff s <= c(contact time)
    double s;
    bool initial;
    /// Z for (I)-leaves
    double z = 0.0;
};

/// Offspring of one vertex, drawn from the vertex's own stream: (S)-children first, in draw order.
std::vector<TreeChild> expand_node(const TreeParams& p, const Stream& node);

/// Stream of the i-th child (index in expand_node order).
inline Stream child_stream(const Stream& node, std::size_t i) { return node.derive(StreamTag::tree_node, i); }

/// Stream of the root of sample number index.
inline Stream tree_root(std::uint64_t seed, std::uint64_t index) { return Stream(seed, StreamTag::tree, index); }

struct GeodesicSample {
    /// sigma^infinity if not censored
    double sigma  = 0.0;
    bool censored = true;
    /// R(0) = sigma > R(1) > ... > R(n) = -Z along the argmin path
    std::vector<double> path_times;
    /// path individuals' courses (root first), filled when palm_model is set
    std::vector<DiseaseCourse> courses;
    std::size_t nodes_expanded = 0;
    std::size_t max_depth      = 0;
};

/// sigma = min over (S)-children of chi_i (W_i + sigma_i) and over (I)-leaves of chi_bar_i W_bar_i,
/// evaluated depth first with pruning of any branch whose accumulated length exceeds the horizon
/// (or the best value found so far). Throws once more than node_cap vertices are expanded.
GeodesicSample sample_geodesic(const TreeParams& p, const Stream& root);

struct BEstimate {
    std::vector<double> times;
    std::vector<double> estimate;
    std::vector<double> standard_error;
    std::size_t samples = 0;
};

/// B_hat(t) = S0 * fraction of samples with sigma <= t, censoring at max(t_grid).
BEstimate estimate_B(const TreeParams& p, const std::vector<double>& t_grid, std::size_t n_samples,
                     std::uint64_t seed);

struct ConditionedPaths {
    double t     = 0.0;
    double delta = 0.0;
    std::size_t samples = 0;
    /// ancestral times of the samples with sigma in [t, t + delta]
    std::vector<std::vector<double>> paths;

    /// R_1 of each path
    std::vector<double> first_steps() const;
    /// R_0 - R_1 of each path
    std::vector<double> first_increments() const;
};

/// Throws when fewer than min_conditioned samples land in the window.
ConditionedPaths conditioned_paths(const TreeParams& p, double t, double delta, std::size_t n_samples,
                                   std::uint64_t seed, std::size_t min_conditioned = 200);

/// First backward times R(1) of the samples with sigma in [t, t + delta].
std::vector<double> conditioned_first_step(const TreeParams& p, double t, double delta, std::size_t n_samples,
                                           std::uint64_t seed);

} // namespace epigen
