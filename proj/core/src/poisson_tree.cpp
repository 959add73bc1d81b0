#include "epigen/poisson_tree.hpp"

#include "epigen/error.hpp"
#include "epigen/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace epigen
{

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

} // namespace

TreeParams::TreeParams(const IntensityKernel& tau_, const ContactRate& c, const InitialCondition& ic, double horizon_)
    : tau{std::make_shared<IntensityKernel>(tau_)}
    , contact{std::make_shared<ContactRate>(c)}
    , initial{std::make_shared<InitialCondition>(ic)}
    , s0r0{ic.s0() * tau_.r0()}
    , i0r0bar{ic.i0() * ic.r0_bar()}
    , horizon{horizon_}
{
    if (!(horizon_ >= 0.0) || !std::isfinite(horizon_)) {
        throw Error("tree horizon must be finite and nonnegative");
    }
}

std::vector<TreeChild> expand_node(const TreeParams& p, const Stream& node)
{
    Stream rng             = node;
    const std::uint64_t ns = rng.poisson(p.s0r0);
    const std::uint64_t ni = rng.poisson(p.i0r0bar);
    std::vector<TreeChild> kids;
    kids.reserve(ns + ni);
    for (std::uint64_t k = 0; k < ns; ++k) {
        const double w = p.tau->sample_generation_time(rng);
        kids.push_back({w, rng.uniform_open0(), false, 0.0});
    }
    for (std::uint64_t k = 0; k < ni; ++k) {
        const auto [w, z] = sample_joint_g(*p.initial, rng);
        kids.push_back({w, rng.uniform_open0(), true, z});
    }
    return kids;
}

namespace
{

struct Step {
    double length;
    double z;
    bool initial;
    /// infection time of the child (-z for an (I)-leaf)
    double child_sigma;
    Stream stream;
};

struct Eval {
    double sigma = inf;
    std::vector<Step> chain;
};

class Explorer
{
public:
    explicit Explorer(const TreeParams& p)
        : p_{p}
    {
    }

    Eval eval(const Stream& node, double budget, std::size_t depth)
    {
        if (++nodes > p_.node_cap) {
            throw Error("tree exceeded node cap: " + std::to_string(nodes - 1) + " vertices expanded, depth " +
                        std::to_string(max_depth) + ", horizon " + std::to_string(p_.horizon) +
                        " (near-zero edge lengths or a supercritical tree far beyond the horizon)");
        }
        max_depth = std::max(max_depth, depth);
        const auto kids = expand_node(p_, node);
        const ContactRate& c = *p_.contact;

        Eval best;
        std::vector<std::size_t> order;
        order.reserve(kids.size());
        for (std::size_t i = 0; i < kids.size(); ++i) {
            const auto& k = kids[i];
            if (!k.initial) {
                order.push_back(i);
                continue;
            }
            if (k.length <= budget && k.length < best.sigma && k.s <= c(k.length)) {
                best.sigma = k.length;
                best.chain.assign(1, Step{k.length, k.z, true, -k.z, child_stream(node, i)});
            }
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return kids[a].length < kids[b].length || (kids[a].length == kids[b].length && a < b);
        });
        for (std::size_t i : order) {
            const auto& k    = kids[i];
            const double lim = std::min(budget, best.sigma);
            if (!(k.length <= lim)) {
                break;
            }
            // the edge cannot become active anywhere in the admissible window
            if (k.s > c.max_on(k.length, lim)) {
                continue;
            }
            const Stream child = child_stream(node, i);
            Eval sub           = eval(child, lim - k.length, depth + 1);
            if (sub.sigma == inf) {
                continue;
            }
            const double cand = k.length + sub.sigma;
            if (cand < best.sigma && cand <= budget && k.s <= c(cand)) {
                best.sigma = cand;
                best.chain.clear();
                best.chain.push_back(Step{k.length, 0.0, false, sub.sigma, child});
                best.chain.insert(best.chain.end(), sub.chain.begin(), sub.chain.end());
            }
        }
        return best;
    }

    std::size_t nodes     = 0;
    std::size_t max_depth = 0;

private:
    const TreeParams& p_;
};

} // namespace

GeodesicSample sample_geodesic(const TreeParams& p, const Stream& root)
{
    Explorer ex(p);
    Eval result;
    if (p.iterative_deepening) {
        double budget = std::max(p.tau->mean_generation_time(), 1e-6);
        for (;;) {
            budget = std::min(budget, p.horizon);
            result = ex.eval(root, budget, 0);
            if (result.sigma != inf || budget >= p.horizon) {
                break;
            }
            budget *= 2.0;
        }
    }
    else {
        result = ex.eval(root, p.horizon, 0);
    }

    GeodesicSample out;
    out.nodes_expanded = ex.nodes;
    out.max_depth      = ex.max_depth;
    if (result.sigma == inf || result.sigma > p.horizon) {
        out.censored = true;
        out.sigma    = inf;
        return out;
    }
    out.censored = false;
    out.sigma    = result.sigma;
    out.path_times.push_back(result.sigma);
    for (const auto& s : result.chain) {
        out.path_times.push_back(s.child_sigma);
    }
    if (p.palm_model) {
        const CourseModel& m = *p.palm_model;
        Stream rs            = root.derive(StreamTag::course, 0);
        out.courses.push_back(m.sample(rs));
        for (const auto& s : result.chain) {
            const double age = s.initial ? s.length + s.z : s.length;
            Stream ps        = s.stream.derive(StreamTag::palm, 0);
            out.courses.push_back(m.sample_palm(age, ps, std::max(m.default_max_age(), age)));
        }
    }
    return out;
}

BEstimate estimate_B(const TreeParams& p, const std::vector<double>& t_grid, std::size_t n_samples,
                     std::uint64_t seed)
{
    if (t_grid.empty()) {
        throw Error("estimate_B needs at least one time");
    }
    if (n_samples == 0) {
        throw Error("estimate_B needs samples");
    }
    TreeParams q = p;
    q.horizon    = *std::max_element(t_grid.begin(), t_grid.end());
    q.palm_model = nullptr;

    constexpr std::size_t block = 1024;
    const std::size_t blocks    = (n_samples + block - 1) / block;
    auto sigmas                 = parallel_map<std::vector<double>>(blocks, [&](std::size_t b) {
        std::vector<double> v;
        const std::size_t end = std::min(n_samples, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            v.push_back(sample_geodesic(q, tree_root(seed, i)).sigma);
        }
        return v;
    });

    BEstimate out;
    out.times   = t_grid;
    out.samples = n_samples;
    const double s0 = p.initial->s0();
    const double n  = static_cast<double>(n_samples);
    for (double t : t_grid) {
        std::size_t hits = 0;
        for (const auto& v : sigmas) {
            hits += static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [t](double s) { return s <= t; }));
        }
        const double frac = static_cast<double>(hits) / n;
        out.estimate.push_back(s0 * frac);
        out.standard_error.push_back(s0 * std::sqrt(frac * (1.0 - frac) / n));
    }
    return out;
}

std::vector<double> ConditionedPaths::first_steps() const
{
    std::vector<double> v;
    v.reserve(paths.size());
    for (const auto& p : paths) {
        v.push_back(p.at(1));
    }
    return v;
}

std::vector<double> ConditionedPaths::first_increments() const
{
    std::vector<double> v;
    v.reserve(paths.size());
    for (const auto& p : paths) {
        v.push_back(p.at(0) - p.at(1));
    }
    return v;
}

ConditionedPaths conditioned_paths(const TreeParams& p, double t, double delta, std::size_t n_samples,
                                   std::uint64_t seed, std::size_t min_conditioned)
{
    if (!(t >= 0.0) || !(delta > 0.0)) {
        throw Error("conditioning window needs t >= 0 and delta > 0");
    }
    TreeParams q = p;
    q.horizon    = t + delta;
    q.palm_model = nullptr;

    constexpr std::size_t block = 1024;
    const std::size_t blocks    = (n_samples + block - 1) / block;
    auto parts = parallel_map<std::vector<std::vector<double>>>(blocks, [&](std::size_t b) {
        std::vector<std::vector<double>> v;
        const std::size_t end = std::min(n_samples, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            auto g = sample_geodesic(q, tree_root(seed, i));
            if (!g.censored && g.sigma >= t) {
                v.push_back(std::move(g.path_times));
            }
        }
        return v;
    });

    ConditionedPaths out;
    out.t       = t;
    out.delta   = delta;
    out.samples = n_samples;
    for (auto& part : parts) {
        for (auto& path : part) {
            out.paths.push_back(std::move(path));
        }
    }
    if (out.paths.size() < min_conditioned) {
        throw Error("too few conditioned samples (" + std::to_string(out.paths.size()) + " < " +
                    std::to_string(min_conditioned) + "); increase the number of tree samples");
    }
    return out;
}

std::vector<double> conditioned_first_step(const TreeParams& p, double t, double delta, std::size_t n_samples,
                                           std::uint64_t seed)
{
    return conditioned_paths(p, t, delta, n_samples, seed).first_steps();
}

} // namespace epigen
