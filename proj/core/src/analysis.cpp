#include "epigen/analysis.hpp"

#include "epigen/error.hpp"
#include "epigen/forward_sim.hpp"
#include "epigen/limit_solver.hpp"
#include "epigen/parallel.hpp"
#include "epigen/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace epigen
{

double Histogram::mass() const
{
    double s = 0.0;
    for (double d : density) {
        s += d * width;
    }
    return s;
}

namespace
{

Histogram empty_histogram(double lo, double hi, std::size_t bins)
{
    if (bins == 0 || !(hi > lo)) {
        throw Error("histogram needs bins > 0 and hi > lo");
    }
    Histogram h;
    h.lo    = lo;
    h.width = (hi - lo) / static_cast<double>(bins);
    h.density.assign(bins, 0.0);
    return h;
}

} // namespace

Histogram make_weighted_histogram(const std::vector<double>& samples, const std::vector<double>& weights, double lo,
                                  double hi, std::size_t bins)
{
    if (samples.size() != weights.size()) {
        throw Error("weights and samples differ in length");
    }
    Histogram h = empty_histogram(lo, hi, bins);
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw Error("histogram weights must be nonnegative");
        }
        total += w;
    }
    if (!(total > 0.0)) {
        throw Error("histogram needs positive total weight");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = (samples[i] - lo) / h.width;
        if (u >= 0.0 && u < static_cast<double>(bins)) {
            h.density[static_cast<std::size_t>(u)] += weights[i];
        }
        else {
            h.outside += weights[i];
        }
    }
    for (double& d : h.density) {
        d /= total * h.width;
    }
    h.outside /= total;
    return h;
}

Histogram make_histogram(const std::vector<double>& samples, double lo, double hi, std::size_t bins)
{
    if (samples.empty()) {
        throw Error("histogram needs at least one sample");
    }
    return make_weighted_histogram(samples, std::vector<double>(samples.size(), 1.0), lo, hi, bins);
}

Histogram histogram_of_density(const std::function<double(double)>& f, double lo, double hi, std::size_t bins,
                               std::size_t panels_per_bin)
{
    Histogram h          = empty_histogram(lo, hi, bins);
    const std::size_t m  = 2 * std::max<std::size_t>(1, (panels_per_bin + 1) / 2);
    const double sub     = h.width / static_cast<double>(m);
    double inside        = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        const double a = lo + h.width * static_cast<double>(k);
        double s       = 0.0;
        for (std::size_t j = 0; j <= m; ++j) {
            const double w = (j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            s += w * f(a + sub * static_cast<double>(j));
        }
        const double integral = s * sub / 3.0;
        h.density[k]          = integral / h.width;
        inside += integral;
    }
    h.outside = std::max(0.0, 1.0 - inside);
    return h;
}

double l1_histogram_distance(const Histogram& h1, const Histogram& h2)
{
    const double tol = 1e-12 * std::max(1.0, std::abs(h1.lo) + std::abs(h1.hi()));
    if (h1.bins() != h2.bins() || std::abs(h1.lo - h2.lo) > tol || std::abs(h1.width - h2.width) > tol) {
        throw Error("histograms on mismatched grids");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < h1.bins(); ++k) {
        d += std::abs(h1.density[k] - h2.density[k]) * h1.width;
    }
    return d + std::abs(h1.outside - h2.outside);
}

double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf)
{
    if (samples.empty()) {
        throw Error("KS distance needs at least one sample");
    }
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d       = 0.0;
    std::size_t i  = 0;
    while (i < samples.size()) {
        std::size_t j = i;
        while (j < samples.size() && samples[j] == samples[i]) {
            ++j;
        }
        const double f = cdf(samples[i]);
        d              = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(j) / n - f)});
        i              = j;
    }
    return d;
}

ComparisonReport make_report(std::string statistic, double value, double threshold, double standard_error,
                             std::vector<std::size_t> sample_counts, std::string digest)
{
    ComparisonReport r;
    r.statistic      = std::move(statistic);
    r.value          = value;
    r.threshold      = threshold;
    r.standard_error = std::max(0.0, standard_error);
    r.pass           = value <= threshold;
    r.sample_counts  = std::move(sample_counts);
    r.digest         = std::move(digest);
    return r;
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t replica)
{
    Stream s(seed, StreamTag::replica, replica);
    return s();
}

std::vector<double> reporting_grid(double horizon, std::size_t points)
{
    if (points < 2) {
        throw Error("reporting grid needs at least two points");
    }
    std::vector<double> t(points);
    for (std::size_t i = 0; i < points; ++i) {
        t[i] = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    t.back() = horizon;
    return t;
}

double sup_deviation(const std::vector<std::vector<double>>& sim, const std::vector<std::vector<double>>& limit,
                     const std::vector<std::size_t>& compartments)
{
    if (sim.size() != limit.size()) {
        throw Error("compartment counts differ");
    }
    std::vector<std::size_t> use = compartments;
    if (use.empty()) {
        use.resize(sim.size());
        std::iota(use.begin(), use.end(), std::size_t{0});
    }
    double d = 0.0;
    for (std::size_t i : use) {
        if (i >= sim.size() || sim[i].size() != limit[i].size()) {
            throw Error("compartment curves do not match");
        }
        for (std::size_t m = 0; m < sim[i].size(); ++m) {
            d = std::max(d, std::abs(sim[i][m] - limit[i][m]));
        }
    }
    return d;
}

MeanAndError mean_and_error(const std::vector<double>& values)
{
    MeanAndError r;
    if (values.empty()) {
        return r;
    }
    const double n = static_cast<double>(values.size());
    r.mean         = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - r.mean) * (v - r.mean);
        }
        r.standard_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return r;
}

LlnReport lln_convergence_report(const LlnScenario& sc, const std::vector<std::size_t>& sizes, std::size_t replicas,
                                 std::uint64_t seed)
{
    if (sizes.empty() || replicas == 0) {
        throw Error("convergence report needs sizes and replicas");
    }
    const auto times = reporting_grid(sc.horizon, sc.grid_points);
    const auto sol   = solve_delay(sc.model.tau(), sc.contact, sc.initial, sc.horizon, sc.step);
    const auto limit = compartment_curves(sol, sc.model, times);
    const std::size_t nc = sc.model.compartments().size();

    LlnReport rep;
    rep.sizes = sizes;
    for (std::size_t n : sizes) {
        auto dev = parallel_map<double>(replicas, [&](std::size_t r) {
            const auto out = simulate(sc.model, n, sc.contact, sc.initial, sc.horizon, replica_seed(seed, r));
            return sup_deviation(compartment_fractions(out, nc, times), limit, sc.compartments);
        });
        const auto me = mean_and_error(dev);
        rep.mean_deviation.push_back(me.mean);
        rep.reports.push_back(make_report("sup deviation N=" + std::to_string(n), me.mean,
                                          std::numeric_limits<double>::infinity(), me.standard_error,
                                          {n, replicas}, sc.digest));
        rep.deviations.push_back(std::move(dev));
    }
    if (sizes.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double k = static_cast<double>(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const double x = std::log(static_cast<double>(sizes[i]));
            const double y = std::log(std::max(rep.mean_deviation[i], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        rep.exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        std::size_t below = 0;
        for (std::size_t r = 0; r < replicas; ++r) {
            below += rep.deviations.back()[r] < rep.deviations.front()[r] ? 1 : 0;
        }
        rep.paired_fraction = static_cast<double>(below) / static_cast<double>(replicas);
    }
    return rep;
}

} // namespace epigen
