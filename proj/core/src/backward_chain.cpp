#include "epigen/backward_chain.hpp"

#include "epigen/error.hpp"
#include "epigen/parallel.hpp"
#include "epigen/tables.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace epigen
{

namespace
{

constexpr double b_floor = 1e-12;
constexpr std::size_t max_proposals = 100'000'000;
constexpr std::size_t block = 4096;

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

template <class Fn>
void for_each_block(std::size_t n, Fn&& fn)
{
    const std::size_t blocks = (n + block - 1) / block;
    parallel_for(blocks, [&](std::size_t b) { fn(b, b * block, std::min(n, (b + 1) * block)); });
}

} // namespace

// ---------------------------------------------------------------------------------------------
// BackwardModel

BackwardModel BackwardModel::from_solution(const LimitSolution& sol)
{
    BackwardModel m;
    m.step_ = sol.step();
    m.s_    = sol.S;
    m.force_.resize(sol.size());
    for (std::size_t k = 0; k < sol.size(); ++k) {
        m.force_[k] = sol.S[k] * sol.J[k];
    }
    m.tau_  = std::make_shared<IntensityKernel>(sol.tau());
    m.c_    = std::make_shared<ContactRate>(sol.contact());
    m.ic_   = std::make_shared<InitialCondition>(sol.initial());
    m.finish();
    return m;
}

BackwardModel BackwardModel::linearized(const GridFunction& b_lin, const IntensityKernel& tau, const ContactRate& c,
                                        const InitialCondition& ic)
{
    BackwardModel m;
    m.step_ = b_lin.step;
    m.s_.assign(b_lin.values.size(), 1.0);
    // J = b / c where c > 0; J is continuous, so nodes with c = 0 take the linear fill of their neighbors
    m.force_.assign(b_lin.values.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> known;
    for (std::size_t k = 0; k < b_lin.values.size(); ++k) {
        const double ck = c(b_lin.time(k));
        if (ck > 0.0) {
            m.force_[k] = b_lin.values[k] / ck;
            known.push_back(k);
        }
    }
    for (std::size_t k = 0; k < m.force_.size(); ++k) {
        if (!std::isnan(m.force_[k])) {
            continue;
        }
        const auto hi = std::lower_bound(known.begin(), known.end(), k);
        if (known.empty()) {
            m.force_[k] = 0.0;
        }
        else if (hi == known.begin()) {
            m.force_[k] = m.force_[*hi];
        }
        else if (hi == known.end()) {
            m.force_[k] = m.force_[known.back()];
        }
        else {
            const std::size_t a = *(hi - 1), b = *hi;
            const double r      = static_cast<double>(k - a) / static_cast<double>(b - a);
            m.force_[k]         = m.force_[a] + r * (m.force_[b] - m.force_[a]);
        }
    }
    m.tau_ = std::make_shared<IntensityKernel>(tau);
    m.c_   = std::make_shared<ContactRate>(c);
    m.ic_  = std::make_shared<InitialCondition>(ic);
    m.finish();
    return m;
}

void BackwardModel::finish()
{
    if (force_.size() < 2) {
        throw Error("backward model needs a grid with at least two points");
    }
    // prefix_max_[k] bounds b on [0, k step]: cell maxima of the interpolated force times sup c
    prefix_max_.resize(force_.size());
    double run     = (*c_)(0.0) * force_[0];
    prefix_max_[0] = run;
    for (std::size_t k = 1; k < force_.size(); ++k) {
        const double lo = step_ * static_cast<double>(k - 1);
        run             = std::max(run, std::max(force_[k - 1], force_[k]) * c_->max_on(lo, lo + step_));
        prefix_max_[k]  = run;
    }
    try {
        alpha_   = malthusian_parameter(*tau_).alpha;
        renewal_ = std::make_shared<IntensityKernel>(backward_density(*tau_, alpha_));
    }
    catch (const Error&) {
        // chains that need alpha report the failure when used
        alpha_ = std::numeric_limits<double>::quiet_NaN();
        renewal_.reset();
    }
}

double BackwardModel::b(double x) const
{
    if (x < 0.0) {
        return ic_->i0() * ic_->g()(-x);
    }
    if (x > horizon() * (1.0 + 1e-12)) {
        throw Error("state beyond solver horizon");
    }
    return (*c_)(x) * interpolate(force_, step_, x);
}

double BackwardModel::survival(double x) const
{
    if (x <= 0.0) {
        return 1.0;
    }
    return interpolate(s_, step_, x) * (*c_)(x);
}

double BackwardModel::b_bound(double x) const
{
    double bound = ic_->i0() * ic_->g().max_value();
    if (x > 0.0) {
        const auto k = std::min(prefix_max_.size() - 1, static_cast<std::size_t>(std::ceil(x / step_)));
        bound        = std::max(bound, prefix_max_[k]);
    }
    return bound;
}

double BackwardModel::q_row_integral(double x) const
{
    if (!(x > 0.0)) {
        throw Error("row integral needs a state x > 0");
    }
    const double bx = b(x);
    if (bx < b_floor) {
        throw Error("chain undefined at t");
    }
    // positive part: trapezoid with a quarter of the grid step on interpolated b
    const double h  = 0.25 * step_;
    const auto n    = static_cast<std::size_t>(std::ceil(x / h));
    const double hx = x / static_cast<double>(n);
    double pos      = 0.5 * (b(0.0) * (*tau_)(x) + b(x) * (*tau_)(0.0));
    for (std::size_t j = 1; j < n; ++j) {
        const double y = hx * static_cast<double>(j);
        pos += b(y) * (*tau_)(x - y);
    }
    pos *= hx;
    // negative part: composite Simpson over the initial ages
    const auto m    = 2 * static_cast<std::size_t>(std::ceil(ic_->g().support_max() / (2.0 * step_)));
    const double hu = ic_->g().support_max() / static_cast<double>(m);
    double neg      = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
        const double u = hu * static_cast<double>(j);
        const double w = (j == 0 || j == m) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        neg += w * ic_->g()(u) * (*tau_)(x + u);
    }
    neg *= ic_->i0() * hu / 3.0;
    return survival(x) * (pos + neg) / bx;
}

// ---------------------------------------------------------------------------------------------
// renewal chains

RenewalChain sample_renewal(double t, const IntensityKernel& renewal_density, Stream& rng)
{
    RenewalChain ch;
    ch.start = t;
    ch.times.push_back(t);
    while (ch.times.back() > 0.0) {
        ch.times.push_back(ch.times.back() - renewal_density.sample_generation_time(rng));
    }
    ch.stop_index = ch.times.size() - 1;
    return ch;
}

RenewalChain sample_renewal(double t, double alpha, const IntensityKernel& tau, Stream& rng)
{
    const IntensityKernel r = backward_density(tau, alpha);
    return sample_renewal(t, r, rng);
}

namespace
{

const IntensityKernel& renewal_of(const BackwardModel& m)
{
    if (std::isnan(m.alpha())) {
        throw Error("renewal chain needs a Malthusian parameter");
    }
    return m.renewal_density();
}

} // namespace

void apply_killing(RenewalChain& chain, const BackwardModel& m, Stream& rng)
{
    chain.kill_index = not_killed;
    for (std::size_t k = 0; k < chain.stop_index; ++k) {
        if (!(rng.uniform() < m.survival(chain.times[k]))) {
            chain.kill_index = k;
            chain.times.resize(k + 1);
            return;
        }
    }
}

RenewalChain sample_killed_renewal(double t, const BackwardModel& m, Stream& rng)
{
    const IntensityKernel& r = renewal_of(m);
    RenewalChain ch;
    ch.start = t;
    ch.times.push_back(t);
    while (ch.times.back() > 0.0) {
        if (!(rng.uniform() < m.survival(ch.times.back()))) {
            ch.kill_index = ch.times.size() - 1;
            break;
        }
        ch.times.push_back(ch.times.back() - r.sample_generation_time(rng));
    }
    if (ch.kill_index == not_killed) {
        ch.stop_index = ch.times.size() - 1;
    }
    else {
        // the stopping index lies beyond the killing; it is only known to exceed K
        ch.stop_index = ch.times.size();
    }
    return ch;
}

// ---------------------------------------------------------------------------------------------
// h-chain

double sample_h_step(double x, const BackwardModel& m, Stream& rng)
{
    if (!(x > 0.0)) {
        throw Error("h-chain step needs a state x > 0");
    }
    if (m.b(x) < b_floor) {
        throw Error("chain undefined at t");
    }
    if (!(m.survival(x) > 0.0)) {
        throw Error("h-chain reached a state with c S = 0 where the kernel has no mass");
    }
    const double bound = m.b_bound(x);
    for (std::size_t tries = 0; tries < max_proposals; ++tries) {
        const double y = x - m.tau().sample_generation_time(rng);
        if (rng.uniform() * bound < m.b(y)) {
            return y;
        }
    }
    throw Error("h-chain step exceeded proposal limit at x = " + std::to_string(x));
}

HChain sample_h_chain(double t, const BackwardModel& m, Stream& rng)
{
    if (t > 0.0 && m.b(t) < b_floor) {
        throw Error("chain undefined at t");
    }
    HChain h;
    h.times.push_back(t);
    while (h.times.back() > 0.0) {
        h.times.push_back(sample_h_step(h.times.back(), m, rng));
    }
    return h;
}

// ---------------------------------------------------------------------------------------------
// diagnostics

MartingaleReport martingale_diagnostic(double t, const BackwardModel& m, std::size_t n_samples, std::size_t k_max,
                                       std::uint64_t seed)
{
    if (n_samples < 2) {
        throw Error("martingale diagnostic needs at least two samples");
    }
    renewal_of(m);
    const std::size_t nk     = k_max + 1;
    const std::size_t blocks = (n_samples + block - 1) / block;
    std::vector<std::vector<double>> sums(blocks, std::vector<double>(nk, 0.0));
    std::vector<std::vector<double>> sq(blocks, std::vector<double>(nk, 0.0));
    for_each_block(n_samples, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng            = Stream(seed, StreamTag::chain, i);
            const RenewalChain ch = sample_killed_renewal(t, m, rng);
            for (std::size_t k = 0; k < nk; ++k) {
                double v = 0.0;
                if (ch.kill_index == not_killed || ch.kill_index >= k) {
                    const std::size_t idx = std::min(k, ch.stop_index);
                    v                     = m.harmonic(ch.times[idx]);
                }
                sums[b][k] += v;
                sq[b][k] += v * v;
            }
        }
    });

    MartingaleReport rep;
    rep.t         = t;
    rep.reference = m.harmonic(t);
    rep.samples   = n_samples;
    const double n = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < nk; ++k) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            s += sums[b][k];
            s2 += sq[b][k];
        }
        const double mean = s / n;
        const double var  = std::max(s2 / n - mean * mean, 0.0) * n / (n - 1.0);
        rep.mean.push_back(mean);
        rep.standard_error.push_back(std::sqrt(var / n));
    }
    return rep;
}

SurvivalReport survival_representation_check(double t, const BackwardModel& m, std::size_t n_samples,
                                             std::uint64_t seed)
{
    renewal_of(m);
    const auto& g      = m.initial().g();
    const double alpha = m.alpha();
    if (!g.is_exponential() || std::abs(g.rate() - alpha) > 1e-6 * std::max(1.0, std::abs(alpha))) {
        throw Error("representation requires equilibrium g");
    }
    if (n_samples < 2) {
        throw Error("survival check needs at least two samples");
    }
    const std::size_t blocks = (n_samples + block - 1) / block;
    std::vector<std::size_t> alive(blocks, 0);
    for_each_block(n_samples, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng = Stream(seed, StreamTag::chain, i);
            if (sample_killed_renewal(t, m, rng).survived()) {
                ++alive[b];
            }
        }
    });
    SurvivalReport rep;
    rep.t       = t;
    rep.b       = m.b(t);
    rep.samples = n_samples;
    const double n  = static_cast<double>(n_samples);
    rep.survival    = static_cast<double>(std::accumulate(alive.begin(), alive.end(), std::size_t{0})) / n;
    rep.survival_se = std::sqrt(rep.survival * (1.0 - rep.survival) / n);
    const double f  = alpha * std::exp(alpha * t);
    rep.literal     = f * rep.survival;
    rep.literal_se  = f * rep.survival_se;
    rep.scaled      = m.initial().i0() * rep.literal;
    rep.scaled_se   = m.initial().i0() * rep.literal_se;
    return rep;
}

WeightedSamples reweighted_first_increments(double t, const BackwardModel& m, std::size_t n_samples,
                                            std::uint64_t seed)
{
    renewal_of(m);
    const double h0          = m.harmonic(t);
    const std::size_t blocks = (n_samples + block - 1) / block;
    std::vector<WeightedSamples> parts(blocks);
    for_each_block(n_samples, [&](std::size_t b, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng            = Stream(seed, StreamTag::chain, i);
            const RenewalChain ch = sample_killed_renewal(t, m, rng);
            if (!ch.survived() || ch.times.size() < 2) {
                continue;
            }
            parts[b].values.push_back(t - ch.times[1]);
            parts[b].weights.push_back(m.harmonic(ch.times[ch.stop_index]) / h0);
        }
    });
    WeightedSamples out;
    for (auto& p : parts) {
        out.values.insert(out.values.end(), p.values.begin(), p.values.end());
        out.weights.insert(out.weights.end(), p.weights.begin(), p.weights.end());
    }
    return out;
}

std::vector<double> h_chain_first_increments(double t, const BackwardModel& m, std::size_t n_samples,
                                             std::uint64_t seed)
{
    if (m.b(t) < b_floor) {
        throw Error("chain undefined at t");
    }
    std::vector<double> out(n_samples);
    for_each_block(n_samples, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Stream rng = Stream(seed, StreamTag::chain, i);
            out[i]     = t - sample_h_step(t, m, rng);
        }
    });
    return out;
}

namespace
{

InverseCdfTable window_table(double lo, double hi, const BackwardModel& m)
{
    if (!(lo >= 0.0) || !(hi > lo) || hi > m.horizon() * (1.0 + 1e-12)) {
        throw Error("start window must satisfy 0 <= lo < hi <= horizon");
    }
    const auto n    = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((hi - lo) / m.step())) + 1);
    const double dx = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = m.b(std::min(hi, lo + dx * static_cast<double>(k)));
    }
    InverseCdfTable table(lo, dx, std::move(v));
    if (!(table.total() > 0.0)) {
        throw Error("chain undefined at t");
    }
    return table;
}

} // namespace

std::vector<double> h_chain_window_first_increments(double lo, double hi, const BackwardModel& m,
                                                    std::size_t n_samples, std::uint64_t seed)
{
    const InverseCdfTable starts = window_table(lo, hi, m);
    std::vector<double> out(n_samples);
    for_each_block(n_samples, [&](std::size_t, std::size_t a, std::size_t z) {
        for (std::size_t i = a; i < z; ++i) {
            Stream rng     = Stream(seed, StreamTag::chain, i);
            const double t = starts.sample(rng);
            out[i]         = t - sample_h_step(t, m, rng);
        }
    });
    return out;
}

std::vector<std::vector<double>> h_chain_window_paths(double lo, double hi, const BackwardModel& m,
                                                      std::size_t n_samples, std::uint64_t seed)
{
    const InverseCdfTable starts = window_table(lo, hi, m);
    std::vector<std::vector<double>> out(n_samples);
    for_each_block(n_samples, [&](std::size_t, std::size_t a, std::size_t z) {
        for (std::size_t i = a; i < z; ++i) {
            Stream rng     = Stream(seed, StreamTag::chain, i);
            const double t = starts.sample(rng);
            out[i]         = sample_h_chain(t, m, rng).times;
        }
    });
    return out;
}

} // namespace epigen
