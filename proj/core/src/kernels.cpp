#include "epigen/kernels.hpp"

#include "epigen/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace epigen
{

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

double term_value(const ExpTerm& t, double a)
{
    const double e = t.coef * std::exp(-t.rate * a);
    return t.power == 0 ? e : a * e;
}

// int_0^a of the term
double term_cumulative(const ExpTerm& t, double a)
{
    if (t.power == 0) {
        return t.coef * -std::expm1(-t.rate * a) / t.rate;
    }
    const double ra = t.rate * a;
    // 1 - e^{-x}(1 + x), computed without cancellation for small x
    const double v = ra < 1e-3 ? ra * ra * (0.5 - ra / 3.0 + ra * ra / 8.0) : -std::expm1(-ra) - ra * std::exp(-ra);
    return t.coef * v / (t.rate * t.rate);
}

// int_a^inf of the term
double term_tail(const ExpTerm& t, double a)
{
    const double e = std::exp(-t.rate * a);
    if (t.power == 0) {
        return t.coef * e / t.rate;
    }
    return t.coef * e * (a / t.rate + 1.0 / (t.rate * t.rate));
}

double term_laplace(const ExpTerm& t, double s)
{
    const double r = t.rate + s;
    if (t.coef == 0.0) {
        return 0.0;
    }
    if (!(r > 0.0)) {
        return inf;
    }
    return t.power == 0 ? t.coef / r : t.coef / (r * r);
}

std::size_t node_count(double max_age, double step)
{
    return static_cast<std::size_t>(std::llround(max_age / step)) + 1;
}

void check_grid(const AgeGrid& grid)
{
    if (!(grid.step > 0.0) || !(grid.max_age > grid.step)) {
        throw Error("age grid needs step > 0 and max_age > step");
    }
}

} // namespace

std::size_t AgeGrid::size() const { return node_count(max_age, step); }

AgeGrid default_age_grid(double mean_generation_time, double step)
{
    const double span = 40.0 * mean_generation_time;
    return {step, std::max(2.0, std::ceil(span / step)) * step};
}

// ---------------------------------------------------------------------------------------------
// IntensityKernel

IntensityKernel IntensityKernel::exponential(double beta, double gamma, std::optional<AgeGrid> grid)
{
    if (!(beta >= 0.0)) {
        throw Error("exponential kernel: beta must be nonnegative");
    }
    if (!(gamma > 0.0) && beta > 0.0) {
        throw Error("R0 infinite");
    }
    return exp_sum({{beta, gamma, 0}}, grid);
}

IntensityKernel IntensityKernel::seir(double beta, double lambda, double gamma, std::optional<AgeGrid> grid)
{
    if (!(beta >= 0.0) || !(lambda > 0.0)) {
        throw Error("seir kernel: beta >= 0 and lambda > 0 required");
    }
    if (!(gamma > 0.0)) {
        throw Error("R0 infinite");
    }
    if (std::abs(lambda - gamma) <= 1e-12 * lambda) {
        return exp_sum({{beta * lambda, lambda, 1}}, grid);
    }
    const double k = beta * lambda / (lambda - gamma);
    return exp_sum({{k, gamma, 0}, {-k, lambda, 0}}, grid);
}

IntensityKernel IntensityKernel::exp_sum(std::vector<ExpTerm> terms, std::optional<AgeGrid> grid)
{
    IntensityKernel k;
    for (const auto& t : terms) {
        if (t.power != 0 && t.power != 1) {
            throw Error("exponential term power must be 0 or 1");
        }
        if (t.coef != 0.0 && !(t.rate > 0.0)) {
            throw Error("R0 infinite");
        }
    }
    std::erase_if(terms, [](const ExpTerm& t) { return t.coef == 0.0; });
    k.terms_    = std::move(terms);
    k.analytic_ = true;

    double mass = 0.0, first = 0.0, abs_mass = 0.0, abs_first = 0.0;
    for (const auto& t : k.terms_) {
        const double m  = t.power == 0 ? 1.0 / t.rate : 1.0 / (t.rate * t.rate);
        const double m1 = t.power == 0 ? 1.0 / (t.rate * t.rate) : 2.0 / (t.rate * t.rate * t.rate);
        mass += t.coef * m;
        first += t.coef * m1;
        abs_mass += std::abs(t.coef) * m;
        abs_first += std::abs(t.coef) * m1;
    }
    k.r0_ = std::max(mass, 0.0);
    if (mass > 1e-300) {
        k.mean_age_ = first / mass;
    }
    else {
        k.mean_age_ = abs_mass > 0.0 ? abs_first / abs_mass : 1.0;
    }
    k.grid_ = grid ? *grid : default_age_grid(k.mean_age_);
    k.finalize();
    return k;
}

IntensityKernel IntensityKernel::tabulated(double step, std::vector<double> values, std::optional<double> tail_rate)
{
    if (values.size() < 2) {
        throw Error("tabulated kernel needs at least two values");
    }
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error("tau must be nonnegative");
        }
    }
    if (tail_rate && !(*tail_rate > 0.0) && values.back() > 0.0) {
        throw Error("R0 infinite");
    }
    IntensityKernel k;
    k.grid_      = {step, step * static_cast<double>(values.size() - 1)};
    k.tail_rate_ = tail_rate;
    check_grid(k.grid_);
    k.sampler_ = std::make_shared<InverseCdfTable>(0.0, step, std::move(values));

    const auto& v  = k.sampler_->values();
    double first   = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        first += 0.5 * step * (k.grid_.at(i - 1) * v[i - 1] + k.grid_.at(i) * v[i]);
    }
    double mass = k.sampler_->total();
    if (tail_rate && v.back() > 0.0) {
        const double rate = *tail_rate;
        const double a    = k.grid_.max_age;
        mass += v.back() / rate;
        first += v.back() * (a / rate + 1.0 / (rate * rate));
    }
    k.r0_       = mass;
    k.mean_age_ = mass > 0.0 ? first / mass : 1.0;
    return k;
}

IntensityKernel IntensityKernel::zero(AgeGrid grid)
{
    check_grid(grid);
    return tabulated(grid.step, std::vector<double>(grid.size(), 0.0));
}

void IntensityKernel::finalize()
{
    check_grid(grid_);
    const std::size_t n = grid_.size();
    std::vector<double> values(n);
    double scale = 0.0;
    for (const auto& t : terms_) {
        scale += std::abs(t.coef);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (const auto& t : terms_) {
            v += term_value(t, grid_.at(i));
        }
        if (v < 0.0) {
            if (v < -1e-12 * scale) {
                throw Error("tau must be nonnegative");
            }
            v = 0.0;
        }
        values[i] = v;
    }
    sampler_ = std::make_shared<InverseCdfTable>(0.0, grid_.step, std::move(values));
}

double IntensityKernel::operator()(double a) const
{
    if (a < 0.0) {
        return 0.0;
    }
    if (analytic_) {
        double v = 0.0;
        for (const auto& t : terms_) {
            v += term_value(t, a);
        }
        return std::max(v, 0.0);
    }
    if (a <= grid_.max_age) {
        return sampler_->density(a);
    }
    if (tail_rate_) {
        return sampler_->values().back() * std::exp(-*tail_rate_ * (a - grid_.max_age));
    }
    return 0.0;
}

double IntensityKernel::cumulative(double a) const
{
    if (a <= 0.0) {
        return 0.0;
    }
    if (analytic_) {
        double v = 0.0;
        for (const auto& t : terms_) {
            v += term_cumulative(t, a);
        }
        return std::clamp(v, 0.0, r0_);
    }
    double v = sampler_->cumulative(a);
    if (a > grid_.max_age && tail_rate_) {
        v += sampler_->values().back() * -std::expm1(-*tail_rate_ * (a - grid_.max_age)) / *tail_rate_;
    }
    return v;
}

double IntensityKernel::tail_mass(double a) const
{
    if (a <= 0.0) {
        return r0_;
    }
    if (analytic_) {
        double v = 0.0;
        for (const auto& t : terms_) {
            v += term_tail(t, a);
        }
        return std::clamp(v, 0.0, r0_);
    }
    double tail = 0.0;
    if (tail_rate_) {
        const double from = std::max(a, grid_.max_age);
        tail = sampler_->values().back() * std::exp(-*tail_rate_ * (from - grid_.max_age)) / *tail_rate_;
    }
    if (a >= grid_.max_age) {
        return tail;
    }
    return std::max(sampler_->total() - sampler_->cumulative(a), 0.0) + tail;
}

double IntensityKernel::laplace(double s) const
{
    if (analytic_) {
        double v = 0.0;
        for (const auto& t : terms_) {
            const double l = term_laplace(t, s);
            if (std::isinf(l)) {
                return inf;
            }
            v += l;
        }
        return v;
    }
    const auto& v = sampler_->values();
    double sum    = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        sum += 0.5 * grid_.step *
               (std::exp(-s * grid_.at(i - 1)) * v[i - 1] + std::exp(-s * grid_.at(i)) * v[i]);
    }
    if (tail_rate_ && v.back() > 0.0) {
        const double r = *tail_rate_ + s;
        if (!(r > 0.0)) {
            return inf;
        }
        sum += v.back() * std::exp(-s * grid_.max_age) / r;
    }
    return sum;
}

IntensityKernel IntensityKernel::on_grid(AgeGrid grid) const
{
    check_grid(grid);
    if (analytic_) {
        IntensityKernel k = *this;
        k.grid_           = grid;
        k.finalize();
        return k;
    }
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = (*this)(grid.at(i));
    }
    return tabulated(grid.step, std::move(values), tail_rate_);
}

// ---------------------------------------------------------------------------------------------
// ContactRate

namespace
{

void check_contact_values(const std::vector<double>& values)
{
    for (double v : values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error("contact rate outside [0,1]");
        }
    }
}

void check_increasing(const std::vector<double>& t)
{
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (!(t[i] > t[i - 1])) {
            throw Error("contact rate breakpoints must be strictly increasing");
        }
    }
}

} // namespace

ContactRate ContactRate::constant(double c) { return piecewise_constant({}, {c}); }

ContactRate ContactRate::piecewise_constant(std::vector<double> breakpoints, std::vector<double> values)
{
    if (values.size() != breakpoints.size() + 1) {
        throw Error("piecewise-constant contact rate needs one more value than breakpoints");
    }
    check_contact_values(values);
    check_increasing(breakpoints);
    if (!breakpoints.empty() && !(breakpoints.front() > 0.0)) {
        throw Error("contact rate breakpoints must be positive");
    }
    ContactRate c;
    c.shape_       = Shape::piecewise_constant;
    c.breakpoints_ = std::move(breakpoints);
    c.values_      = std::move(values);
    return c;
}

ContactRate ContactRate::piecewise_linear(std::vector<double> times, std::vector<double> values)
{
    if (times.empty() || times.size() != values.size()) {
        throw Error("piecewise-linear contact rate needs matching nonempty times and values");
    }
    if (times.front() != 0.0) {
        throw Error("piecewise-linear contact rate must start at t = 0");
    }
    check_contact_values(values);
    check_increasing(times);
    ContactRate c;
    c.shape_       = Shape::piecewise_linear;
    c.breakpoints_ = std::move(times);
    c.values_      = std::move(values);
    return c;
}

double ContactRate::operator()(double t) const
{
    if (shape_ == Shape::piecewise_constant) {
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
    }
    if (t <= breakpoints_.front()) {
        return values_.front();
    }
    if (t >= breakpoints_.back()) {
        return values_.back();
    }
    const auto it       = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin());
    const double w      = (t - breakpoints_[j - 1]) / (breakpoints_[j] - breakpoints_[j - 1]);
    return values_[j - 1] + w * (values_[j] - values_[j - 1]);
}

double ContactRate::left_limit(double t) const
{
    if (shape_ == Shape::piecewise_constant) {
        const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t);
        return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
    }
    return (*this)(t);
}

double ContactRate::max_on(double lo, double hi) const
{
    double m = std::max((*this)(lo), (*this)(hi));
    // every value attained inside (lo, hi) is a piece value or a knot value
    for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
        if (breakpoints_[j] > lo && breakpoints_[j] < hi) {
            if (shape_ == Shape::piecewise_constant) {
                m = std::max(m, values_[j + 1]);
            }
            else {
                m = std::max(m, values_[j]);
            }
        }
    }
    return m;
}

bool ContactRate::is_constant() const
{
    return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
}

// ---------------------------------------------------------------------------------------------
// AgeDensity

AgeDensity AgeDensity::exponential(double rate)
{
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw Error("exponential density needs a positive rate");
    }
    AgeDensity g;
    g.exponential_ = true;
    g.rate_        = rate;
    g.max_value_   = rate;
    g.mean_        = 1.0 / rate;
    const std::size_t n = 5001;
    const double step   = g.support_max() / static_cast<double>(n - 1);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = rate * std::exp(-rate * step * static_cast<double>(i));
    }
    g.table_ = std::make_shared<InverseCdfTable>(0.0, step, std::move(values));
    return g;
}

AgeDensity AgeDensity::tabulated(double step, std::vector<double> values)
{
    InverseCdfTable raw(0.0, step, values);
    const double mass = raw.total();
    if (!(mass > 0.0)) {
        throw Error("density table has zero mass");
    }
    for (auto& v : values) {
        v /= mass;
    }
    AgeDensity g;
    g.table_     = std::make_shared<InverseCdfTable>(0.0, step, std::move(values));
    const auto& v = g.table_->values();
    g.max_value_ = *std::max_element(v.begin(), v.end());
    double first = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double a0 = step * static_cast<double>(i - 1);
        const double a1 = step * static_cast<double>(i);
        // exact first moment of the linear interpolant on the cell
        first += step * (v[i - 1] * (2.0 * a0 + a1) + v[i] * (a0 + 2.0 * a1)) / 6.0;
    }
    g.mean_ = first;
    return g;
}

double AgeDensity::operator()(double a) const
{
    if (a < 0.0) {
        return 0.0;
    }
    if (exponential_) {
        return rate_ * std::exp(-rate_ * a);
    }
    return table_->density(a);
}

double AgeDensity::sample(Stream& rng) const
{
    if (exponential_) {
        return rng.exponential(rate_);
    }
    return table_->sample(rng);
}

double AgeDensity::support_max() const { return exponential_ ? 50.0 / rate_ : table_->upper(); }

// ---------------------------------------------------------------------------------------------
// InitialCondition

InitialCondition::InitialCondition(double i0, AgeDensity g, const IntensityKernel& tau)
    : i0_{i0}
    , g_{std::move(g)}
    , tau_{std::make_shared<IntensityKernel>(tau)}
{
    if (!(i0 > 0.0 && i0 < 1.0)) {
        throw Error("I0 in (0,1) required");
    }
    tau_bar_ = std::make_shared<IntensityKernel>(bar_tau(*tau_, g_));

    // z-marginal of G: g(z) times the mass of tau beyond z
    const double step = tau_->grid().step;
    const double zmax = g_.support_max();
    const std::size_t n = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(zmax / step)) + 1);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = step * static_cast<double>(i);
        values[i]      = g_(z) * tau_->tail_mass(z);
    }
    z_marginal_ = std::make_shared<InverseCdfTable>(0.0, step, std::move(values));
}

double InitialCondition::joint_density(double w, double z) const
{
    if (w < 0.0 || z < 0.0 || !(r0_bar() > 0.0)) {
        return 0.0;
    }
    return g_(z) * (*tau_)(w + z) / r0_bar();
}

std::pair<double, double> sample_joint_g(const InitialCondition& ic, Stream& rng)
{
    if (!(ic.r0_bar() > 0.0)) {
        throw Error("joint law G undefined: R0_bar is zero");
    }
    const double z          = ic.z_marginal().sample(rng);
    const auto& table       = ic.tau().sampler();
    const double below      = table.cumulative(z);
    const double remaining  = table.total() - below;
    double a;
    if (remaining > 1e-300 && z < table.upper()) {
        a = table.quantile_mass(below + rng.uniform_open0() * remaining);
        a = std::max(a, z);
    }
    else {
        // beyond the tabulated range: the slowest exponential decay governs the remaining mass
        double rate = ic.tau().tail_rate().value_or(0.0);
        for (const auto& t : ic.tau().terms()) {
            rate = rate > 0.0 ? std::min(rate, t.rate) : t.rate;
        }
        if (!(rate > 0.0)) {
            rate = 1.0 / ic.tau().mean_generation_time();
        }
        a = z + rng.exponential(rate);
    }
    return {a - z, z};
}

// ---------------------------------------------------------------------------------------------
// derived quantities

double basic_reproduction_number(const IntensityKernel& tau) { return tau.r0(); }

MalthusianSolve malthusian_parameter(const IntensityKernel& tau, std::pair<double, double> bracket, double tol)
{
    auto [lo, hi] = bracket;
    if (!(lo < hi)) {
        throw Error("Malthusian bracket must satisfy lo < hi");
    }
    // +inf (divergent transform) is treated as lying above 1
    const double f_lo = tau.laplace(lo) - 1.0;
    const double f_hi = tau.laplace(hi) - 1.0;
    if (!(f_lo > 0.0) || !(f_hi < 0.0)) {
        if (f_lo == 0.0) {
            return {lo, 0.0, bracket, 0};
        }
        if (f_hi == 0.0) {
            return {hi, 0.0, bracket, 0};
        }
        throw Error("no Malthusian parameter in bracket");
    }

    MalthusianSolve out;
    out.bracket = bracket;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double f = tau.laplace(mid) - 1.0;
        ++out.iterations;
        if (f == 0.0) {
            lo = hi = mid;
            break;
        }
        if (f > 0.0) {
            lo = mid;
        }
        else {
            hi = mid;
        }
    }
    const double r_lo = std::abs(tau.laplace(lo) - 1.0);
    const double r_hi = std::abs(tau.laplace(hi) - 1.0);
    out.alpha         = r_lo <= r_hi ? lo : hi;
    out.residual      = std::min(r_lo, r_hi);
    if (!(out.residual <= tol)) {
        throw Error("Malthusian residual above tolerance");
    }
    return out;
}

IntensityKernel bar_tau(const IntensityKernel& tau, const AgeDensity& g)
{
    if (tau.is_analytic() && g.is_exponential()) {
        const double rho = g.rate();
        std::vector<ExpTerm> terms;
        for (const auto& t : tau.terms()) {
            const double f = rho / (rho + t.rate);
            if (t.power == 0) {
                terms.push_back({t.coef * f, t.rate, 0});
            }
            else {
                terms.push_back({t.coef * f, t.rate, 1});
                terms.push_back({t.coef * f / (rho + t.rate), t.rate, 0});
            }
        }
        return IntensityKernel::exp_sum(std::move(terms), tau.grid());
    }

    // trapezoid in the initial age on tau's step
    const AgeGrid& grid = tau.grid();
    const double h      = grid.step;
    const std::size_t m = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(g.support_max() / h)) + 1);
    std::vector<double> gw(m);
    for (std::size_t j = 0; j < m; ++j) {
        gw[j] = g(h * static_cast<double>(j)) * h * ((j == 0 || j + 1 == m) ? 0.5 : 1.0);
    }
    // tau on the extended grid [0, max_age + support]
    const std::size_t n = grid.size();
    std::vector<double> tv(n + m);
    for (std::size_t i = 0; i < tv.size(); ++i) {
        tv[i] = tau(h * static_cast<double>(i));
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            s += gw[j] * tv[i + j];
        }
        values[i] = s;
    }
    return IntensityKernel::tabulated(h, std::move(values), tau.tail_rate());
}

IntensityKernel backward_density(const IntensityKernel& tau, double alpha, double tol)
{
    std::optional<IntensityKernel> out;
    if (tau.is_analytic()) {
        std::vector<ExpTerm> terms(tau.terms().begin(), tau.terms().end());
        for (auto& t : terms) {
            t.rate += alpha;
            if (!(t.rate > 0.0)) {
                throw Error("backward density diverges for this alpha");
            }
        }
        out = IntensityKernel::exp_sum(std::move(terms), tau.grid());
    }
    else {
        const auto& src = tau.table();
        std::vector<double> values(src.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] = std::exp(-alpha * tau.grid().at(i)) * src[i];
        }
        std::optional<double> tail;
        if (tau.tail_rate()) {
            tail = *tau.tail_rate() + alpha;
        }
        out = IntensityKernel::tabulated(tau.grid().step, std::move(values), tail);
    }
    if (!(std::abs(out->r0() - 1.0) <= tol)) {
        throw Error("backward density does not integrate to 1: alpha is not the Malthusian root");
    }
    return *out;
}

} // namespace epigen
