#include "epigen/tables.hpp"

#include "epigen/error.hpp"

#include <algorithm>
#include <cmath>

namespace epigen
{

InverseCdfTable::InverseCdfTable(double origin, double step, std::vector<double> values)
    : origin_{origin}
    , step_{step}
    , values_{std::move(values)}
{
    if (!(step_ > 0.0)) {
        throw Error("table step must be positive");
    }
    if (values_.size() < 2) {
        throw Error("table needs at least two nodes");
    }
    cumulative_.resize(values_.size());
    cumulative_[0] = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] >= 0.0) || !std::isfinite(values_[i])) {
            throw Error("table values must be finite and nonnegative");
        }
        if (i > 0) {
            cumulative_[i] = cumulative_[i - 1] + 0.5 * step_ * (values_[i - 1] + values_[i]);
        }
    }
}

double InverseCdfTable::density(double x) const
{
    if (values_.empty()) {
        return 0.0;
    }
    const double u = (x - origin_) / step_;
    if (u < 0.0 || u > static_cast<double>(values_.size() - 1)) {
        return 0.0;
    }
    const auto i = std::min(static_cast<std::size_t>(u), values_.size() - 2);
    const double r = u - static_cast<double>(i);
    return values_[i] + r * (values_[i + 1] - values_[i]);
}

double InverseCdfTable::cumulative(double x) const
{
    if (values_.empty()) {
        return 0.0;
    }
    const double u = (x - origin_) / step_;
    if (u <= 0.0) {
        return 0.0;
    }
    if (u >= static_cast<double>(values_.size() - 1)) {
        return cumulative_.back();
    }
    const auto i   = static_cast<std::size_t>(u);
    const double s = (u - static_cast<double>(i)) * step_;
    const double k = (values_[i + 1] - values_[i]) / step_;
    return cumulative_[i] + values_[i] * s + 0.5 * k * s * s;
}

double InverseCdfTable::quantile_mass(double mass) const
{
    if (values_.empty()) {
        throw Error("quantile of empty table");
    }
    const double total = cumulative_.back();
    if (!(total > 0.0)) {
        throw Error("quantile of zero-mass table");
    }
    mass = std::clamp(mass, 0.0, total);
    // first cell whose right cumulative reaches mass
    auto it      = std::lower_bound(cumulative_.begin() + 1, cumulative_.end(), mass);
    std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
    if (i >= cumulative_.size()) {
        i = cumulative_.size() - 1;
    }
    --i;
    const double r  = mass - cumulative_[i];
    const double f0 = values_[i];
    const double k  = (values_[i + 1] - values_[i]) / step_;
    // solve f0 s + k s^2 / 2 = r in the numerically stable form
    double s;
    const double disc = f0 * f0 + 2.0 * k * r;
    const double den  = f0 + std::sqrt(std::max(disc, 0.0));
    if (den > 0.0) {
        s = 2.0 * r / den;
    }
    else {
        s = 0.0;
    }
    s = std::clamp(s, 0.0, step_);
    return origin_ + step_ * static_cast<double>(i) + s;
}

} // namespace epigen
