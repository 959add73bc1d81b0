#include "epigen/courses.hpp"

#include "epigen/error.hpp"
#include "epigen/parallel.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace epigen
{

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr std::size_t max_palm_proposals = 100'000'000;

} // namespace

// ---------------------------------------------------------------------------------------------
// CompartmentSet

CompartmentSet::CompartmentSet(std::vector<std::string> names, std::vector<std::pair<std::size_t, std::size_t>> edges)
    : names_{std::move(names)}
{
    if (names_.empty()) {
        throw Error("compartment set must not be empty");
    }
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) {
        throw Error("duplicate compartment name");
    }
    std::set<std::pair<std::size_t, std::size_t>> unique;
    for (const auto& e : edges) {
        if (e.first >= names_.size() || e.second >= names_.size()) {
            throw Error("compartment edge refers to an unknown compartment");
        }
        if (e.first == e.second) {
            throw Error("compartment graph has a cycle");
        }
        if (unique.insert(e).second) {
            edges_.push_back(e);
        }
    }
    // Kahn's algorithm
    std::vector<std::size_t> indegree(names_.size(), 0);
    for (const auto& e : edges_) {
        ++indegree[e.second];
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = names_.size(); i-- > 0;) {
        if (indegree[i] == 0) {
            ready.push_back(i);
        }
    }
    while (!ready.empty()) {
        const std::size_t v = ready.back();
        ready.pop_back();
        order_.push_back(v);
        for (const auto& e : edges_) {
            if (e.first == v && --indegree[e.second] == 0) {
                ready.push_back(e.second);
            }
        }
    }
    if (order_.size() != names_.size()) {
        throw Error("compartment graph has a cycle");
    }
}

std::size_t CompartmentSet::index(const std::string& name) const
{
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) {
        throw Error("unknown compartment: " + name);
    }
    return static_cast<std::size_t>(it - names_.begin());
}

bool CompartmentSet::has_edge(std::size_t from, std::size_t to) const
{
    return std::find(edges_.begin(), edges_.end(), std::pair{from, to}) != edges_.end();
}

bool CompartmentSet::is_absorbing(std::size_t i) const
{
    return std::none_of(edges_.begin(), edges_.end(), [i](const auto& e) { return e.first == i; });
}

// ---------------------------------------------------------------------------------------------
// DiseaseCourse

std::size_t DiseaseCourse::compartment_at(double age) const
{
    auto it = std::upper_bound(path.begin(), path.end(), age,
                               [](double a, const PathSegment& s) { return a < s.entry_age; });
    if (it == path.begin()) {
        return path.front().compartment;
    }
    return std::prev(it)->compartment;
}

double DiseaseCourse::exit_age(std::size_t compartment) const
{
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (path[k].compartment == compartment) {
            return k + 1 < path.size() ? path[k + 1].entry_age : inf;
        }
    }
    return -1.0;
}

std::size_t DiseaseCourse::count_atoms(double lo, double hi) const
{
    const auto first = std::lower_bound(atoms.begin(), atoms.end(), lo);
    const auto last  = std::upper_bound(atoms.begin(), atoms.end(), hi);
    return last > first ? static_cast<std::size_t>(last - first) : 0;
}

bool DiseaseCourse::satisfies_invariants(const CompartmentSet& compartments) const
{
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (!(atoms[k] >= 0.0) || (k > 0 && !(atoms[k] > atoms[k - 1]))) {
            return false;
        }
    }
    if (path.empty() || path.front().entry_age != 0.0) {
        return false;
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
        if (path[k].compartment >= compartments.size()) {
            return false;
        }
        if (k > 0 && (!(path[k].entry_age > path[k - 1].entry_age) ||
                      !compartments.has_edge(path[k - 1].compartment, path[k].compartment))) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------------------------
// CourseModel construction

void CourseModel::build_life_cycle(std::vector<Stage> stages, std::vector<Transition> transitions)
{
    if (stages.empty()) {
        throw Error("life cycle needs at least one stage");
    }
    std::vector<std::string> names;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& s : stages) {
        if (!(s.infectivity >= 0.0) || !std::isfinite(s.infectivity)) {
            throw Error("stage infectivity must be finite and nonnegative");
        }
        names.push_back(s.name);
    }
    exit_total_.assign(stages.size(), 0.0);
    for (const auto& t : transitions) {
        if (t.from >= stages.size() || t.to >= stages.size()) {
            throw Error("transition refers to an unknown stage");
        }
        if (!(t.rate > 0.0) || !std::isfinite(t.rate)) {
            throw Error("transition rates must be positive");
        }
        edges.emplace_back(t.from, t.to);
        exit_total_[t.from] += t.rate;
    }
    compartments_    = CompartmentSet(std::move(names), std::move(edges));
    stages_          = std::move(stages);
    transitions_     = std::move(transitions);
    max_infectivity_ = 0.0;
    for (const auto& s : stages_) {
        max_infectivity_ = std::max(max_infectivity_, s.infectivity);
    }
}

namespace
{

Eigen::MatrixXd generator(std::size_t n, const std::vector<Transition>& transitions)
{
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& t : transitions) {
        const auto i = static_cast<Eigen::Index>(t.from);
        const auto j = static_cast<Eigen::Index>(t.to);
        q(i, j) += t.rate;
        q(i, i) -= t.rate;
    }
    return q;
}

} // namespace

CourseModel CourseModel::poisson(IntensityKernel tau)
{
    return poisson(std::move(tau), {{"I", 0.0}}, {});
}

CourseModel CourseModel::poisson(IntensityKernel tau, std::vector<Stage> stages, std::vector<Transition> transitions)
{
    CourseModel m;
    m.kind_ = Kind::poisson;
    for (auto& s : stages) {
        s.infectivity = 0.0;
    }
    m.build_life_cycle(std::move(stages), std::move(transitions));
    m.tau_ = std::make_shared<IntensityKernel>(std::move(tau));
    return m;
}

CourseModel CourseModel::markov(std::vector<Stage> stages, std::vector<Transition> transitions,
                                std::optional<AgeGrid> grid)
{
    CourseModel m;
    m.kind_ = Kind::markov;
    m.build_life_cycle(std::move(stages), std::move(transitions));
    const std::size_t n = m.stages_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (m.exit_total_[i] == 0.0 && m.stages_[i].infectivity > 0.0) {
            throw Error("R0 infinite");
        }
    }

    // recognised closed forms
    const auto& s = m.stages_;
    const auto& t = m.transitions_;
    if (n == 2 && t.size() == 1 && t[0].from == 0 && t[0].to == 1 && s[1].infectivity == 0.0) {
        m.tau_ = std::make_shared<IntensityKernel>(IntensityKernel::exponential(s[0].infectivity, t[0].rate, grid));
        return m;
    }
    if (n == 3 && t.size() == 2 && t[0].from == 0 && t[0].to == 1 && t[1].from == 1 && t[1].to == 2 &&
        s[0].infectivity == 0.0 && s[2].infectivity == 0.0) {
        m.tau_ = std::make_shared<IntensityKernel>(
            IntensityKernel::seir(s[1].infectivity, t[0].rate, t[1].rate, grid));
        return m;
    }

    // general chain: tabulate tau(a) = sum_k beta_k P(X(a) = k)
    AgeGrid g;
    if (grid) {
        g = *grid;
    }
    else {
        std::vector<Eigen::Index> transient;
        for (std::size_t i = 0; i < n; ++i) {
            if (m.exit_total_[i] > 0.0) {
                transient.push_back(static_cast<Eigen::Index>(i));
            }
        }
        double mean = 1.0;
        if (!transient.empty() && m.exit_total_[0] > 0.0) {
            const Eigen::MatrixXd q = generator(n, m.transitions_);
            const auto nt           = static_cast<Eigen::Index>(transient.size());
            Eigen::MatrixXd qt(nt, nt);
            Eigen::VectorXd beta(nt);
            for (Eigen::Index i = 0; i < nt; ++i) {
                beta(i) = s[static_cast<std::size_t>(transient[static_cast<std::size_t>(i)])].infectivity;
                for (Eigen::Index j = 0; j < nt; ++j) {
                    qt(i, j) = q(transient[static_cast<std::size_t>(i)], transient[static_cast<std::size_t>(j)]);
                }
            }
            // int_0^inf e^{Qa} da = -Q^{-1}, int_0^inf a e^{Qa} da = Q^{-2}
            const Eigen::MatrixXd inv = qt.inverse();
            const double mass         = -(inv * beta)(0);
            const double first        = (inv * inv * beta)(0);
            if (mass > 0.0) {
                mean = first / mass;
            }
            else {
                mean = -inv.row(0).sum();
            }
        }
        g = default_age_grid(mean);
    }
    const std::size_t count = g.size();
    const auto table        = m.marginal_table(g.step, count);
    std::vector<double> values(count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < count; ++k) {
            values[k] += s[i].infectivity * std::max(table[i][k], 0.0);
        }
    }
    m.tau_ = std::make_shared<IntensityKernel>(IntensityKernel::tabulated(g.step, std::move(values)));
    return m;
}

CourseModel CourseModel::markov_chain(std::vector<Stage> stages, std::vector<double> exit_rates,
                                      std::optional<AgeGrid> grid)
{
    if (exit_rates.size() + 1 != stages.size()) {
        throw Error("sequential chain needs one exit rate per non-final stage");
    }
    std::vector<Transition> transitions;
    for (std::size_t k = 0; k < exit_rates.size(); ++k) {
        transitions.push_back({k, k + 1, exit_rates[k]});
    }
    return markov(std::move(stages), std::move(transitions), grid);
}

CourseModel CourseModel::markov_sir(double beta, double gamma, std::optional<AgeGrid> grid)
{
    return markov_chain({{"I", beta}, {"R", 0.0}}, {gamma}, grid);
}

CourseModel CourseModel::markov_seir(double beta, double lambda, double gamma, std::optional<AgeGrid> grid)
{
    return markov_chain({{"E", 0.0}, {"I", beta}, {"R", 0.0}}, {lambda, gamma}, grid);
}

CourseModel CourseModel::custom(IntensityKernel tau, CompartmentSet compartments, Sampler sampler)
{
    if (!sampler) {
        throw Error("custom course model needs a sampler");
    }
    CourseModel m;
    m.kind_         = Kind::custom;
    m.tau_          = std::make_shared<IntensityKernel>(std::move(tau));
    m.compartments_ = std::move(compartments);
    m.custom_       = std::move(sampler);
    return m;
}

// ---------------------------------------------------------------------------------------------
// sampling

namespace
{

void poisson_atoms(Stream& rng, double rate, double from, double to, std::vector<double>& atoms)
{
    if (!(rate > 0.0)) {
        return;
    }
    for (double t = from + rng.exponential(rate); t < to; t += rng.exponential(rate)) {
        atoms.push_back(t);
    }
}

void insert_atom(std::vector<double>& atoms, double a)
{
    const auto it = std::lower_bound(atoms.begin(), atoms.end(), a);
    if (it == atoms.end() || *it != a) {
        atoms.insert(it, a);
    }
}

} // namespace

double CourseModel::sample_path(Stream& rng, std::vector<PathSegment>& path, std::vector<double>* atoms,
                                double max_age) const
{
    std::size_t state = 0;
    double age        = 0.0;
    for (;;) {
        path.push_back({age, state});
        const double total = exit_total_[state];
        if (total == 0.0) {
            return age;
        }
        const double hold = rng.exponential(total);
        if (atoms != nullptr && age < max_age) {
            poisson_atoms(rng, stages_[state].infectivity, age, std::min(age + hold, max_age), *atoms);
        }
        double pick = rng.uniform() * total;
        std::size_t next = state;
        for (const auto& t : transitions_) {
            if (t.from != state) {
                continue;
            }
            next = t.to;
            pick -= t.rate;
            if (pick < 0.0) {
                break;
            }
        }
        state = next;
        age += hold;
    }
}

DiseaseCourse CourseModel::sample(Stream& rng, double max_age) const
{
    DiseaseCourse c;
    switch (kind_) {
    case Kind::custom:
        c = custom_(rng, max_age);
        break;
    case Kind::markov:
        sample_path(rng, c.path, &c.atoms, max_age);
        break;
    case Kind::poisson: {
        sample_path(rng, c.path, nullptr, max_age);
        const auto& table = tau_->sampler();
        if (table.total() > 0.0 && max_age > 0.0) {
            const double mass       = table.cumulative(max_age);
            const std::uint64_t cnt = rng.poisson(mass);
            c.atoms.reserve(cnt);
            for (std::uint64_t k = 0; k < cnt; ++k) {
                c.atoms.push_back(table.quantile_mass(rng.uniform() * mass));
            }
            std::sort(c.atoms.begin(), c.atoms.end());
            c.atoms.erase(std::unique(c.atoms.begin(), c.atoms.end()), c.atoms.end());
        }
        break;
    }
    }
    return c;
}

DiseaseCourse CourseModel::sample_palm(double age, Stream& rng, double max_age) const
{
    if (!((*tau_)(age) > 0.0)) {
        throw Error("Palm undefined at a");
    }
    if (kind_ == Kind::poisson) {
        DiseaseCourse c = sample(rng, max_age);
        insert_atom(c.atoms, age);
        return c;
    }
    if (kind_ == Kind::custom) {
        return sample_palm_windowed(age, default_palm_window(), rng, max_age);
    }

    // Markov: the path law is tilted by infectivity at age a; given the path the atoms are
    // Poisson, plus the atom at a itself.
    DiseaseCourse c;
    for (std::size_t tries = 0;; ++tries) {
        if (tries >= max_palm_proposals) {
            throw Error("Palm sampler exceeded proposal limit");
        }
        c.path.clear();
        sample_path(rng, c.path, nullptr, max_age);
        const double beta = stages_[c.compartment_at(age)].infectivity;
        if (rng.uniform() * max_infectivity_ < beta) {
            break;
        }
    }
    for (std::size_t k = 0; k < c.path.size(); ++k) {
        const double from = c.path[k].entry_age;
        const double to   = k + 1 < c.path.size() ? c.path[k + 1].entry_age : inf;
        if (from < max_age) {
            poisson_atoms(rng, stages_[c.path[k].compartment].infectivity, from, std::min(to, max_age), c.atoms);
        }
    }
    insert_atom(c.atoms, age);
    return c;
}

DiseaseCourse CourseModel::sample_palm_windowed(double age, double delta, Stream& rng, double max_age,
                                                std::size_t* proposals) const
{
    if (!((*tau_)(age) > 0.0)) {
        throw Error("Palm undefined at a");
    }
    if (!(delta > 0.0)) {
        throw Error("Palm window must be positive");
    }
    for (std::size_t tries = 1;; ++tries) {
        if (tries > max_palm_proposals) {
            throw Error("Palm sampler exceeded proposal limit");
        }
        DiseaseCourse c      = sample(rng, max_age);
        const std::size_t k  = c.count_atoms(age - 0.5 * delta, age + 0.5 * delta);
        const double accept  = 0.5 * static_cast<double>(std::min<std::size_t>(k, 2));
        if (k > 0 && rng.uniform() < accept) {
            if (proposals != nullptr) {
                *proposals = tries;
            }
            return c;
        }
    }
}

// ---------------------------------------------------------------------------------------------
// marginals

std::vector<double> CourseModel::marginal_all(double age) const
{
    if (kind_ == Kind::custom) {
        throw Error("marginal unavailable; use empirical");
    }
    const std::size_t n     = stages_.size();
    const Eigen::MatrixXd p = (generator(n, transitions_) * std::max(age, 0.0)).exp();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::clamp(p(0, static_cast<Eigen::Index>(i)), 0.0, 1.0);
    }
    return out;
}

double CourseModel::marginal_p(double age, std::size_t compartment) const
{
    if (kind_ == Kind::custom) {
        throw Error("marginal unavailable; use empirical");
    }
    if (compartment >= stages_.size()) {
        throw Error("unknown compartment");
    }
    return marginal_all(age)[compartment];
}

std::vector<std::vector<double>> CourseModel::marginal_table(double step, std::size_t count) const
{
    if (kind_ == Kind::custom) {
        throw Error("marginal unavailable; use empirical");
    }
    const std::size_t n     = stages_.size();
    const Eigen::MatrixXd p = (generator(n, transitions_) * step).exp();
    Eigen::RowVectorXd v    = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
    v(0)                    = 1.0;
    std::vector<std::vector<double>> out(n, std::vector<double>(count));
    for (std::size_t k = 0; k < count; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i][k] = std::clamp(v(static_cast<Eigen::Index>(i)), 0.0, 1.0);
        }
        v = v * p;
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// free functions

DiseaseCourse sample_course(const CourseModel& model, Stream& rng) { return model.sample(rng); }

double marginal_p(const CourseModel& model, double age, std::size_t compartment)
{
    return model.marginal_p(age, compartment);
}

DiseaseCourse sample_palm_course(const CourseModel& model, double age, Stream& rng)
{
    return model.sample_palm(age, rng, model.default_max_age());
}

IntensityKernel EmpiricalTau::as_kernel() const { return IntensityKernel::tabulated(step, estimate); }

EmpiricalTau empirical_tau(const CourseModel& model, std::size_t n, AgeGrid bins, const Stream& rng)
{
    if (n < 2) {
        throw Error("empirical tau needs at least two samples");
    }
    const auto nb = static_cast<std::size_t>(std::llround(bins.max_age / bins.step));
    if (nb == 0) {
        throw Error("empirical tau needs at least one bin");
    }
    constexpr std::size_t chunk = 4096;
    const std::size_t chunks    = (n + chunk - 1) / chunk;
    struct Acc {
        std::vector<double> sum, sumsq;
    };
    auto parts = parallel_map<Acc>(chunks, [&](std::size_t c) {
        Acc acc{std::vector<double>(nb, 0.0), std::vector<double>(nb, 0.0)};
        const std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            Stream s             = rng.derive(StreamTag::course, i);
            const DiseaseCourse d = model.sample(s, bins.max_age);
            std::size_t k = nb, run = 0;
            auto flush = [&] {
                if (run > 0) {
                    acc.sum[k] += static_cast<double>(run);
                    acc.sumsq[k] += static_cast<double>(run * run);
                }
            };
            for (double a : d.atoms) {
                const auto b = static_cast<std::size_t>(a / bins.step);
                if (b >= nb) {
                    break;
                }
                if (b != k) {
                    flush();
                    k   = b;
                    run = 0;
                }
                ++run;
            }
            flush();
        }
        return acc;
    });

    EmpiricalTau out;
    out.step    = bins.step;
    out.samples = n;
    out.estimate.assign(nb, 0.0);
    out.standard_error.assign(nb, 0.0);
    const double dn = static_cast<double>(n);
    for (std::size_t k = 0; k < nb; ++k) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& p : parts) {
            sum += p.sum[k];
            sumsq += p.sumsq[k];
        }
        const double mean = sum / dn;
        const double var  = std::max(sumsq / dn - mean * mean, 0.0) * dn / (dn - 1.0);
        out.estimate[k]       = mean / bins.step;
        out.standard_error[k] = std::sqrt(var / dn) / bins.step;
    }
    return out;
}

} // namespace epigen
