#include "epigen/forward_sim.hpp"

#include "epigen/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace epigen
{

std::size_t SimOutput::infected_count(double t) const
{
    return static_cast<std::size_t>(std::count_if(individuals.begin(), individuals.end(),
                                                   [t](const IndividualRecord& r) { return r.infected_by(t); }));
}

double SimOutput::infected_fraction(double t) const
{
    return population == 0 ? 0.0 : static_cast<double>(infected_count(t)) / static_cast<double>(population);
}

std::vector<ContactDraw> contact_draws(std::uint64_t seed, std::size_t x, std::size_t count, std::size_t population)
{
    Stream s(seed, StreamTag::contacts, x);
    std::vector<ContactDraw> out(count);
    for (auto& d : out) {
        d.target = static_cast<std::size_t>(s.below(population));
        d.s      = s.uniform_open0();
    }
    return out;
}

IndividualRecord draw_individual(const CourseModel& model, const InitialCondition& ic, double horizon,
                                 std::uint64_t seed, std::size_t x)
{
    Stream s(seed, StreamTag::individual, x);
    IndividualRecord r;
    if (s.uniform() < ic.i0()) {
        // Z > 0 almost surely; guard the measure-zero case so that sigma = -Z stays negative
        double z = ic.g().sample(s);
        while (!(z > 0.0)) {
            z = ic.g().sample(s);
        }
        r.initial_age    = z;
        r.infection_time = -z;
    }
    r.course = model.sample(s, r.initial_age + horizon);
    return r;
}

namespace
{

struct Event {
    double time;
    std::size_t source;
    std::size_t atom;

    bool operator>(const Event& o) const
    {
        if (time != o.time) {
            return time > o.time;
        }
        if (source != o.source) {
            return source > o.source;
        }
        return atom > o.atom;
    }
};

} // namespace

SimOutput simulate(const CourseModel& model, std::size_t population, const ContactRate& c, const InitialCondition& ic,
                   double horizon, std::uint64_t seed, const SimOptions& options)
{
    if (population == 0) {
        throw Error("simulation needs at least one individual");
    }
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
        throw Error("simulation horizon must be finite and nonnegative");
    }
    const std::size_t n = population;
    std::vector<std::size_t> to_label(n), from_label(n);
    if (options.relabel.empty()) {
        for (std::size_t y = 0; y < n; ++y) {
            to_label[y] = from_label[y] = y;
        }
    }
    else {
        if (options.relabel.size() != n) {
            throw Error("relabeling must be a permutation of the population");
        }
        std::vector<bool> seen(n, false);
        for (std::size_t y = 0; y < n; ++y) {
            const std::size_t x = options.relabel[y];
            if (x >= n || seen[x]) {
                throw Error("relabeling must be a permutation of the population");
            }
            seen[x]       = true;
            to_label[y]   = x;
            from_label[x] = y;
        }
    }

    SimOutput out;
    out.population    = n;
    out.horizon       = horizon;
    out.seed          = seed;
    out.config_digest = options.config_digest;
    out.compartments  = model.compartments().names();
    out.individuals.resize(n);
    for (std::size_t x = 0; x < n; ++x) {
        out.individuals[x] = draw_individual(model, ic, horizon, seed, from_label[x]);
    }

    std::vector<std::vector<ContactDraw>> draws(n);
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
    auto schedule_from = [&](std::size_t x, std::size_t first) {
        const auto& rec   = out.individuals[x];
        const auto& atoms = rec.course.atoms;
        for (std::size_t j = first; j < atoms.size(); ++j) {
            const double t = rec.infection_time + atoms[j];
            if (t > horizon) {
                return;
            }
            if (t > 0.0) {
                queue.push({t, x, j});
                return;
            }
        }
    };

    std::size_t infected = 0;
    for (std::size_t x = 0; x < n; ++x) {
        if (out.individuals[x].initially_infected()) {
            ++infected;
            schedule_from(x, 0);
        }
    }
    std::size_t susceptible = n - infected;

    while (!queue.empty()) {
        const Event e = queue.top();
        queue.pop();
        auto& d = draws[e.source];
        if (d.empty()) {
            d = contact_draws(seed, from_label[e.source], out.individuals[e.source].course.atoms.size(), n);
        }
        const ContactDraw& draw = d[e.atom];
        const std::size_t target = to_label[draw.target];
        auto& rec                = out.individuals[target];
        const bool accepted      = target != e.source && rec.infection_time == never_infected && draw.s <= c(e.time);
        if (options.record_events) {
            out.events.push_back({e.time, e.source, target, accepted});
        }
        if (accepted) {
            rec.infection_time = e.time;
            rec.infector       = static_cast<std::int64_t>(e.source);
            ++infected;
            --susceptible;
            schedule_from(target, 0);
        }
        schedule_from(e.source, e.atom + 1);
    }
    if (infected + susceptible != n) {
        throw Error("simulation lost track of individuals");
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// empirical measures

double AgeCompartmentHistogram::total() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        for (double v : mass[i]) {
            s += v;
        }
        s += overflow[i];
    }
    return s;
}

AgeCompartmentHistogram age_compartment_measure(const SimOutput& out, const CourseModel& model, double t,
                                                double age_step, std::size_t bins)
{
    if (t > out.horizon) {
        throw Error("time beyond simulation horizon");
    }
    if (!(age_step > 0.0) || bins == 0) {
        throw Error("age histogram needs positive step and bin count");
    }
    const std::size_t nc = model.compartments().size();
    AgeCompartmentHistogram h;
    h.age_step = age_step;
    h.bins     = bins;
    h.mass.assign(nc, std::vector<double>(bins, 0.0));
    h.overflow.assign(nc, 0.0);
    const double w = 1.0 / static_cast<double>(out.population);
    for (const auto& r : out.individuals) {
        if (!r.infected_by(t)) {
            continue;
        }
        const double age    = t - r.infection_time;
        const std::size_t i = r.course.compartment_at(age);
        const auto k        = static_cast<std::size_t>(age / age_step);
        if (k < bins) {
            h.mass[i][k] += w;
        }
        else {
            h.overflow[i] += w;
        }
    }
    return h;
}

double compartment_counts(const SimOutput& out, std::size_t compartment, double t)
{
    if (compartment >= out.compartments.size()) {
        throw Error("unknown compartment");
    }
    std::size_t count = 0;
    for (const auto& r : out.individuals) {
        if (r.infected_by(t) && r.course.compartment_at(t - r.infection_time) == compartment) {
            ++count;
        }
    }
    return static_cast<double>(count) / static_cast<double>(out.population);
}

std::vector<std::vector<double>> compartment_fractions(const SimOutput& out, std::size_t compartments,
                                                       const std::vector<double>& times)
{
    std::vector<std::vector<double>> f(compartments, std::vector<double>(times.size(), 0.0));
    const double w = 1.0 / static_cast<double>(out.population);
    for (const auto& r : out.individuals) {
        if (r.infection_time == never_infected) {
            continue;
        }
        for (std::size_t m = 0; m < times.size(); ++m) {
            if (r.infected_by(times[m])) {
                f[r.course.compartment_at(times[m] - r.infection_time)][m] += w;
            }
        }
    }
    return f;
}

AncestralPath ancestral_path(const SimOutput& out, std::size_t x)
{
    if (x >= out.population) {
        throw Error("individual out of range");
    }
    AncestralPath p;
    if (out.individuals[x].infection_time == never_infected) {
        return p;
    }
    std::int64_t cur = static_cast<std::int64_t>(x);
    while (cur != no_infector) {
        const auto& r = out.individuals[static_cast<std::size_t>(cur)];
        p.times.push_back(r.infection_time);
        p.individuals.push_back(static_cast<std::size_t>(cur));
        p.courses.push_back(r.course);
        if (p.times.size() > out.population) {
            throw Error("transmission forest contains a cycle");
        }
        cur = r.infector;
    }
    return p;
}

HistoricalSummary historical_measure(const SimOutput& out, double t)
{
    const std::size_t n = out.population;
    // depth of each individual in the forest, memoized along infector links
    std::vector<std::size_t> depth(n, 0);
    std::vector<std::size_t> stack;
    auto depth_of = [&](std::size_t x) {
        std::size_t cur = x;
        while (depth[cur] == 0) {
            const auto inf = out.individuals[cur].infector;
            if (inf == no_infector) {
                depth[cur] = 1;
                break;
            }
            stack.push_back(cur);
            cur = static_cast<std::size_t>(inf);
        }
        while (!stack.empty()) {
            const std::size_t y = stack.back();
            stack.pop_back();
            depth[y] = depth[static_cast<std::size_t>(out.individuals[y].infector)] + 1;
        }
        return depth[x];
    };

    HistoricalSummary h;
    std::size_t count = 0;
    for (std::size_t x = 0; x < n; ++x) {
        const auto& r = out.individuals[x];
        if (!r.infected_by(t)) {
            continue;
        }
        ++count;
        h.chain_lengths.push_back(depth_of(x));
        std::size_t root = x;
        while (out.individuals[root].infector != no_infector) {
            root = static_cast<std::size_t>(out.individuals[root].infector);
        }
        h.terminal_ages.push_back(out.individuals[root].initial_age);
        if (r.infector != no_infector) {
            h.first_increments.push_back(r.infection_time -
                                         out.individuals[static_cast<std::size_t>(r.infector)].infection_time);
        }
    }
    h.mass = static_cast<double>(count) / static_cast<double>(n);
    return h;
}

std::vector<double> first_increments_in_window(const SimOutput& out, double lo, double hi)
{
    std::vector<double> v;
    for (const auto& r : out.individuals) {
        if (r.infector != no_infector && r.infection_time >= lo && r.infection_time <= hi) {
            v.push_back(r.infection_time - out.individuals[static_cast<std::size_t>(r.infector)].infection_time);
        }
    }
    return v;
}

} // namespace epigen
