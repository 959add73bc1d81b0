#include "epigen/forward_sim.hpp"
#include "epigen/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace epigen;

namespace
{

struct Scenario {
    IntensityKernel tau = IntensityKernel::exponential(1.5, 1.0);
    CourseModel model   = CourseModel::markov_sir(1.5, 1.0);
    InitialCondition ic{0.05, AgeDensity::exponential(0.5), tau};
};

} // namespace

TEST(ForwardSim, SameSeedIsBitIdentical)
{
    Scenario s;
    const auto c = ContactRate::constant(1.0);
    const auto a = simulate(s.model, 400, c, s.ic, 10.0, 7);
    const auto b = simulate(s.model, 400, c, s.ic, 10.0, 7);
    ASSERT_EQ(a.individuals.size(), b.individuals.size());
    for (std::size_t x = 0; x < a.individuals.size(); ++x) {
        EXPECT_EQ(a.individuals[x].infection_time, b.individuals[x].infection_time);
        EXPECT_EQ(a.individuals[x].infector, b.individuals[x].infector);
    }
}

TEST(ForwardSim, DifferentSeedsDiffer)
{
    Scenario s;
    const auto c = ContactRate::constant(1.0);
    const auto a = simulate(s.model, 400, c, s.ic, 10.0, 7);
    const auto b = simulate(s.model, 400, c, s.ic, 10.0, 8);
    std::size_t same = 0;
    for (std::size_t x = 0; x < a.individuals.size(); ++x) {
        same += a.individuals[x].infection_time == b.individuals[x].infection_time;
    }
    EXPECT_LT(same, a.individuals.size());
}

TEST(ForwardSim, RelabelingPermutesOutcomes)
{
    Scenario s;
    const auto c        = ContactRate::constant(1.0);
    const std::size_t n = 300;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Stream rng(99, StreamTag::test, 0);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
    }
    SimOptions opt;
    opt.relabel = perm;
    const auto base  = simulate(s.model, n, c, s.ic, 10.0, 11);
    const auto moved = simulate(s.model, n, c, s.ic, 10.0, 11, opt);
    for (std::size_t y = 0; y < n; ++y) {
        EXPECT_EQ(base.individuals[y].infection_time, moved.individuals[perm[y]].infection_time) << y;
    }
}

TEST(ForwardSim, ZeroContactRateOnlyInitialInfections)
{
    Scenario s;
    const auto out = simulate(s.model, 2000, ContactRate::constant(0.0), s.ic, 10.0, 3);
    for (const auto& r : out.individuals) {
        EXPECT_TRUE(r.initially_infected() || r.infection_time == never_infected);
        EXPECT_EQ(r.infector, no_infector);
    }
    EXPECT_EQ(out.infected_count(10.0), out.infected_count(0.0));
}

TEST(ForwardSim, InfectionsFollowInfectorAtoms)
{
    Scenario s;
    SimOptions opt;
    opt.record_events = true;
    const auto out    = simulate(s.model, 1000, ContactRate::constant(1.0), s.ic, 10.0, 5, opt);
    std::size_t later = 0;
    for (const auto& r : out.individuals) {
        if (r.infection_time <= 0.0 || r.infection_time == never_infected) {
            continue;
        }
        ++later;
        ASSERT_NE(r.infector, no_infector);
        const auto& src = out.individuals[static_cast<std::size_t>(r.infector)];
        EXPECT_LT(src.infection_time, r.infection_time);
        const double age = r.infection_time - src.infection_time;
        const bool hit   = std::any_of(src.course.atoms.begin(), src.course.atoms.end(),
                                       [&](double a) { return std::abs(a - age) < 1e-9; });
        EXPECT_TRUE(hit);
    }
    EXPECT_GT(later, 0u);
}

TEST(ForwardSim, EventsAreTimeOrderedAndWithinHorizon)
{
    Scenario s;
    SimOptions opt;
    opt.record_events = true;
    const auto out    = simulate(s.model, 800, ContactRate::constant(0.7), s.ic, 8.0, 21, opt);
    ASSERT_FALSE(out.events.empty());
    for (std::size_t i = 1; i < out.events.size(); ++i) {
        EXPECT_LE(out.events[i - 1].time, out.events[i].time);
    }
    for (const auto& e : out.events) {
        EXPECT_GT(e.time, 0.0);
        EXPECT_LE(e.time, 8.0);
        if (e.accepted) {
            EXPECT_EQ(out.individuals[e.target].infection_time, e.time);
            EXPECT_EQ(out.individuals[e.target].infector, static_cast<std::int64_t>(e.source));
        }
    }
}

TEST(ForwardSim, ContactDrawsArePrefixStable)
{
    const auto shorter = contact_draws(4, 17, 5, 100);
    const auto longer  = contact_draws(4, 17, 12, 100);
    for (std::size_t j = 0; j < shorter.size(); ++j) {
        EXPECT_EQ(shorter[j].target, longer[j].target);
        EXPECT_EQ(shorter[j].s, longer[j].s);
        EXPECT_LT(longer[j].target, 100u);
        EXPECT_GE(longer[j].s, 0.0);
        EXPECT_LE(longer[j].s, 1.0);
    }
}

TEST(ForwardSim, CompartmentFractionsSumToEverInfected)
{
    Scenario s;
    const auto out = simulate(s.model, 1500, ContactRate::constant(1.0), s.ic, 10.0, 8);
    const std::vector<double> times{0.0, 2.5, 5.0, 10.0};
    const auto f = compartment_fractions(out, s.model.compartments().size(), times);
    for (std::size_t m = 0; m < times.size(); ++m) {
        double total = 0.0;
        for (const auto& row : f) {
            total += row[m];
        }
        EXPECT_NEAR(total, out.infected_fraction(times[m]), 1e-12);
    }
}

TEST(ForwardSim, AncestralPathsEndInInitialInfections)
{
    Scenario s;
    const auto out = simulate(s.model, 1000, ContactRate::constant(1.0), s.ic, 10.0, 9);
    for (std::size_t x = 0; x < out.individuals.size(); ++x) {
        const auto path = ancestral_path(out, x);
        if (out.individuals[x].infection_time == never_infected) {
            EXPECT_TRUE(path.empty());
            continue;
        }
        ASSERT_FALSE(path.empty());
        EXPECT_EQ(path.times.front(), out.individuals[x].infection_time);
        EXPECT_LT(path.times.back(), 0.0 + 1e-300);
        for (std::size_t i = 1; i < path.times.size(); ++i) {
            EXPECT_LT(path.times[i], path.times[i - 1]);
        }
        EXPECT_TRUE(out.individuals[path.individuals.back()].initially_infected());
    }
}

TEST(ForwardSim, HistoricalMeasureMassIsInfectedFraction)
{
    Scenario s;
    const auto out = simulate(s.model, 1000, ContactRate::constant(1.0), s.ic, 10.0, 13);
    const auto h   = historical_measure(out, 6.0);
    EXPECT_NEAR(h.mass, out.infected_fraction(6.0), 1e-12);
    EXPECT_EQ(h.chain_lengths.size(), out.infected_count(6.0));
    for (double d : h.first_increments) {
        EXPECT_GT(d, 0.0);
    }
}

TEST(ForwardSim, AgeMeasureMassMatchesInfected)
{
    Scenario s;
    const auto out  = simulate(s.model, 1000, ContactRate::constant(1.0), s.ic, 10.0, 17);
    const auto hist = age_compartment_measure(out, s.model, 5.0, 0.1, 50);
    EXPECT_NEAR(hist.total(), out.infected_fraction(5.0), 1e-12);
}
