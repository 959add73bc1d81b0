#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace epigen
{

inline constexpr double never_infected = std::numeric_limits<double>::infinity();
inline constexpr std::int64_t no_infector = -1;

struct IndividualRecord {
    /// Z_x, 0 unless initially infected.
    double initial_age = 0.0;
    /// -Z_x for initially infected, the infection time for later infections, +inf otherwise.
    double infection_time = never_infected;
    std::int64_t infector = no_infector;
    DiseaseCourse course;

    bool initially_infected() const { return infection_time < 0.0; }
    bool infected_by(double t) const { return infection_time <= t; }
};

struct ContactEvent {
    double time;
    std::size_t source;
    std::size_t target;
    bool accepted;
};

struct SimOutput {
    std::size_t population = 0;
    double horizon         = 0.0;
    std::uint64_t seed     = 0;
    std::uint64_t config_digest = 0;
    std::vector<IndividualRecord> individuals;
    std::vector<ContactEvent> events;
    std::vector<std::string> compartments;

    std::size_t infected_count(double t) const;
    double infected_fraction(double t) const;
};

struct SimOptions {
    bool record_events = false;
    std::uint64_t config_digest = 0;
    /// Relabeling: individual relabel[y] receives the randomness of individual y, and a contact
    /// drawn towards y is delivered to relabel[y]. Empty means the identity.
    std::vector<std::size_t> relabel;
};

/// Target and acceptance variable attached to one atom of a source's course.
struct ContactDraw {
    std::size_t target;
    double s;
};

/// The draws for atoms 0 .. count-1 of individual x. Atom j always uses the j-th draw.
std::vector<ContactDraw> contact_draws(std::uint64_t seed, std::size_t x, std::size_t count, std::size_t population);

/// Initial state and course of individual x: (initially infected, Z, course). Courses carry atoms up to
/// age Z + horizon so that they do not depend on when the individual gets infected.
IndividualRecord draw_individual(const CourseModel& model, const InitialCondition& ic, double horizon,
                                 std::uint64_t seed, std::size_t x);

/// Event-driven simulation: contacts at sigma_x + a (a an atom of x's course, sigma_x + a in (0, T])
/// are processed in increasing order of (time, source, atom index). A contact targets a uniform
/// individual U and infects it iff U is susceptible and s <= c(t).
SimOutput simulate(const CourseModel& model, std::size_t population, const ContactRate& c, const InitialCondition& ic,
                   double horizon, std::uint64_t seed, const SimOptions& options = {});

struct AgeCompartmentHistogram {
    double age_step = 0.0;
    std::size_t bins = 0;
    /// mass[i][k]: compartment i, ages [k step, (k+1) step); ages beyond the last bin go to overflow[i].
    std::vector<std::vector<double>> mass;
    std::vector<double> overflow;

    double total() const;
};

AgeCompartmentHistogram age_compartment_measure(const SimOutput& out, const CourseModel& model, double t,
                                                double age_step, std::size_t bins);

/// Y_t(i) / N.
double compartment_counts(const SimOutput& out, std::size_t compartment, double t);

/// fractions[i][m] for compartment i at times[m].
std::vector<std::vector<double>> compartment_fractions(const SimOutput& out, std::size_t compartments,
                                                       const std::vector<double>& times);

struct AncestralPath {
    /// R(0) = sigma_x > R(1) > ... > R(n), R(n) < 0
    std::vector<double> times;
    std::vector<std::size_t> individuals;
    std::vector<DiseaseCourse> courses;

    bool empty() const { return times.empty(); }
};

/// Follows infector links from x back to an initially infected individual. Empty if x was never infected.
AncestralPath ancestral_path(const SimOutput& out, std::size_t x);

struct HistoricalSummary {
    double mass = 0.0;
    /// number of entries of each traced path
    std::vector<std::size_t> chain_lengths;
    /// sigma_x - R(1) for individuals infected during the run
    std::vector<double> first_increments;
    /// Z of the initially infected individual at the end of each path
    std::vector<double> terminal_ages;
};

/// Summaries of (1/N) sum_x 1{sigma_x <= t} delta_{ancestral path of x}.
HistoricalSummary historical_measure(const SimOutput& out, double t);

/// First backward increments sigma_x - R(1) of individuals infected in [lo, hi].
std::vector<double> first_increments_in_window(const SimOutput& out, double lo, double hi);

} // namespace epigen
