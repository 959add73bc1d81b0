#pragma once

#include "epigen/kernels.hpp"
#include "epigen/random.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace epigen
{

/// Compartment names and the accessibility relation between them, which must be acyclic.
class CompartmentSet
{
public:
    CompartmentSet() = default;
    CompartmentSet(std::vector<std::string> names, std::vector<std::pair<std::size_t, std::size_t>> edges);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }

    /// Throws "unknown compartment" for names not in the set.
    std::size_t index(const std::string& name) const;
    bool has_edge(std::size_t from, std::size_t to) const;
    bool is_absorbing(std::size_t i) const;
    const std::vector<std::size_t>& topological_order() const { return order_; }

private:
    std::vector<std::string> names_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
    std::vector<std::size_t> order_;
};

struct PathSegment {
    double entry_age;
    std::size_t compartment;
};

/// One realization of (infection point process, life-cycle path).
struct DiseaseCourse {
    std::vector<double> atoms;
    std::vector<PathSegment> path;

    std::size_t compartment_at(double age) const;

    /// Age at which the path leaves compartment i for the first time (+inf if never, -1 if never entered).
    double exit_age(std::size_t compartment) const;

    /// Number of atoms in [lo, hi].
    std::size_t count_atoms(double lo, double hi) const;

    bool satisfies_invariants(const CompartmentSet& compartments) const;
};

/// One stage of a continuous-time life-cycle chain.
struct Stage {
    std::string name;
    double infectivity = 0.0;
};

struct Transition {
    std::size_t from;
    std::size_t to;
    double rate;
};

/// Generative model for the i.i.d. pair (infection point process, life-cycle process).
///
/// - poisson: atoms form an inhomogeneous Poisson process with intensity tau, independent of a
///   Markov life-cycle chain (by default a single absorbing compartment "I").
/// - markov: a Markov chain on the stages starting in stage 0; while in stage k the individual
///   makes contacts at Poisson rate infectivity_k. tau(a) = sum_k infectivity_k P(X(a) = k).
/// - custom: a user supplied joint sampler together with its declared tau and compartments.
class CourseModel
{
public:
    enum class Kind { poisson, markov, custom };
    using Sampler = std::function<DiseaseCourse(Stream&, double max_age)>;

    static CourseModel poisson(IntensityKernel tau);
    static CourseModel poisson(IntensityKernel tau, std::vector<Stage> stages, std::vector<Transition> transitions);

    static CourseModel markov(std::vector<Stage> stages, std::vector<Transition> transitions,
                              std::optional<AgeGrid> grid = {});

    /// Stages in sequence, stage k left at rate exit_rates[k] towards k + 1; the last stage is absorbing.
    static CourseModel markov_chain(std::vector<Stage> stages, std::vector<double> exit_rates,
                                    std::optional<AgeGrid> grid = {});

    /// Compartments {I, R}: infectious period Exp(gamma), contacts at rate beta.
    static CourseModel markov_sir(double beta, double gamma, std::optional<AgeGrid> grid = {});

    /// Compartments {E, I, R}: latency Exp(lambda), infectious period Exp(gamma), contacts at rate beta.
    static CourseModel markov_seir(double beta, double lambda, double gamma, std::optional<AgeGrid> grid = {});

    static CourseModel custom(IntensityKernel tau, CompartmentSet compartments, Sampler sampler);

    Kind kind() const { return kind_; }
    const IntensityKernel& tau() const { return *tau_; }
    const CompartmentSet& compartments() const { return compartments_; }
    const std::vector<Stage>& stages() const { return stages_; }
    const std::vector<Transition>& transitions() const { return transitions_; }
    double max_infectivity() const { return max_infectivity_; }

    /// Default truncation age for atoms: the kernel grid's max age.
    double default_max_age() const { return tau_->grid().max_age; }

    DiseaseCourse sample(Stream& rng, double max_age) const;
    DiseaseCourse sample(Stream& rng) const { return sample(rng, default_max_age()); }

    /// P(X(a) = i); throws "marginal unavailable; use empirical" for custom models.
    double marginal_p(double age, std::size_t compartment) const;
    std::vector<double> marginal_all(double age) const;

    /// table[i][k] = P(X(k step) = i), k = 0 .. count-1.
    std::vector<std::vector<double>> marginal_table(double step, std::size_t count) const;

    bool has_exact_palm() const { return kind_ != Kind::custom; }

    /// Exact Palm law at age a where available (poisson and markov), otherwise windowed rejection
    /// with the default window. Throws "Palm undefined at a" when tau(a) = 0.
    DiseaseCourse sample_palm(double age, Stream& rng, double max_age) const;

    /// Windowed rejection: propose courses and accept with probability min(k, 2) / 2, where k
    /// counts atoms in [a - delta/2, a + delta/2]. The accepted course is returned unchanged.
    DiseaseCourse sample_palm_windowed(double age, double delta, Stream& rng, double max_age,
                                       std::size_t* proposals = nullptr) const;

    double default_palm_window() const { return 1e-2 * tau_->mean_generation_time(); }

private:
    CourseModel() = default;
    void build_life_cycle(std::vector<Stage> stages, std::vector<Transition> transitions);
    double sample_path(Stream& rng, std::vector<PathSegment>& path, std::vector<double>* atoms,
                       double max_age) const;

    Kind kind_ = Kind::poisson;
    std::shared_ptr<const IntensityKernel> tau_;
    CompartmentSet compartments_;
    std::vector<Stage> stages_;
    std::vector<Transition> transitions_;
    std::vector<double> exit_total_;
    double max_infectivity_ = 0.0;
    Sampler custom_;
};

DiseaseCourse sample_course(const CourseModel& model, Stream& rng);
double marginal_p(const CourseModel& model, double age, std::size_t compartment);
DiseaseCourse sample_palm_course(const CourseModel& model, double age, Stream& rng);

/// Histogram estimate of the mean intensity E[P(da)]/da on bins [k step, (k+1) step).
struct EmpiricalTau {
    double step = 0.0;
    std::size_t samples = 0;
    std::vector<double> estimate;
    std::vector<double> standard_error;

    double bin_center(std::size_t k) const { return step * (static_cast<double>(k) + 0.5); }
    IntensityKernel as_kernel() const;
};

/// n courses drawn from streams derived from rng's key, so the result depends only on that key.
EmpiricalTau empirical_tau(const CourseModel& model, std::size_t n, AgeGrid bins, const Stream& rng);

} // namespace epigen
