#pragma once

#include "epigen/courses.hpp"
#include "epigen/kernels.hpp"

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace epigen::app
{

struct ModelConfig {
    /// sir | seir | markov
    std::string type = "sir";
    double beta = 1.5;
    double gamma = 1.0;
    double lambda = 1.0;
    std::vector<Stage> stages;
    std::vector<Transition> transitions;
};

struct ContactConfig {
    /// constant | piecewise_constant | piecewise_linear
    std::string type = "constant";
    double value = 1.0;
    std::vector<double> breakpoints;
    std::vector<double> times;
    std::vector<double> values;
};

struct AgeDensityConfig {
    /// exponential | equilibrium | tabulated
    std::string type = "exponential";
    double rate = 0.5;
    double step = 0.01;
    std::vector<double> values;
};

struct ScenarioConfig {
    ModelConfig model;
    ContactConfig contact;
    double i0 = 0.01;
    AgeDensityConfig g;
    std::size_t population = 50000;
    double horizon = 25.0;
    double dt = 1e-3;
    double da = 0.01;
    /// spacing of the rows written by solve and simulate
    double report_dt = 0.1;
    /// 0 selects 40 mean generation times
    double max_age = 0.0;
    std::uint64_t seed = 1;
    std::string output = "out";
    std::size_t replicas = 20;
    std::size_t samples = 100000;

    CourseModel build_model() const;
    ContactRate build_contact() const;
    InitialCondition build_initial(const IntensityKernel& tau) const;

    bool operator==(const ScenarioConfig& o) const;
};

/// Thrown when a configuration fails validation; what() lists every problem, one per line.
class ConfigError : public std::runtime_error
{
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Strict parse: unknown keys are rejected and all errors are collected before throwing.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
nlohmann::json emit_config(const ScenarioConfig& c);

/// Applies a dotted-key override such as "contact.value=0.5" to a JSON document. The value is
/// read as JSON when possible, else as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// FNV-1a 64 of the canonical (key-sorted, compact) JSON form without the output directory, as 16 hex digits.
std::string config_digest(const ScenarioConfig& c);

} // namespace epigen::app
