#include "config.hpp"

#include "epigen/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace epigen::app
{

using nlohmann::json;

namespace
{

std::string join_lines(const std::vector<std::string>& v)
{
    std::string s = "invalid configuration:";
    for (const auto& p : v) {
        s += "\n  " + p;
    }
    return s;
}

/// Reads fields of one JSON object, recording type errors and unknown keys.
class Reader
{
public:
    Reader(const json& j, std::string prefix, std::vector<std::string>& errors)
        : j_{j}
        , prefix_{std::move(prefix)}
        , errors_{errors}
    {
        if (!j_.is_object()) {
            errors_.push_back(where("") + "expected an object");
            ok_ = false;
        }
    }

    ~Reader()
    {
        if (!ok_) {
            return;
        }
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                errors_.push_back("unknown key: " + prefix_ + key);
            }
        }
    }

    Reader(const Reader&)            = delete;
    Reader& operator=(const Reader&) = delete;

    const json* find(const std::string& key)
    {
        seen_.insert(key);
        if (!ok_ || !j_.contains(key)) {
            return nullptr;
        }
        return &j_.at(key);
    }

    void number(const std::string& key, double& out)
    {
        if (const json* v = find(key)) {
            if (v->is_number()) {
                out = v->get<double>();
            }
            else {
                errors_.push_back(where(key) + "expected a number");
            }
        }
    }

    void count(const std::string& key, std::size_t& out)
    {
        if (const json* v = find(key)) {
            if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
                out = v->get<std::size_t>();
            }
            else {
                errors_.push_back(where(key) + "expected a nonnegative integer");
            }
        }
    }

    void seed(const std::string& key, std::uint64_t& out)
    {
        std::size_t v = out;
        count(key, v);
        out = v;
    }

    void text(const std::string& key, std::string& out)
    {
        if (const json* v = find(key)) {
            if (v->is_string()) {
                out = v->get<std::string>();
            }
            else {
                errors_.push_back(where(key) + "expected a string");
            }
        }
    }

    void numbers(const std::string& key, std::vector<double>& out)
    {
        if (const json* v = find(key)) {
            bool good = v->is_array();
            if (good) {
                for (const auto& e : *v) {
                    good = good && e.is_number();
                }
            }
            if (good) {
                out = v->get<std::vector<double>>();
            }
            else {
                errors_.push_back(where(key) + "expected an array of numbers");
            }
        }
    }

    std::string where(const std::string& key) const { return prefix_ + key + ": "; }
    const std::string& prefix() const { return prefix_; }

private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
    bool ok_ = true;
};

void read_model(const json& j, ModelConfig& m, std::vector<std::string>& errors)
{
    Reader r(j, "model.", errors);
    r.text("type", m.type);
    r.number("beta", m.beta);
    r.number("gamma", m.gamma);
    r.number("lambda", m.lambda);
    if (const json* st = r.find("stages")) {
        if (!st->is_array()) {
            errors.push_back("model.stages: expected an array");
        }
        else {
            m.stages.clear();
            for (std::size_t i = 0; i < st->size(); ++i) {
                Stage s;
                Reader e((*st)[i], "model.stages[" + std::to_string(i) + "].", errors);
                e.text("name", s.name);
                e.number("infectivity", s.infectivity);
                m.stages.push_back(s);
            }
        }
    }
    if (const json* tr = r.find("transitions")) {
        if (!tr->is_array()) {
            errors.push_back("model.transitions: expected an array");
        }
        else {
            m.transitions.clear();
            for (std::size_t i = 0; i < tr->size(); ++i) {
                Transition t{0, 0, 0.0};
                Reader e((*tr)[i], "model.transitions[" + std::to_string(i) + "].", errors);
                e.count("from", t.from);
                e.count("to", t.to);
                e.number("rate", t.rate);
                m.transitions.push_back(t);
            }
        }
    }
}

void read_contact(const json& j, ContactConfig& c, std::vector<std::string>& errors)
{
    Reader r(j, "contact.", errors);
    r.text("type", c.type);
    r.number("value", c.value);
    r.numbers("breakpoints", c.breakpoints);
    r.numbers("times", c.times);
    r.numbers("values", c.values);
}

void read_g(const json& j, AgeDensityConfig& g, std::vector<std::string>& errors)
{
    Reader r(j, "g.", errors);
    r.text("type", g.type);
    r.number("rate", g.rate);
    r.number("step", g.step);
    r.numbers("values", g.values);
}

std::optional<AgeGrid> grid_for(const ScenarioConfig& c, double mean_generation_time)
{
    AgeGrid g = default_age_grid(mean_generation_time, c.da);
    if (c.max_age > 0.0) {
        g.max_age = c.max_age;
    }
    return g;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems))
    , problems_{std::move(problems)}
{
}

CourseModel ScenarioConfig::build_model() const
{
    if (model.type == "sir") {
        return CourseModel::markov_sir(model.beta, model.gamma, grid_for(*this, 1.0 / model.gamma));
    }
    if (model.type == "seir") {
        return CourseModel::markov_seir(model.beta, model.lambda, model.gamma,
                                        grid_for(*this, 1.0 / model.lambda + 1.0 / model.gamma));
    }
    if (model.type == "markov") {
        // mean generation time is not known before the kernel exists; use the slowest exit rate
        double slowest = 0.0;
        for (const auto& t : model.transitions) {
            slowest = std::max(slowest, t.rate > 0.0 ? 1.0 / t.rate : 0.0);
        }
        const double scale = std::max(1.0, slowest * static_cast<double>(std::max<std::size_t>(1, model.stages.size())));
        return CourseModel::markov(model.stages, model.transitions, grid_for(*this, scale));
    }
    throw Error("unknown model type: " + model.type);
}

ContactRate ScenarioConfig::build_contact() const
{
    if (contact.type == "constant") {
        return ContactRate::constant(contact.value);
    }
    if (contact.type == "piecewise_constant") {
        return ContactRate::piecewise_constant(contact.breakpoints, contact.values);
    }
    if (contact.type == "piecewise_linear") {
        return ContactRate::piecewise_linear(contact.times, contact.values);
    }
    throw Error("unknown contact type: " + contact.type);
}

InitialCondition ScenarioConfig::build_initial(const IntensityKernel& tau) const
{
    if (g.type == "exponential") {
        return InitialCondition(i0, AgeDensity::exponential(g.rate), tau);
    }
    if (g.type == "equilibrium") {
        return InitialCondition(i0, AgeDensity::exponential(malthusian_parameter(tau).alpha), tau);
    }
    if (g.type == "tabulated") {
        return InitialCondition(i0, AgeDensity::tabulated(g.step, g.values), tau);
    }
    throw Error("unknown g type: " + g.type);
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const
{
    return emit_config(*this) == emit_config(o);
}

ScenarioConfig parse_config(const json& j)
{
    ScenarioConfig c;
    std::vector<std::string> errors;
    {
        Reader r(j, "", errors);
        if (const json* v = r.find("model")) {
            read_model(*v, c.model, errors);
        }
        if (const json* v = r.find("contact")) {
            read_contact(*v, c.contact, errors);
        }
        if (const json* v = r.find("g")) {
            read_g(*v, c.g, errors);
        }
        r.number("i0", c.i0);
        r.count("population", c.population);
        r.number("horizon", c.horizon);
        r.number("dt", c.dt);
        r.number("da", c.da);
        r.number("report_dt", c.report_dt);
        r.number("max_age", c.max_age);
        r.seed("seed", c.seed);
        r.text("output", c.output);
        r.count("replicas", c.replicas);
        r.count("samples", c.samples);
    }

    // module preconditions, each checked independently so that all problems are reported
    if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) {
        errors.push_back("horizon: must be positive and finite");
    }
    if (!(c.dt > 0.0)) {
        errors.push_back("dt: must be positive");
    }
    if (!(c.report_dt > 0.0)) {
        errors.push_back("report_dt: must be positive");
    }
    if (!(c.da > 0.0)) {
        errors.push_back("da: must be positive");
    }
    if (c.max_age < 0.0) {
        errors.push_back("max_age: must be nonnegative");
    }
    if (c.population == 0) {
        errors.push_back("population: must be positive");
    }
    if (!(c.i0 > 0.0 && c.i0 < 1.0)) {
        errors.push_back("I0 in (0,1) required");
    }
    try {
        (void)c.build_contact();
    }
    catch (const Error& e) {
        errors.push_back(e.what());
    }
    std::optional<CourseModel> model;
    if (c.da > 0.0) {
        try {
            model = c.build_model();
        }
        catch (const Error& e) {
            errors.push_back(e.what());
        }
    }
    if (model && c.i0 > 0.0 && c.i0 < 1.0) {
        try {
            (void)c.build_initial(model->tau());
        }
        catch (const Error& e) {
            errors.push_back(e.what());
        }
    }
    if (!errors.empty()) {
        throw ConfigError(std::move(errors));
    }
    return c;
}

ScenarioConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError({"cannot open config file: " + path});
    }
    json j;
    try {
        j = json::parse(in);
    }
    catch (const json::parse_error& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    return parse_config(j);
}

json emit_config(const ScenarioConfig& c)
{
    json j;
    json m       = {{"type", c.model.type}, {"beta", c.model.beta}, {"gamma", c.model.gamma}, {"lambda", c.model.lambda}};
    json stages  = json::array();
    json trans   = json::array();
    for (const auto& s : c.model.stages) {
        stages.push_back({{"name", s.name}, {"infectivity", s.infectivity}});
    }
    for (const auto& t : c.model.transitions) {
        trans.push_back({{"from", t.from}, {"to", t.to}, {"rate", t.rate}});
    }
    m["stages"]      = stages;
    m["transitions"] = trans;
    j["model"]       = m;
    j["contact"]     = {{"type", c.contact.type},
                        {"value", c.contact.value},
                        {"breakpoints", c.contact.breakpoints},
                        {"times", c.contact.times},
                        {"values", c.contact.values}};
    j["g"]           = {{"type", c.g.type}, {"rate", c.g.rate}, {"step", c.g.step}, {"values", c.g.values}};
    j["i0"]          = c.i0;
    j["population"]  = c.population;
    j["horizon"]     = c.horizon;
    j["dt"]          = c.dt;
    j["da"]          = c.da;
    j["report_dt"]   = c.report_dt;
    j["max_age"]     = c.max_age;
    j["seed"]        = c.seed;
    j["output"]      = c.output;
    j["replicas"]    = c.replicas;
    j["samples"]     = c.samples;
    return j;
}

void apply_override(json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError({"override must look like key=value: " + assignment});
    }
    const std::string path  = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json* node              = &j;
    std::size_t start       = 0;
    for (;;) {
        const auto dot        = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw ConfigError({"override has an empty key segment: " + path});
        }
        if (!node->is_object()) {
            *node = json::object();
        }
        node = &(*node)[key];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    *node = json::parse(value, nullptr, false);
    if (node->is_discarded()) {
        *node = value;
    }
}

std::string config_digest(const ScenarioConfig& c)
{
    // nlohmann::json keeps object keys sorted, so dump() is canonical; where results are written
    // does not change them, so the output directory is left out
    json j = emit_config(c);
    j.erase("output");
    const std::string text = j.dump();
    std::uint64_t h        = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace epigen::app
