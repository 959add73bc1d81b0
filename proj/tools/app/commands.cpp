#include "commands.hpp"

#include "config.hpp"
#include "csv.hpp"
#include "validation.hpp"

#include "epigen/analysis.hpp"
#include "epigen/error.hpp"
#include "epigen/backward_chain.hpp"
#include "epigen/forward_sim.hpp"
#include "epigen/limit_solver.hpp"
#include "epigen/poisson_tree.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

namespace epigen::app
{

namespace
{

namespace fs = std::filesystem;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> replicas;
    std::optional<std::size_t> samples;
    std::optional<double> horizon;
    std::vector<std::string> sets;
};

ScenarioConfig resolve_config(const CommonFlags& f)
{
    nlohmann::json j = nlohmann::json::object();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) {
            throw ConfigError({"cannot open config file: " + f.config});
        }
        j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) {
            throw ConfigError({"config is not valid JSON: " + f.config});
        }
    }
    for (const auto& s : f.sets) {
        apply_override(j, s);
    }
    if (f.seed) {
        j["seed"] = *f.seed;
    }
    if (f.out) {
        j["output"] = *f.out;
    }
    if (f.replicas) {
        j["replicas"] = *f.replicas;
    }
    if (f.samples) {
        j["samples"] = *f.samples;
    }
    if (f.horizon) {
        j["horizon"] = *f.horizon;
    }
    return parse_config(j);
}

std::string output_file(const ScenarioConfig& c, const std::string& name)
{
    fs::create_directories(c.output);
    return (fs::path(c.output) / name).string();
}

/// Report times k * report_dt up to the horizon, snapped to the solver grid.
std::vector<double> report_times(const ScenarioConfig& c, double horizon)
{
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::floor(horizon / c.report_dt + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) {
        t.push_back(std::min(horizon, c.report_dt * static_cast<double>(k)));
    }
    return t;
}

struct Built {
    CourseModel model;
    ContactRate contact;
    InitialCondition initial;
};

Built build(const ScenarioConfig& c)
{
    CourseModel model = c.build_model();
    ContactRate contact = c.build_contact();
    InitialCondition initial = c.build_initial(model.tau());
    return {std::move(model), std::move(contact), std::move(initial)};
}

LimitSolution solve(const ScenarioConfig& c, const Built& b)
{
    return solve_delay(b.model.tau(), b.contact, b.initial, c.horizon, c.dt);
}

int cmd_solve(const ScenarioConfig& c, std::ostream& out)
{
    const auto b      = build(c);
    const auto sol    = solve(c, b);
    const auto digest = config_digest(c);
    const auto times  = report_times(c, c.horizon);
    std::vector<std::vector<double>> rows;
    for (double t : times) {
        const auto k = static_cast<std::size_t>(std::llround(t / sol.step()));
        rows.push_back({sol.time(k), sol.b[k], sol.B[k], sol.S[k]});
    }
    write_csv(output_file(c, "solve.csv"), digest, {"t", "b", "B", "S"}, rows);

    std::vector<std::string> header{"t"};
    for (const auto& n : b.model.compartments().names()) {
        header.push_back(n);
    }
    const auto curves = compartment_curves(sol, b.model, times);
    std::vector<std::vector<double>> crow;
    for (std::size_t m = 0; m < times.size(); ++m) {
        std::vector<double> row{times[m]};
        for (const auto& curve : curves) {
            row.push_back(curve[m]);
        }
        crow.push_back(row);
    }
    write_csv(output_file(c, "compartments.csv"), digest, header, crow);
    out << "solve: B(T) + I0 = " << format_double(sol.B.back() + c.i0) << ", delay residual "
        << format_double(sol.delay_residual()) << "\nwrote " << output_file(c, "solve.csv") << " and "
        << output_file(c, "compartments.csv") << "\n";
    return 0;
}

int cmd_simulate(const ScenarioConfig& c, std::ostream& out)
{
    const auto b      = build(c);
    const auto digest = config_digest(c);
    const auto times  = report_times(c, c.horizon);
    const auto nc     = b.model.compartments().size();
    std::vector<std::string> header{"t", "infected"};
    for (const auto& n : b.model.compartments().names()) {
        header.push_back(n);
    }
    for (std::size_t r = 0; r < c.replicas; ++r) {
        SimOptions opt;
        opt.config_digest = std::stoull(digest, nullptr, 16);
        const auto sim    = simulate(b.model, c.population, b.contact, b.initial, c.horizon, replica_seed(c.seed, r), opt);
        const auto frac   = compartment_fractions(sim, nc, times);
        std::vector<std::vector<double>> rows;
        for (std::size_t m = 0; m < times.size(); ++m) {
            std::vector<double> row{times[m], sim.infected_fraction(times[m])};
            for (std::size_t i = 0; i < nc; ++i) {
                row.push_back(frac[i][m]);
            }
            rows.push_back(row);
        }
        const std::string name = "simulate_" + std::to_string(r) + ".csv";
        write_csv(output_file(c, name), digest, header, rows);
        std::vector<std::vector<double>> ind;
        for (std::size_t x = 0; x < sim.individuals.size(); ++x) {
            const auto& rec = sim.individuals[x];
            ind.push_back({static_cast<double>(x), rec.infection_time, static_cast<double>(rec.infector),
                           rec.initial_age});
        }
        write_csv(output_file(c, "individuals_" + std::to_string(r) + ".csv"), digest,
                  {"individual", "infection_time", "infector", "initial_age"}, ind);
        out << "replica " << r << ": infected fraction at T = " << format_double(sim.infected_fraction(c.horizon))
            << "\n";
    }
    out << "wrote " << c.replicas << " replicas to " << c.output << "\n";
    return 0;
}

int cmd_tree(const ScenarioConfig& c, double tree_horizon, std::ostream& out)
{
    const auto b      = build(c);
    const auto sol    = solve(c, b);
    const double th   = std::min(tree_horizon, c.horizon);
    const auto times  = report_times(c, th);
    TreeParams p(b.model.tau(), b.contact, b.initial, th);
    const auto est    = estimate_B(p, times, c.samples, c.seed);
    std::vector<std::vector<double>> rows;
    for (std::size_t m = 0; m < times.size(); ++m) {
        rows.push_back({times[m], est.estimate[m], est.standard_error[m], sol.B_at(times[m])});
    }
    write_csv(output_file(c, "tree.csv"), config_digest(c), {"t", "B_tree", "se", "B_solver"}, rows);
    out << "tree: " << c.samples << " samples, horizon " << format_double(th) << "\nwrote "
        << output_file(c, "tree.csv") << "\n";
    return 0;
}

int cmd_chain(const ScenarioConfig& c, const std::string& kind, double t, std::size_t k_max, std::ostream& out)
{
    const auto b      = build(c);
    const auto sol    = solve(c, b);
    const auto m      = BackwardModel::from_solution(sol);
    const auto digest = config_digest(c);
    if (kind == "renewal" || kind == "hchain") {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < c.samples; ++i) {
            Stream rng(c.seed, StreamTag::chain, i);
            std::vector<double> times;
            double killed = 0.0;
            if (kind == "renewal") {
                const auto ch = sample_killed_renewal(t, m, rng);
                times         = ch.times;
                killed        = ch.survived() ? 0.0 : 1.0;
            }
            else {
                times = sample_h_chain(t, m, rng).times;
            }
            for (std::size_t k = 0; k < times.size(); ++k) {
                rows.push_back({static_cast<double>(i), static_cast<double>(k), times[k], killed});
            }
        }
        write_csv(output_file(c, "chain_" + kind + ".csv"), digest, {"sample", "index", "time", "killed"}, rows);
        out << "wrote " << output_file(c, "chain_" + kind + ".csv") << "\n";
        return 0;
    }
    if (kind == "martingale") {
        const auto rep = martingale_diagnostic(t, m, c.samples, k_max, c.seed);
        std::vector<std::vector<double>> rows;
        for (std::size_t k = 0; k < rep.mean.size(); ++k) {
            rows.push_back({static_cast<double>(k), rep.mean[k], rep.standard_error[k], rep.reference});
        }
        write_csv(output_file(c, "martingale.csv"), digest, {"k", "mean", "se", "reference"}, rows);
        out << "wrote " << output_file(c, "martingale.csv") << "\n";
        return 0;
    }
    if (kind == "survival") {
        const auto s = survival_representation_check(t, m, c.samples, c.seed);
        write_csv(output_file(c, "survival.csv"), digest,
                  {"t", "b", "survival", "survival_se", "scaled", "scaled_se", "literal", "literal_se"},
                  {{s.t, s.b, s.survival, s.survival_se, s.scaled, s.scaled_se, s.literal, s.literal_se}});
        out << "b(t) = " << format_double(s.b) << ", I0 alpha e^{alpha t} P = " << format_double(s.scaled)
            << " +- " << format_double(s.scaled_se) << ", without I0: " << format_double(s.literal) << "\nwrote "
            << output_file(c, "survival.csv") << "\n";
        return 0;
    }
    throw epigen::Error("unknown chain kind: " + kind + " (renewal|hchain|martingale|survival)");
}

int cmd_courses_dump(const ScenarioConfig& c, std::size_t n, std::ostream& out)
{
    const auto model = c.build_model();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) {
        Stream rng(c.seed, StreamTag::course, i);
        const auto course = model.sample(rng);
        for (const auto& seg : course.path) {
            rows.push_back({static_cast<double>(i), 1.0, seg.entry_age, static_cast<double>(seg.compartment)});
        }
        for (double a : course.atoms) {
            rows.push_back({static_cast<double>(i), 0.0, a, -1.0});
        }
    }
    write_csv(output_file(c, "courses.csv"), config_digest(c), {"course", "is_segment", "age", "compartment"}, rows);
    out << "compartments:";
    for (const auto& name : model.compartments().names()) {
        out << " " << name;
    }
    out << "\nwrote " << output_file(c, "courses.csv") << "\n";
    return 0;
}

int cmd_validate(const ScenarioConfig& c, bool seed_given, const std::vector<int>& only, std::ostream& out)
{
    ValidationOptions opt;
    if (seed_given) {
        opt.seed = c.seed;
    }
    opt.only         = only;
    opt.progress     = &out;
    const auto res   = run_validation(opt);
    nlohmann::json j = {{"config_digest", config_digest(c)}, {"seed", opt.seed}, {"criteria", validation_json(res)}};
    std::ofstream f(output_file(c, "validation.json"));
    f << j.dump(2) << "\n";
    out << "\n";
    print_validation_table(out, res);
    out << "wrote " << output_file(c, "validation.json") << "\n";
    return std::all_of(res.begin(), res.end(), [](const auto& r) { return r.pass; }) ? 0 : 1;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"epigen: age-of-infection epidemic models, simulators and samplers"};
    app.require_subcommand(1);
    CommonFlags f;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::size_t replicas = 0, samples = 0;
    double horizon       = 0.0;
    app.add_option("--config", f.config, "scenario JSON file")->check(CLI::ExistingFile);
    auto* seed_opt     = app.add_option("--seed", seed, "master seed");
    auto* out_opt      = app.add_option("--out", out_dir, "output directory");
    auto* replicas_opt = app.add_option("--replicas", replicas, "simulation replicas");
    auto* samples_opt  = app.add_option("--samples", samples, "Monte Carlo samples");
    auto* horizon_opt  = app.add_option("--horizon", horizon, "time horizon T");
    app.add_option("--set", f.sets, "override a config key, e.g. --set contact.value=0.5");

    auto* solve_cmd    = app.add_subcommand("solve", "solve the delay equation; writes solve.csv, compartments.csv");
    auto* sim_cmd      = app.add_subcommand("simulate", "run the finite-population simulator");
    auto* tree_cmd     = app.add_subcommand("tree", "estimate B from the Poisson tree; writes tree.csv");
    double tree_horizon = 10.0;
    tree_cmd->add_option("--tree-horizon", tree_horizon, "tree censoring horizon (capped at T)");
    auto* chain_cmd    = app.add_subcommand("chain", "backward chains: renewal|hchain|martingale|survival");
    std::string chain_kind;
    double chain_t       = 5.0;
    std::size_t k_max    = 10;
    chain_cmd->add_option("kind", chain_kind, "renewal|hchain|martingale|survival")->required();
    chain_cmd->add_option("--t", chain_t, "start time of the chains");
    chain_cmd->add_option("--kmax", k_max, "largest k of the martingale report");
    auto* val_cmd      = app.add_subcommand("validate", "run the acceptance suite; writes validation.json");
    std::vector<int> only;
    val_cmd->add_option("--criteria", only, "subset of criteria to run")->check(CLI::Range(1, criterion_count));
    auto* dump_cmd     = app.add_subcommand("courses-dump", "sample disease courses; writes courses.csv");
    auto* courses_cmd  = app.add_subcommand("courses", "disease course utilities");
    auto* courses_dump = courses_cmd->add_subcommand("dump", "same as courses-dump");
    courses_cmd->require_subcommand(1);
    std::size_t dump_n = 10;
    dump_cmd->add_option("--count", dump_n, "number of courses");
    courses_dump->add_option("--count", dump_n, "number of courses");
    for (auto* sub : {solve_cmd, sim_cmd, tree_cmd, chain_cmd, val_cmd, dump_cmd, courses_cmd}) {
        sub->fallthrough();
    }
    courses_dump->fallthrough();

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    if (*seed_opt) {
        f.seed = seed;
    }
    if (*out_opt) {
        f.out = out_dir;
    }
    if (*replicas_opt) {
        f.replicas = replicas;
    }
    if (*samples_opt) {
        f.samples = samples;
    }
    if (*horizon_opt) {
        f.horizon = horizon;
    }

    try {
        const ScenarioConfig c = resolve_config(f);
        if (*solve_cmd) {
            return cmd_solve(c, out);
        }
        if (*sim_cmd) {
            return cmd_simulate(c, out);
        }
        if (*tree_cmd) {
            return cmd_tree(c, tree_horizon, out);
        }
        if (*chain_cmd) {
            return cmd_chain(c, chain_kind, chain_t, k_max, out);
        }
        if (*val_cmd) {
            return cmd_validate(c, f.seed.has_value(), only, out);
        }
        if (*dump_cmd || *courses_dump) {
            return cmd_courses_dump(c, dump_n, out);
        }
    }
    catch (const ConfigError& e) {
        err << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace epigen::app
