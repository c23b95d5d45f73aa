#pragma once

// Command dispatch for the gsq tool: solve | evaluate | simulate | brute-force | suite.

#include "gsq/cli/config.hpp"
#include "gsq/cli/experiments.hpp"
#include "gsq/cli/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace gsq::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_unexpected = 1,
    exit_config = 2,
    exit_nonconvergence = 3,
    exit_instability = 4,
    exit_solver = 5,
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iterations;
    std::optional<double> tolerance;
    std::optional<int> truncation;
    bool heuristic_cmu = false;
    std::string suite;
    bool parallel = true;
};

inline void apply(RunConfig& cfg, const Overrides& o) {
    if (o.max_iterations) cfg.max_iterations = *o.max_iterations;
    if (o.tolerance) cfg.tolerance = *o.tolerance;
    if (o.truncation) cfg.truncation = *o.truncation;
    if (o.seed) {
        if (!cfg.simulation) cfg.simulation = SimConfig{};
        cfg.simulation->seed = *o.seed;
    }
    if (!o.suite.empty()) cfg.suite = o.suite;
}

inline const QueueModel& require_model(const RunConfig& cfg) {
    if (!cfg.model) throw ConfigError({"lambda: this command needs a model (lambda, groups)"});
    return *cfg.model;
}

// Runs one command and returns the report and tables (nothing is written).
inline Artifacts run(const std::string& command, const RunConfig& cfg, const Overrides& o = {}) {
    const auto opt = cfg.optimize_options();
    Artifacts a;
    if (command == "solve") {
        const auto& model = require_model(cfg);
        const auto s = solve(model, cfg.method, o.heuristic_cmu, opt);
        a.results = solve_json(model, s);
        add_solve_tables(a, "", model, s);
    } else if (command == "evaluate") {
        const auto& model = require_model(cfg);
        const Policy policy = policy_from_config(cfg);
        const auto r = evaluate(model, policy, cfg.eval_options());
        a.results = evaluation_json(model, policy, r, "exact-ctmc");
        if (cfg.thresholds) a.results["thresholds"] = *cfg.thresholds;
        const int last = std::min(policy.frontier() + table_margin, r.truncation);
        a.csv["policy.csv"] = policy_csv(policy, model.group_count(), last);
        a.csv["curves.csv"] = curves_csv(r, last);
    } else if (command == "simulate") {
        const auto& model = require_model(cfg);
        const SimConfig sim = cfg.simulation.value_or(SimConfig{});
        Policy policy;
        std::string source = "config";
        if (cfg.thresholds || cfg.table) {
            policy = policy_from_config(cfg);
        } else {
            policy = solve(model, cfg.method, o.heuristic_cmu, opt).policy;
            source = "optimized";
        }
        const auto r = evaluate(model, policy, cfg.eval_options());
        const auto est = simulate(model, policy, sim);
        a.results = {{"policy_source", source},
                     {"analytic", evaluation_json(model, policy, r, "exact-ctmc")},
                     {"simulation", simulation_json(est, sim)},
                     {"covered", est.covers(r.eta)}};
        const int last = std::min(policy.frontier() + table_margin, r.truncation);
        a.csv["policy.csv"] = policy_csv(policy, model.group_count(), last);
    } else if (command == "brute-force") {
        const auto& model = require_model(cfg);
        const auto bf = brute_force_thresholds(model, cfg.theta_bound, cfg.eval_options());
        const Policy policy = threshold_to_policy(model, bf.best);
        const auto r = evaluate(model, policy, cfg.eval_options());
        a.results = evaluation_json(model, policy, r, "brute-force");
        a.results["thresholds"] = bf.best.by_group();
        a.results["theta_bound"] = cfg.theta_bound;
        a.results["evaluated"] = bf.evaluated;
        const int last = std::min(policy.frontier() + table_margin, r.truncation);
        a.csv["policy.csv"] = policy_csv(policy, model.group_count(), last);
        a.csv["curves.csv"] = curves_csv(r, last);
    } else if (command == "suite") {
        if (cfg.suite.empty()) throw ConfigError({"suite: name a suite (ex1..ex6)"});
        a = run_suite(cfg.suite, opt, o.parallel, cfg.theta_bound);
    } else {
        throw ConfigError({"unknown command \"" + command + "\""});
    }
    return a;
}

inline json make_report(const std::string& command, const RunConfig& cfg, const Artifacts& a) {
    const std::uint64_t seed = cfg.simulation ? cfg.simulation->seed : SimConfig{}.seed;
    json report = provenance(seed);
    report["command"] = command;
    report["config"] = config_to_json(cfg);
    report["results"] = a.results;
    return report;
}

inline void write_outputs(const std::filesystem::path& dir, const std::string& format, const json& report,
                          const Artifacts& a) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text;
    };
    if (format == "json" || format == "both") write("report.json", report.dump(2) + "\n");
    if (format == "csv" || format == "both") {
        for (const auto& [name, text] : a.csv) write(name, text);
    }
}

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return exit_config;
    if (dynamic_cast<const NonConvergenceError*>(&e)) return exit_nonconvergence;
    if (dynamic_cast<const StabilityError*>(&e)) return exit_instability;
    if (dynamic_cast<const Error*>(&e)) return exit_solver;
    return exit_unexpected;
}

inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Optimal on/off scheduling of heterogeneous server groups"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version));

    std::string config_path, out_dir = ".", format = "json";
    Overrides o;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_iters, truncation;
    std::optional<double> tol;
    bool sequential = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "JSON run configuration");
        if (config_required) c->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--format", format, "json, csv or both")
            ->check(CLI::IsMember({"json", "csv", "both"}))
            ->capture_default_str();
        sub->add_option("--seed", seed, "simulation seed");
        sub->add_option("--max-iters", max_iters, "policy-iteration cap")->check(CLI::PositiveNumber);
        sub->add_option("--tol", tol, "relative tolerance on eta between truncation levels")
            ->check(CLI::PositiveNumber);
        sub->add_option("--truncation", truncation, "fixed truncation level (0 = adaptive)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--heuristic-cmu", o.heuristic_cmu, "use the c/mu-rule algorithm without scale economies");
    };

    auto* solve_cmd = app.add_subcommand("solve", "optimize the scheduling policy");
    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a given policy exactly");
    auto* sim_cmd = app.add_subcommand("simulate", "estimate the average cost by simulation");
    auto* bf_cmd = app.add_subcommand("brute-force", "enumerate threshold policies");
    auto* suite_cmd = app.add_subcommand("suite", "reproduce a worked example (ex1..ex6)");
    for (auto* s : {solve_cmd, eval_cmd, sim_cmd, bf_cmd}) add_common(s, true);
    add_common(suite_cmd, false);
    suite_cmd->add_option("name", o.suite, "suite name")->check(CLI::IsMember({"ex1", "ex2", "ex3", "ex4", "ex5", "ex6"}));
    suite_cmd->add_flag("--sequential", sequential, "evaluate sweep points one at a time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    o.seed = seed;
    o.max_iterations = max_iters;
    o.tolerance = tol;
    o.truncation = truncation;
    o.parallel = !sequential;
    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        apply(cfg, o);
        const Artifacts a = run(command, cfg, o);
        const json report = make_report(command, cfg, a);
        write_outputs(out_dir, format, report, a);
        out << report.at("results").dump(2) << '\n';
        return exit_ok;
    } catch (const NonConvergenceError& e) {
        err << "gsq: " << e.what() << " after " << e.trace().iteration_count() << " iterations\n";
        return exit_nonconvergence;
    } catch (const std::exception& e) {
        err << "gsq: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace gsq::cli
