#pragma once

// Solver dispatch shared by the CLI commands, and the reproduction suites
// ex1..ex6 for the six worked examples.

#include "gsq/cli/config.hpp"
#include "gsq/cli/report.hpp"
#include "gsq/optimize.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gsq::cli {

using nlohmann::json;

// Results plus named CSV tables.
struct Artifacts {
    json results = json::object();
    std::map<std::string, std::string> csv;
};

struct SolveOutcome {
    std::string method;  // algorithm1 | algorithm2
    Policy policy;
    SolveReport report;
    OptimizationTrace trace;
    std::optional<ThresholdPolicy> thresholds;
    ScaleEconomies economies;
    bool heuristic = false;
};

// auto picks algorithm2 when scale economies hold (or when forced), else algorithm1.
inline SolveOutcome solve(const QueueModel& model, const std::string& method, bool force_cmu,
                          const OptimizeOptions& opt) {
    SolveOutcome out;
    out.economies = check_scale_economies(model);
    const bool use2 = method == "algorithm2" || (method == "auto" && (out.economies.holds || force_cmu));
    if (use2) {
        auto r = algorithm2(model, opt);
        out.method = "algorithm2";
        out.policy = std::move(r.policy);
        out.report = std::move(r.report);
        out.trace = std::move(r.trace);
        out.thresholds = std::move(r.thresholds);
        out.heuristic = r.heuristic;
    } else {
        auto r = algorithm1(model, opt);
        out.method = "algorithm1";
        out.policy = std::move(r.policy);
        out.report = std::move(r.report);
        out.trace = std::move(r.trace);
    }
    return out;
}

inline std::string method_label(const SolveOutcome& s) {
    return s.heuristic ? s.method + " (heuristic)" : s.method;
}

inline json solve_json(const QueueModel& model, const SolveOutcome& s) {
    json j = evaluation_json(model, s.policy, s.report, method_label(s));
    j["method"] = s.method;
    j["heuristic"] = s.heuristic;
    j["scale_economies"] = {{"holds", s.economies.holds}, {"cmu_order", one_based(s.economies.order)}};
    if (s.thresholds) {
        j["thresholds"] = s.thresholds->by_group();
    } else if (auto form = threshold_form(model, s.policy)) {
        j["threshold_form"] = *form;
    }
    j["trace"] = trace_json(s.trace, s.method);
    return j;
}

inline void add_solve_tables(Artifacts& a, const std::string& prefix, const QueueModel& model,
                             const SolveOutcome& s) {
    const int last = std::min(s.policy.frontier() + table_margin, s.report.truncation);
    a.csv[prefix + "policy.csv"] = policy_csv(s.policy, model.group_count(), last);
    a.csv[prefix + "curves.csv"] = curves_csv(s.report, last);
    a.csv[prefix + "trace.csv"] = trace_csv(s.trace);
}

// Evaluates independent points concurrently; results keep the input order.
template <class T, class F>
auto ordered_map(const std::vector<T>& points, F fn, bool parallel = true) {
    using R = decltype(fn(points.front()));
    std::vector<R> out;
    if (!parallel) {
        for (const auto& p : points) out.push_back(fn(p));
        return out;
    }
    std::vector<std::future<R>> jobs;
    for (const auto& p : points) jobs.push_back(std::async(std::launch::async, fn, std::cref(p)));
    for (auto& j : jobs) out.push_back(j.get());
    return out;
}

// ---------------------------------------------------------------------------
// Example models

inline QueueModel three_group_model(double lambda, std::vector<double> c, double v = 1.0) {
    QueueModel m;
    m.arrival_rate = lambda;
    const int servers[] = {3, 4, 3};
    const double rates[] = {6, 4, 2};
    for (std::size_t k = 0; k < 3; ++k) m.groups.push_back({servers[k], rates[k], c.at(k)});
    m.holding = HoldingCost::linear(1.0);
    m.operating_weight = v;
    return m;
}

inline QueueModel example1_model() { return three_group_model(10, {7, 4, 3}); }
inline QueueModel example2_model() { return three_group_model(10, {7, 8, 5}); }

// K groups of 3 servers, μ = (2..K+1), c = μ^0.9, λ at half capacity.
inline QueueModel scalability_model(int K) {
    QueueModel m;
    for (int k = 0; k < K; ++k) {
        const double mu = k + 2;
        m.groups.push_back({3, mu, std::pow(mu, 0.9)});
    }
    m.arrival_rate = 0.5 * m.capacity();
    m.holding = HoldingCost::linear(1.0);
    return m;
}

inline const std::vector<double>& example3_lambdas() {
    static const std::vector<double> v{2, 5, 10, 20, 30, 38, 39};
    return v;
}
inline const std::vector<double>& example4_weights() {
    static const std::vector<double> v{0.1, 0.3, 0.5, 1, 2, 3};
    return v;
}
inline const std::vector<int>& example5_sizes() {
    static const std::vector<int> v{3, 5, 10, 20, 30, 50};
    return v;
}
inline const std::vector<std::vector<double>>& example6_costs() {
    static const std::vector<std::vector<double>> v{{7, 4, 3}, {7, 4, 1.8}, {7, 4, 1},
                                                    {8, 3, 1}, {4, 3, 1},   {18, 10, 3}};
    return v;
}

// ---------------------------------------------------------------------------
// Suites

inline json value_iteration_json(const QueueModel& model, int n_max, double epsilon = 1e-10) {
    const auto vi = value_iteration(model, n_max, epsilon);
    return {{"eta", eta_json(vi.eta, "value-iteration")},
            {"sweeps", vi.sweeps},
            {"truncation", n_max},
            {"worst_increment", vi.worst_increment},
            {"worst_convexity", vi.worst_convexity}};
}

// States where some group switches servers off as n grows, and whether the total stays nondecreasing.
inline json monotonicity_json(const Policy& policy) {
    json drops = json::array();
    bool total_ok = true;
    for (int n = 0; n < policy.frontier(); ++n) {
        const auto& a = policy(n);
        const auto& b = policy(n + 1);
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (b[k] < a[k]) {
                drops.push_back({{"n", n}, {"group", k + 1}});
            }
        }
        total_ok = total_ok && b.total() >= a.total();
    }
    return {{"total_nondecreasing", total_ok}, {"per_group_decreases", drops}};
}

inline Artifacts suite_ex1(const OptimizeOptions& opt, bool parallel) {
    Artifacts a;
    const std::vector<std::vector<double>> costs{{7, 4, 3}, {7, 4, 1.8}};
    auto outcomes = ordered_map(costs, [&](const std::vector<double>& c) {
        return solve(three_group_model(10, c), "algorithm1", false, opt);
    }, parallel);
    json cases = json::array();
    for (std::size_t i = 0; i < costs.size(); ++i) {
        const auto model = three_group_model(10, costs[i]);
        json j = solve_json(model, outcomes[i]);
        j["c"] = costs[i];
        j["monotonicity"] = monotonicity_json(outcomes[i].policy);
        j["value_iteration"] = value_iteration_json(model, outcomes[i].report.truncation);
        cases.push_back(j);
        add_solve_tables(a, "ex1_case" + std::to_string(i + 1) + "_", model, outcomes[i]);
    }
    a.results = {{"suite", "ex1"}, {"cases", cases}};
    return a;
}

inline Artifacts suite_ex2(const OptimizeOptions& opt, bool parallel, int theta_bound = 30) {
    Artifacts a;
    const auto model = example2_model();
    const std::vector<std::string> methods{"algorithm2", "algorithm1"};
    auto outcomes = ordered_map(methods, [&](const std::string& m) { return solve(model, m, false, opt); }, parallel);
    const auto& s2 = outcomes[0];
    const auto& s1 = outcomes[1];
    const auto bf = brute_force_thresholds(model, theta_bound, opt.eval);

    json j = solve_json(model, s2);
    j["algorithm1"] = solve_json(model, s1);
    j["policies_identical"] = s1.policy == s2.policy;
    j["brute_force"] = {{"thresholds", bf.best.by_group()},
                        {"eta", eta_json(bf.eta, "brute-force")},
                        {"theta_bound", theta_bound},
                        {"evaluated", bf.evaluated}};
    j["value_iteration"] = value_iteration_json(model, s2.report.truncation);
    a.results = {{"suite", "ex2"}, {"cases", json::array({j})}};
    add_solve_tables(a, "ex2_", model, s2);
    return a;
}

template <class P>
Artifacts threshold_sweep(const std::string& name, const std::string& key, const std::vector<P>& points,
                          std::function<QueueModel(P)> make, const OptimizeOptions& opt, bool parallel) {
    Artifacts a;
    auto outcomes = ordered_map(points, [&](const P& p) { return solve(make(p), "algorithm2", false, opt); }, parallel);
    json rows = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& s = outcomes[i];
        rows.push_back({{key, points[i]},
                        {"thresholds", s.thresholds->by_group()},
                        {"eta", eta_json(s.report.eta, method_label(s))},
                        {"mean_queue_length", s.report.mean_queue_length},
                        {"frontier", s.policy.frontier()},
                        {"iterations", s.trace.iteration_count()},
                        {"converged", s.trace.converged},
                        {"monotone", s.trace.monotone()}});
    }
    a.results = {{"suite", name}, {"rows", rows}};
    a.csv[name + ".csv"] = rows_csv(rows);
    return a;
}

inline Artifacts suite_ex3(const OptimizeOptions& opt, bool parallel) {
    return threshold_sweep<double>("ex3", "lambda", example3_lambdas(),
                                   [](double l) { return three_group_model(l, {7, 8, 5}); }, opt, parallel);
}

inline Artifacts suite_ex4(const OptimizeOptions& opt, bool parallel) {
    return threshold_sweep<double>("ex4", "v", example4_weights(),
                                   [](double v) { return three_group_model(10, {7, 8, 5}, v); }, opt, parallel);
}

inline Artifacts suite_ex5(const OptimizeOptions& opt, bool parallel) {
    auto a = threshold_sweep<int>("ex5", "K", example5_sizes(), scalability_model, opt, parallel);
    for (std::size_t i = 0; i < example5_sizes().size(); ++i) {
        a.results["rows"][i]["lambda"] = scalability_model(example5_sizes()[i]).arrival_rate;
    }
    a.csv["ex5.csv"] = rows_csv(a.results["rows"]);
    return a;
}

inline Artifacts suite_ex6(const OptimizeOptions& opt, bool parallel) {
    Artifacts a;
    struct Pair {
        SolveOutcome exact, heuristic;
    };
    auto outcomes = ordered_map(example6_costs(), [&](const std::vector<double>& c) {
        const auto model = three_group_model(10, c);
        return Pair{solve(model, "algorithm1", false, opt), solve(model, "algorithm2", true, opt)};
    }, parallel);
    json rows = json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto model = three_group_model(10, example6_costs()[i]);
        const auto& p = outcomes[i];
        const double error = 100.0 * (p.heuristic.report.eta - p.exact.report.eta) / p.exact.report.eta;
        json row = {{"c", example6_costs()[i]},
                    {"eta_optimal", eta_json(p.exact.report.eta, "algorithm1")},
                    {"eta_cmu", eta_json(p.heuristic.report.eta, method_label(p.heuristic))},
                    {"error_percent", error},
                    {"thresholds_cmu", p.heuristic.thresholds->by_group()},
                    {"scale_economies", p.heuristic.economies.holds}};
        if (auto form = threshold_form(model, p.exact.policy)) row["threshold_form_optimal"] = *form;
        rows.push_back(row);
    }
    a.results = {{"suite", "ex6"}, {"rows", rows}};
    a.csv["ex6.csv"] = rows_csv(rows);
    return a;
}

inline Artifacts run_suite(const std::string& name, const OptimizeOptions& opt, bool parallel = true,
                           int theta_bound = 30) {
    if (name == "ex1") return suite_ex1(opt, parallel);
    if (name == "ex2") return suite_ex2(opt, parallel, theta_bound);
    if (name == "ex3") return suite_ex3(opt, parallel);
    if (name == "ex4") return suite_ex4(opt, parallel);
    if (name == "ex5") return suite_ex5(opt, parallel);
    if (name == "ex6") return suite_ex6(opt, parallel);
    throw ConfigError({"suite: unknown suite \"" + name + "\" (expected ex1..ex6)"});
}

} // namespace gsq::cli
