#pragma once

// Run configuration: a JSON document with field names after the model's
// symbols (lambda, groups[].servers/mu/c, holding, v). Unknown keys are errors.

#include "gsq/error.hpp"
#include "gsq/model.hpp"
#include "gsq/optimize.hpp"
#include "gsq/simulate.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace gsq::cli {

using nlohmann::json;

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid configuration";
        for (const auto& p : problems) out += "\n  " + p;
        return out;
    }

    std::vector<std::string> problems_;
};

struct RunConfig {
    std::optional<QueueModel> model;
    std::string method = "auto";               // auto | algorithm1 | algorithm2
    std::optional<std::vector<int>> thresholds; // by original group index
    std::optional<std::vector<std::vector<int>>> table;
    std::optional<SimConfig> simulation;
    int theta_bound = 30;
    std::string suite;
    int max_iterations = 100;
    double tolerance = 1e-9;
    int truncation = 0;

    OptimizeOptions optimize_options() const {
        OptimizeOptions o;
        o.max_iterations = max_iterations;
        o.eval.eta_tolerance = tolerance;
        o.eval.truncation = truncation;
        return o;
    }

    EvalOptions eval_options() const { return optimize_options().eval; }
};

inline const std::set<std::string>& known_suites() {
    static const std::set<std::string> names{"ex1", "ex2", "ex3", "ex4", "ex5", "ex6"};
    return names;
}

namespace detail {

// Line and column (both 1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline std::string line_text(std::string_view text, std::size_t line) {
    std::size_t start = 0;
    for (std::size_t l = 1; l < line; ++l) {
        start = text.find('\n', start);
        if (start == std::string_view::npos) return {};
        ++start;
    }
    auto end = text.find('\n', start);
    return std::string(text.substr(start, end == std::string_view::npos ? text.npos : end - start));
}

class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& message) { problems.push_back(path + ": " + message); }

    bool expect_object(const json& j, const std::string& path) {
        if (!j.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        return true;
    }

    void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool ok = false;
            for (const char* a : allowed) ok = ok || it.key() == a;
            if (!ok) fail(join(path, it.key()), "unknown field");
        }
    }

    std::optional<double> number(const json& j, const std::string& path, const char* key, bool required) {
        if (!j.contains(key)) {
            if (required) fail(join(path, key), "missing required field");
            return std::nullopt;
        }
        const auto& v = j.at(key);
        if (!v.is_number()) {
            fail(join(path, key), "expected a number");
            return std::nullopt;
        }
        return v.get<double>();
    }

    std::optional<long long> integer(const json& j, const std::string& path, const char* key, bool required) {
        if (!j.contains(key)) {
            if (required) fail(join(path, key), "missing required field");
            return std::nullopt;
        }
        const auto& v = j.at(key);
        if (!v.is_number_integer()) {
            fail(join(path, key), "expected an integer");
            return std::nullopt;
        }
        return v.get<long long>();
    }

    std::optional<std::string> string(const json& j, const std::string& path, const char* key, bool required) {
        if (!j.contains(key)) {
            if (required) fail(join(path, key), "missing required field");
            return std::nullopt;
        }
        const auto& v = j.at(key);
        if (!v.is_string()) {
            fail(join(path, key), "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }
};

inline std::optional<HoldingCost> read_holding(Reader& r, const json& j) {
    if (!r.expect_object(j, "holding")) return std::nullopt;
    const auto kind = r.string(j, "holding", "kind", true);
    if (!kind) return std::nullopt;
    if (*kind == "linear") {
        r.only_keys(j, "holding", {"kind", "slope"});
        const auto slope = r.number(j, "holding", "slope", false);
        return HoldingCost::linear(slope.value_or(1.0));
    }
    if (*kind == "power") {
        r.only_keys(j, "holding", {"kind", "a", "p", "b"});
        const auto a = r.number(j, "holding", "a", false);
        const auto p = r.number(j, "holding", "p", true);
        const auto b = r.number(j, "holding", "b", false);
        if (!p) return std::nullopt;
        return HoldingCost::power(a.value_or(1.0), *p, b.value_or(0.0));
    }
    if (*kind == "table") {
        r.only_keys(j, "holding", {"kind", "values", "slope"});
        const auto slope = r.number(j, "holding", "slope", true);
        std::vector<double> values;
        if (!j.contains("values") || !j.at("values").is_array()) {
            r.fail("holding.values", "expected an array of numbers");
            return std::nullopt;
        }
        for (std::size_t i = 0; i < j.at("values").size(); ++i) {
            const auto& x = j.at("values")[i];
            if (!x.is_number()) {
                r.fail("holding.values[" + std::to_string(i) + "]", "expected a number");
                return std::nullopt;
            }
            values.push_back(x.get<double>());
        }
        if (!slope) return std::nullopt;
        return HoldingCost::table(std::move(values), *slope);
    }
    r.fail("holding.kind", "expected one of linear, power, table (got \"" + *kind + "\")");
    return std::nullopt;
}

inline std::optional<std::vector<int>> read_int_array(Reader& r, const json& j, const std::string& path) {
    if (!j.is_array()) {
        r.fail(path, "expected an array of integers");
        return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_integer()) {
            r.fail(path + "[" + std::to_string(i) + "]", "expected an integer");
            return std::nullopt;
        }
        out.push_back(j[i].get<int>());
    }
    return out;
}

// Maps validate() codes to the config field they concern.
inline std::string field_of(const Violation& v) {
    if (v.code == "arrival_rate" || v.code == "capacity") return "lambda";
    if (v.code == "operating_weight") return "v";
    if (v.code.rfind("holding", 0) == 0) return "holding";
    return "groups";
}

} // namespace detail

inline RunConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
        const auto [line, column] = detail::line_column(text, offset);
        std::ostringstream os;
        os << "line " << line << ", column " << column << ": " << e.what();
        const auto context = detail::line_text(text, line);
        if (!context.empty()) os << "\n    | " << context;
        throw ConfigError({os.str()});
    }

    detail::Reader r;
    RunConfig cfg;
    if (!r.expect_object(j, "config")) throw ConfigError(r.problems);
    r.only_keys(j, "", {"lambda", "groups", "holding", "v", "solve", "policy", "simulation", "brute_force", "suite",
                        "options"});

    const bool has_model = j.contains("lambda") || j.contains("groups");
    if (has_model) {
        QueueModel m;
        if (auto lambda = r.number(j, "", "lambda", true)) m.arrival_rate = *lambda;
        if (!j.contains("groups")) {
            r.fail("groups", "missing required field");
        } else if (!j.at("groups").is_array() || j.at("groups").empty()) {
            r.fail("groups", "expected a non-empty array");
        } else {
            for (std::size_t k = 0; k < j.at("groups").size(); ++k) {
                const auto& gj = j.at("groups")[k];
                const std::string path = "groups[" + std::to_string(k) + "]";
                if (!r.expect_object(gj, path)) continue;
                r.only_keys(gj, path, {"servers", "mu", "c"});
                GroupSpec g;
                if (auto s = r.integer(gj, path, "servers", true)) g.servers = static_cast<int>(*s);
                if (auto mu = r.number(gj, path, "mu", true)) g.service_rate = *mu;
                if (auto c = r.number(gj, path, "c", true)) g.cost_rate = *c;
                m.groups.push_back(g);
            }
        }
        if (j.contains("holding")) {
            if (auto h = detail::read_holding(r, j.at("holding"))) m.holding = *h;
        } else {
            m.holding = HoldingCost::linear(1.0);
        }
        if (auto v = r.number(j, "", "v", false)) m.operating_weight = *v;
        if (r.problems.empty()) {
            for (const auto& v : validate(m).violations) r.fail(detail::field_of(v), v.message);
        }
        cfg.model = std::move(m);
    } else if (j.contains("holding") || j.contains("v")) {
        r.fail("lambda", "missing required field");
    }

    if (j.contains("solve")) {
        const auto& s = j.at("solve");
        if (r.expect_object(s, "solve")) {
            r.only_keys(s, "solve", {"method"});
            if (auto method = r.string(s, "solve", "method", false)) {
                if (*method != "auto" && *method != "algorithm1" && *method != "algorithm2") {
                    r.fail("solve.method", "expected one of auto, algorithm1, algorithm2");
                }
                cfg.method = *method;
            }
        }
    }

    if (j.contains("policy")) {
        const auto& p = j.at("policy");
        if (r.expect_object(p, "policy")) {
            r.only_keys(p, "policy", {"thresholds", "table"});
            if (p.contains("thresholds") == p.contains("table")) {
                r.fail("policy", "give exactly one of thresholds or table");
            } else if (p.contains("thresholds")) {
                cfg.thresholds = detail::read_int_array(r, p.at("thresholds"), "policy.thresholds");
            } else if (!p.at("table").is_array()) {
                r.fail("policy.table", "expected an array of actions");
            } else {
                std::vector<std::vector<int>> rows;
                for (std::size_t n = 0; n < p.at("table").size(); ++n) {
                    auto row = detail::read_int_array(r, p.at("table")[n], "policy.table[" + std::to_string(n) + "]");
                    if (row) rows.push_back(std::move(*row));
                }
                cfg.table = std::move(rows);
            }
        }
    }

    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        if (r.expect_object(s, "simulation")) {
            r.only_keys(s, "simulation", {"horizon", "warmup", "replications", "seed", "batch_count"});
            SimConfig sim;
            if (auto h = r.number(s, "simulation", "horizon", false)) sim.horizon = *h;
            if (auto w = r.number(s, "simulation", "warmup", false)) sim.warmup = *w;
            if (auto n = r.integer(s, "simulation", "replications", false)) sim.replications = static_cast<int>(*n);
            if (s.contains("seed")) {
                if (!s.at("seed").is_number_unsigned()) {
                    r.fail("simulation.seed", "expected a nonnegative integer");
                } else {
                    sim.seed = s.at("seed").get<std::uint64_t>();
                }
            }
            if (auto b = r.integer(s, "simulation", "batch_count", false)) sim.batch_count = static_cast<int>(*b);
            try {
                sim.check();
            } catch (const DomainError& e) {
                r.fail("simulation", e.what());
            }
            cfg.simulation = sim;
        }
    }

    if (j.contains("brute_force")) {
        const auto& b = j.at("brute_force");
        if (r.expect_object(b, "brute_force")) {
            r.only_keys(b, "brute_force", {"theta_bound"});
            if (auto t = r.integer(b, "brute_force", "theta_bound", false)) {
                if (*t < 1) r.fail("brute_force.theta_bound", "must be >= 1");
                cfg.theta_bound = static_cast<int>(*t);
            }
        }
    }

    if (auto suite = r.string(j, "", "suite", false)) {
        if (!known_suites().count(*suite)) r.fail("suite", "unknown suite \"" + *suite + "\" (expected ex1..ex6)");
        cfg.suite = *suite;
    }

    if (j.contains("options")) {
        const auto& o = j.at("options");
        if (r.expect_object(o, "options")) {
            r.only_keys(o, "options", {"max_iters", "tol", "truncation"});
            if (auto n = r.integer(o, "options", "max_iters", false)) {
                if (*n < 1) r.fail("options.max_iters", "must be >= 1");
                cfg.max_iterations = static_cast<int>(*n);
            }
            if (auto t = r.number(o, "options", "tol", false)) {
                if (!(*t > 0)) r.fail("options.tol", "must be > 0");
                cfg.tolerance = *t;
            }
            if (auto n = r.integer(o, "options", "truncation", false)) {
                if (*n < 0) r.fail("options.truncation", "must be >= 0 (0 selects adaptive truncation)");
                cfg.truncation = static_cast<int>(*n);
            }
        }
    }

    if (cfg.model && cfg.thresholds && cfg.thresholds->size() != cfg.model->group_count()) {
        r.fail("policy.thresholds", "expected one threshold per group");
    }
    if (cfg.model && cfg.table) {
        for (std::size_t n = 0; n < cfg.table->size(); ++n) {
            if ((*cfg.table)[n].size() != cfg.model->group_count()) {
                r.fail("policy.table[" + std::to_string(n) + "]", "expected one count per group");
            }
        }
    }

    if (!r.problems.empty()) throw ConfigError(r.problems);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({path + ": cannot open configuration file"});
    std::ostringstream os;
    os << in.rdbuf();
    try {
        return parse_config(os.str());
    } catch (const ConfigError& e) {
        std::vector<std::string> problems;
        for (const auto& p : e.problems()) problems.push_back(path + ": " + p);
        throw ConfigError(problems);
    }
}

// Thresholds given per original group, reordered into the c/μ priority order.
inline ThresholdPolicy thresholds_from_groups(const QueueModel& model, const std::vector<int>& by_group) {
    ThresholdPolicy theta;
    theta.order = cmu_order(model);
    for (int k : theta.order) theta.thresholds.push_back(by_group.at(static_cast<std::size_t>(k)));
    check_threshold_shape(model, theta);
    return theta;
}

inline Policy policy_from_config(const RunConfig& cfg) {
    if (!cfg.model) throw ConfigError({"lambda: a model is required"});
    if (cfg.thresholds) return threshold_to_policy(*cfg.model, thresholds_from_groups(*cfg.model, *cfg.thresholds));
    if (cfg.table) {
        std::vector<Action> actions;
        for (const auto& row : *cfg.table) actions.emplace_back(row);
        return Policy(*cfg.model, std::move(actions));
    }
    throw ConfigError({"policy: a policy (thresholds or table) is required for this command"});
}

inline json holding_to_json(const HoldingCost& h) {
    switch (h.kind()) {
    case HoldingCost::Kind::linear: return {{"kind", "linear"}, {"slope", h.slope()}};
    case HoldingCost::Kind::power: return {{"kind", "power"}, {"a", h.slope()}, {"p", h.exponent()}, {"b", h.intercept()}};
    case HoldingCost::Kind::table: return {{"kind", "table"}, {"values", h.values()}, {"slope", h.slope()}};
    }
    return {};
}

inline json model_to_json(const QueueModel& m) {
    json groups = json::array();
    for (const auto& g : m.groups) groups.push_back({{"servers", g.servers}, {"mu", g.service_rate}, {"c", g.cost_rate}});
    return {{"lambda", m.arrival_rate}, {"groups", groups}, {"holding", holding_to_json(m.holding)},
            {"v", m.operating_weight}};
}

// Normalized config with defaults filled in; parse_config accepts it back.
inline json config_to_json(const RunConfig& cfg) {
    json j = cfg.model ? model_to_json(*cfg.model) : json::object();
    j["solve"] = {{"method", cfg.method}};
    if (cfg.thresholds) j["policy"] = {{"thresholds", *cfg.thresholds}};
    if (cfg.table) j["policy"] = {{"table", *cfg.table}};
    if (cfg.simulation) {
        const auto& s = *cfg.simulation;
        j["simulation"] = {{"horizon", s.horizon},
                           {"warmup", s.warmup_time()},
                           {"replications", s.replications},
                           {"seed", s.seed},
                           {"batch_count", s.batch_count}};
    }
    j["brute_force"] = {{"theta_bound", cfg.theta_bound}};
    if (!cfg.suite.empty()) j["suite"] = cfg.suite;
    j["options"] = {{"max_iters", cfg.max_iterations}, {"tol", cfg.tolerance}, {"truncation", cfg.truncation}};
    return j;
}

} // namespace gsq::cli
