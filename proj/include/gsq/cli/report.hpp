#pragma once

// Report assembly: JSON fragments for solver results and the CSV tables
// behind the policy, curve and trace plots.

#include "gsq/ctmc.hpp"
#include "gsq/optimize.hpp"
#include "gsq/simulate.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gsq::cli {

using nlohmann::json;

inline constexpr const char* tool_name = "gsq";
inline constexpr const char* tool_version = "1.0.0";

// State rows shown past n̄ in policy and curve tables.
inline constexpr int table_margin = 10;

inline json eta_json(double value, const std::string& method) { return {{"value", value}, {"method", method}}; }

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json provenance(std::uint64_t seed) {
    return {{"tool", tool_name}, {"version", tool_version}, {"generated_at", utc_timestamp()}, {"seed", seed}};
}

// 1-based group numbers, as users count them.
inline std::vector<int> one_based(const std::vector<int>& order) {
    std::vector<int> out;
    for (int k : order) out.push_back(k + 1);
    return out;
}

inline json policy_json(const Policy& policy, std::size_t groups, int last_state) {
    json rows = json::array();
    for (int n = 0; n <= last_state; ++n) {
        json row = json::array();
        for (std::size_t k = 0; k < groups; ++k) row.push_back(policy(n)[k]);
        rows.push_back(row);
    }
    return rows;
}

inline json curves_json(const SolveReport& r, int last_state) {
    json g = json::array(), G = json::array();
    for (int n = 0; n <= last_state && n <= r.truncation; ++n) {
        g.push_back(r.g[static_cast<std::size_t>(n)]);
        if (n == 0) {
            G.push_back(nullptr);
        } else {
            G.push_back(r.G[static_cast<std::size_t>(n)]);
        }
    }
    return {{"g", g}, {"G", G}};
}

inline json trace_json(const OptimizationTrace& trace, const std::string& method) {
    json its = json::array();
    for (const auto& rec : trace.iterations) {
        json it = {{"iteration", rec.iteration},
                   {"eta", eta_json(rec.eta, method)},
                   {"mean_queue_length", rec.mean_queue_length},
                   {"frontier", rec.frontier}};
        if (!rec.thresholds.empty()) it["thresholds"] = rec.thresholds;
        its.push_back(it);
    }
    return {{"iterations", its},
            {"iteration_count", trace.iteration_count()},
            {"converged", trace.converged},
            {"cycle_terminated", trace.cycle_terminated},
            {"monotone", trace.monotone()}};
}

// η, L, policy and curve tables for one evaluated policy.
inline json evaluation_json(const QueueModel& model, const Policy& policy, const SolveReport& r,
                            const std::string& method) {
    const int last = std::min(policy.frontier() + table_margin, r.truncation);
    const auto chain = build_chain(model, policy, r.truncation);
    return {{"eta", eta_json(r.eta, method)},
            {"mean_queue_length", r.mean_queue_length},
            {"frontier", policy.frontier()},
            {"truncation", r.truncation},
            {"tail_mass", r.tail_mass},
            {"reliable_limit", r.reliable_limit},
            {"poisson_residual", poisson_residual(chain, r.cost, r.eta, r.g)},
            {"balance_residual", global_balance_residual(chain, r.pi)},
            {"policy", policy_json(policy, model.group_count(), last)},
            {"curves", curves_json(r, last)}};
}

inline json simulation_json(const SimEstimate& est, const SimConfig& cfg) {
    return {{"eta", {{"value", est.eta_hat}, {"ci_halfwidth", est.ci_halfwidth}, {"method", "simulation"}}},
            {"mean_queue_length", est.mean_queue_length},
            {"queue_ci_halfwidth", est.queue_ci_halfwidth},
            {"replication_eta", est.replication_eta},
            {"events", est.events},
            {"max_queue", est.max_queue},
            {"rng", est.rng},
            {"horizon", cfg.horizon},
            {"warmup", cfg.warmup_time()},
            {"replications", cfg.replications},
            {"batch_count", cfg.batch_count}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_number(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

inline std::string policy_csv(const Policy& policy, std::size_t groups, int last_state) {
    std::ostringstream os;
    os << "n";
    for (std::size_t k = 0; k < groups; ++k) os << ",group_" << k + 1;
    os << '\n';
    for (int n = 0; n <= last_state; ++n) {
        os << n;
        for (std::size_t k = 0; k < groups; ++k) os << ',' << policy(n)[k];
        os << '\n';
    }
    return os.str();
}

inline std::string curves_csv(const SolveReport& r, int last_state) {
    std::ostringstream os;
    os << "n,g,G\n";
    for (int n = 0; n <= last_state && n <= r.truncation; ++n) {
        os << n << ',' << csv_number(r.g[static_cast<std::size_t>(n)]) << ',';
        if (n > 0) os << csv_number(r.G[static_cast<std::size_t>(n)]);
        os << '\n';
    }
    return os.str();
}

inline std::string trace_csv(const OptimizationTrace& trace) {
    std::ostringstream os;
    os << "iteration,eta,mean_queue_length,frontier\n";
    for (const auto& rec : trace.iterations) {
        os << rec.iteration << ',' << csv_number(rec.eta) << ',' << csv_number(rec.mean_queue_length) << ','
           << rec.frontier << '\n';
    }
    return os.str();
}

// RFC 4180 quoting: fields with commas, quotes or newlines are wrapped and quotes doubled.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

// Flat table from an array of objects; nested values are written as JSON text.
inline std::string rows_csv(const json& rows) {
    std::vector<std::string> columns;
    for (const auto& row : rows) {
        for (auto it = row.begin(); it != row.end(); ++it) {
            if (std::find(columns.begin(), columns.end(), it.key()) == columns.end()) columns.push_back(it.key());
        }
    }
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) os << ',';
            if (!row.contains(columns[i])) continue;
            const auto& v = row.at(columns[i]);
            if (v.is_number_float()) {
                os << csv_number(v.get<double>());
            } else if (v.is_string()) {
                os << csv_field(v.get<std::string>());
            } else if (v.is_object() && v.contains("value")) {
                os << csv_number(v.at("value").get<double>());
            } else {
                os << csv_field(v.dump());
            }
        }
        os << '\n';
    }
    return os.str();
}

} // namespace gsq::cli
