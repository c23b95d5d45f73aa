#pragma once

// Group-server queue: one FCFS queue with Poisson(λ) arrivals served by K
// groups of exponential servers. Group k has M_k servers of rate μ_k that
// cost c_k per unit time while on. State n is the number of customers.

#include "gsq/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gsq {

struct GroupSpec {
    int servers = 1;          // M_k
    double service_rate = 1;  // μ_k, per server
    double cost_rate = 0;     // c_k, per working server

    bool operator==(const GroupSpec&) const = default;
};

// Holding cost h(n). Increasing, convex and unbounded on validated models.
class HoldingCost {
public:
    enum class Kind { linear, power, table };

    HoldingCost() = default;

    // h(n) = slope·n
    static HoldingCost linear(double slope) {
        HoldingCost h;
        h.kind_ = Kind::linear;
        h.a_ = slope;
        return h;
    }

    // h(n) = a·n^p + b
    static HoldingCost power(double a, double p, double b = 0.0) {
        HoldingCost h;
        h.kind_ = Kind::power;
        h.a_ = a;
        h.p_ = p;
        h.b_ = b;
        return h;
    }

    // h(n) = values[n] inside the table, then continues linearly with `slope`
    // from the last entry.
    static HoldingCost table(std::vector<double> values, double slope) {
        HoldingCost h;
        h.kind_ = Kind::table;
        h.values_ = std::move(values);
        h.a_ = slope;
        return h;
    }

    Kind kind() const { return kind_; }
    double slope() const { return a_; }      // linear slope, power coefficient, or table tail slope
    double exponent() const { return p_; }
    double intercept() const { return b_; }
    const std::vector<double>& values() const { return values_; }

    double operator()(int n) const {
        if (n < 0) {
            throw DomainError("holding cost evaluated at negative state " + std::to_string(n));
        }
        switch (kind_) {
        case Kind::linear:
            return a_ * n;
        case Kind::power:
            return a_ * std::pow(static_cast<double>(n), p_) + b_;
        case Kind::table: {
            if (values_.empty()) {
                throw DomainError("holding cost table is empty");
            }
            const auto size = static_cast<int>(values_.size());
            if (n < size) {
                return values_[static_cast<std::size_t>(n)];
            }
            return values_.back() + a_ * (n - (size - 1));
        }
        }
        return 0.0;
    }

    // Empty string when the form guarantees h(n) → ∞, otherwise the reason.
    std::string structural_problem() const {
        switch (kind_) {
        case Kind::linear:
            if (!(a_ > 0)) return "linear slope must be > 0";
            break;
        case Kind::power:
            if (!(a_ > 0)) return "power coefficient a must be > 0";
            if (!(p_ >= 1)) return "power exponent p must be >= 1";
            if (!std::isfinite(b_)) return "power intercept b must be finite";
            break;
        case Kind::table:
            if (values_.empty()) return "table must have at least one value";
            if (!(a_ > 0)) return "table extrapolation slope must be > 0";
            for (double x : values_) {
                if (!std::isfinite(x)) return "table values must be finite";
            }
            break;
        }
        return {};
    }

    bool operator==(const HoldingCost&) const = default;

private:
    Kind kind_ = Kind::linear;
    double a_ = 1.0;
    double p_ = 1.0;
    double b_ = 0.0;
    std::vector<double> values_;
};

inline const char* to_string(HoldingCost::Kind kind) {
    switch (kind) {
    case HoldingCost::Kind::linear: return "linear";
    case HoldingCost::Kind::power: return "power";
    case HoldingCost::Kind::table: return "table";
    }
    return "?";
}

struct QueueModel {
    double arrival_rate = 1.0;       // λ
    std::vector<GroupSpec> groups;   // original user order is kept everywhere
    HoldingCost holding = HoldingCost::linear(1.0);
    double operating_weight = 1.0;   // v in f(n, m) = h(n) + v·m·c

    std::size_t group_count() const { return groups.size(); }

    int total_servers() const {
        int total = 0;
        for (const auto& g : groups) total += g.servers;
        return total;
    }

    // Σ M_k μ_k
    double capacity() const {
        double total = 0;
        for (const auto& g : groups) total += g.servers * g.service_rate;
        return total;
    }

    bool operator==(const QueueModel&) const = default;
};

// Per-group working-server counts at one state.
struct Action {
    std::vector<int> counts;

    Action() = default;
    explicit Action(std::vector<int> c) : counts(std::move(c)) {}
    Action(std::initializer_list<int> c) : counts(c) {}

    std::size_t size() const { return counts.size(); }
    int operator[](std::size_t k) const { return counts[k]; }
    int& operator[](std::size_t k) { return counts[k]; }

    int total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

    double service_rate(const QueueModel& model) const {
        double rate = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) rate += counts[k] * model.groups[k].service_rate;
        return rate;
    }

    // m·c, without the operating weight
    double operating_cost(const QueueModel& model) const {
        double cost = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) cost += counts[k] * model.groups[k].cost_rate;
        return cost;
    }

    bool operator==(const Action&) const = default;
};

inline std::string to_string(const Action& a) {
    std::ostringstream os;
    os << '(';
    for (std::size_t k = 0; k < a.size(); ++k) os << (k ? "," : "") << a[k];
    os << ')';
    return os.str();
}

inline Action all_on(const QueueModel& model) {
    Action a;
    a.counts.reserve(model.group_count());
    for (const auto& g : model.groups) a.counts.push_back(g.servers);
    return a;
}

// True when 0 ≤ m_k ≤ M_k and Σ m_k ≤ n.
inline bool is_feasible(const QueueModel& model, int n, const Action& m) {
    if (n < 0 || m.size() != model.group_count()) return false;
    for (std::size_t k = 0; k < m.size(); ++k) {
        if (m[k] < 0 || m[k] > model.groups[k].servers) return false;
    }
    return m.total() <= n;
}

// Fills groups to capacity in the given priority order until n servers are on.
inline Action fill_in_order(const QueueModel& model, int n, std::span<const int> order) {
    Action a(std::vector<int>(model.group_count(), 0));
    int remaining = std::max(n, 0);
    for (int k : order) {
        const int take = std::min(model.groups[static_cast<std::size_t>(k)].servers, remaining);
        a[static_cast<std::size_t>(k)] = take;
        remaining -= take;
    }
    return a;
}

// Stationary policy: explicit actions on [0, frontier], all servers on beyond.
class Policy {
public:
    Policy() = default;

    Policy(const QueueModel& model, std::vector<Action> actions)
        : actions_(std::move(actions)), all_on_(all_on(model)) {
        if (actions_.empty()) {
            throw DomainError("policy table must contain at least state 0");
        }
        for (std::size_t n = 0; n < actions_.size(); ++n) {
            if (!is_feasible(model, static_cast<int>(n), actions_[n])) {
                throw DomainError("policy action " + to_string(actions_[n]) + " is not efficient at state " +
                                  std::to_string(n));
            }
        }
        if (actions_.back() != all_on_) {
            throw DomainError("policy action at the frontier state " + std::to_string(actions_.size() - 1) +
                              " must switch all servers on");
        }
    }

    const Action& operator()(int n) const {
        if (n < 0) throw DomainError("policy queried at negative state " + std::to_string(n));
        return n < static_cast<int>(actions_.size()) ? actions_[static_cast<std::size_t>(n)] : all_on_;
    }

    // n̄: first state of the all-on tail as stored
    int frontier() const { return static_cast<int>(actions_.size()) - 1; }

    std::span<const Action> table() const { return actions_; }

    std::size_t hash() const {
        std::size_t h = actions_.size();
        for (const auto& a : actions_) {
            for (int x : a.counts) h = h * 1000003u ^ std::hash<int>{}(x);
        }
        return h;
    }

    bool operator==(const Policy&) const = default;

private:
    std::vector<Action> actions_;
    Action all_on_;
};

// Thresholds θ in ascending c/μ priority order: thresholds[i] belongs to group order[i].
struct ThresholdPolicy {
    std::vector<int> thresholds;
    std::vector<int> order;

    // θ re-indexed by the user's original group numbering.
    std::vector<int> by_group() const {
        std::vector<int> out(thresholds.size(), 0);
        for (std::size_t i = 0; i < order.size(); ++i) out[static_cast<std::size_t>(order[i])] = thresholds[i];
        return out;
    }

    bool operator==(const ThresholdPolicy&) const = default;
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    double capacity = 0;

    bool ok() const { return violations.empty(); }

    bool has(const std::string& code) const {
        return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
    }

    std::string summary() const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) out += "; ";
            out += v.code + ": " + v.message;
        }
        return out;
    }
};

// Holding-cost values above this are treated as overflow risk.
inline constexpr double holding_soft_cap = 1e150;

inline ValidationReport validate(const QueueModel& model, int sample_to = 1000) {
    ValidationReport report;
    auto fail = [&](std::string code, std::string message) {
        report.violations.push_back({std::move(code), std::move(message)});
    };
    auto num = [](double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    };

    if (!(model.arrival_rate > 0) || !std::isfinite(model.arrival_rate)) {
        fail("arrival_rate", "lambda must be a finite value > 0 (got " + num(model.arrival_rate) + ")");
    }
    if (model.groups.empty()) {
        fail("groups", "at least one server group is required");
    }
    bool rates_ok = true;
    for (std::size_t k = 0; k < model.groups.size(); ++k) {
        const auto& g = model.groups[k];
        const std::string where = "groups[" + std::to_string(k) + "]";
        if (g.servers < 1) {
            fail("servers", where + ".servers must be >= 1");
            rates_ok = false;
        }
        if (!(g.service_rate > 0) || !std::isfinite(g.service_rate)) {
            fail("service_rate", where + ".mu must be > 0");
            rates_ok = false;
        }
        if (!(g.cost_rate >= 0) || !std::isfinite(g.cost_rate)) {
            fail("cost_rate", where + ".c must be >= 0");
        }
    }
    if (!(model.operating_weight >= 0) || !std::isfinite(model.operating_weight)) {
        fail("operating_weight", "v must be >= 0");
    }

    if (auto problem = model.holding.structural_problem(); !problem.empty()) {
        fail("holding", problem);
    } else {
        int upper = sample_to;
        if (model.holding.kind() == HoldingCost::Kind::table) {
            upper = std::max(upper, static_cast<int>(model.holding.values().size()) + 2);
        }
        double prev = model.holding(0);
        double prev_step = 0;
        bool monotone = true, convex = true, bounded = true;
        for (int n = 1; n <= upper; ++n) {
            const double cur = model.holding(n);
            if (!std::isfinite(cur) || std::abs(cur) > holding_soft_cap) {
                if (bounded) fail("holding-overflow", "h(" + std::to_string(n) + ") exceeds the soft cap 1e150");
                bounded = false;
                break;
            }
            const double step = cur - prev;
            const double noise = 1e-12 * std::max({1.0, std::abs(cur), std::abs(prev)});
            if (step < -noise && monotone) {
                fail("holding-monotonicity", "h decreases between n=" + std::to_string(n - 1) + " and n=" +
                                                 std::to_string(n));
                monotone = false;
            }
            if (n >= 2 && step < prev_step - noise && convex) {
                fail("holding-convexity", "h is not convex at n=" + std::to_string(n - 1) + " (" + num(step) +
                                              " < " + num(prev_step) + ")");
                convex = false;
            }
            prev = cur;
            prev_step = step;
        }
    }

    report.capacity = model.capacity();
    if (rates_ok && !model.groups.empty() && !(model.arrival_rate < report.capacity)) {
        fail("capacity", "stability requires lambda < sum M_k mu_k (" + num(model.arrival_rate) + " not < " +
                             num(report.capacity) + ")");
    }
    return report;
}

inline double holding(const QueueModel& model, int n) { return model.holding(n); }

// f(n, m) = h(n) + v·m·c
inline double total_cost_rate(const QueueModel& model, int n, const Action& m) {
    if (!is_feasible(model, n, m)) {
        throw DomainError("action " + to_string(m) + " is infeasible at state " + std::to_string(n));
    }
    return model.holding(n) + model.operating_weight * m.operating_cost(model);
}

} // namespace gsq
