#pragma once

// Policy optimization driven by the realization factors G(n):
//  - ilp_greedy: per-state index policy (fill groups by ascending c_k - μ_k G(n))
//  - algorithm1: index-policy iteration over general policies
//  - algorithm2: c/μ-rule multi-threshold iteration
//  - value_iteration and brute_force_thresholds as independent checks

#include "gsq/ctmc.hpp"
#include "gsq/error.hpp"
#include "gsq/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gsq {

struct IterationRecord {
    int iteration = 0;
    double eta = 0;
    double mean_queue_length = 0;
    int frontier = 0;
    std::optional<Policy> policy;
    std::vector<int> thresholds;  // by original group index (algorithm2 only)
};

struct OptimizationTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    bool cycle_terminated = false;

    int iteration_count() const { return static_cast<int>(iterations.size()); }

    // Largest increase of η between consecutive iterations (≤ 0 when monotone).
    double worst_increase() const {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < iterations.size(); ++i) {
            worst = std::max(worst, iterations[i].eta - iterations[i - 1].eta);
        }
        return iterations.size() < 2 ? 0.0 : worst;
    }

    bool monotone(double slack = 1e-9) const { return worst_increase() <= slack; }
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, OptimizationTrace trace) : Error(what), trace_(std::move(trace)) {}
    const OptimizationTrace& trace() const { return trace_; }

private:
    OptimizationTrace trace_;
};

class CycleError : public NonConvergenceError {
public:
    using NonConvergenceError::NonConvergenceError;
};

// ---------------------------------------------------------------------------
// Index policy

struct IndexRow {
    std::vector<double> index;  // v·c_k - μ_k G(n)
    std::vector<int> order;     // ascending index, ties by original group number
    std::vector<int> economic;  // {k : index_k < 0}, ascending group number
};

inline IndexRow index_row(const QueueModel& model, double G_n) {
    IndexRow row;
    const auto K = model.group_count();
    row.index.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        row.index[k] = model.operating_weight * model.groups[k].cost_rate - model.groups[k].service_rate * G_n;
    }
    row.order.resize(K);
    std::iota(row.order.begin(), row.order.end(), 0);
    std::stable_sort(row.order.begin(), row.order.end(),
                     [&](int a, int b) { return row.index[static_cast<std::size_t>(a)] < row.index[static_cast<std::size_t>(b)]; });
    for (std::size_t k = 0; k < K; ++k) {
        if (row.index[k] < 0) row.economic.push_back(static_cast<int>(k));
    }
    return row;
}

// Rows for n in [0, n_hi]; row 0 is built from G(0) = 0.
inline std::vector<IndexRow> index_table(const QueueModel& model, std::span<const double> G, int n_hi) {
    std::vector<IndexRow> rows;
    for (int n = 0; n <= n_hi && n < static_cast<int>(G.size()); ++n) {
        rows.push_back(index_row(model, n == 0 ? 0.0 : G[static_cast<std::size_t>(n)]));
    }
    return rows;
}

// argmin Σ_k m_k (v·c_k - μ_k G_n) over 0 ≤ m_k ≤ M_k, Σ m_k ≤ n.
// Groups with a zero index stay off.
inline Action ilp_greedy(const QueueModel& model, int n, double G_n) {
    if (n < 0) throw DomainError("ilp_greedy at negative state " + std::to_string(n));
    const auto row = index_row(model, G_n);
    Action a(std::vector<int>(model.group_count(), 0));
    int remaining = n;
    for (int k : row.order) {
        const auto i = static_cast<std::size_t>(k);
        if (!(row.index[i] < 0) || remaining == 0) break;
        a[i] = std::min(model.groups[i].servers, remaining);
        remaining -= a[i];
    }
    return a;
}

// ---------------------------------------------------------------------------
// c/μ ordering and threshold policies

struct ScaleEconomies {
    bool holds = true;
    std::vector<int> order;  // groups by ascending c/μ
};

inline std::vector<int> cmu_order(const QueueModel& model) {
    std::vector<int> order(model.group_count());
    std::iota(order.begin(), order.end(), 0);
    auto ratio = [&](int k) {
        const auto& g = model.groups[static_cast<std::size_t>(k)];
        return g.cost_rate / g.service_rate;
    };
    // equal ratios: the faster group has the smaller index c - μG once G exceeds the ratio
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (ratio(a) != ratio(b)) return ratio(a) < ratio(b);
        return model.groups[static_cast<std::size_t>(a)].service_rate >
               model.groups[static_cast<std::size_t>(b)].service_rate;
    });
    return order;
}

inline ScaleEconomies check_scale_economies(const QueueModel& model) {
    ScaleEconomies out;
    out.order = cmu_order(model);
    for (std::size_t i = 1; i < out.order.size(); ++i) {
        const double prev = model.groups[static_cast<std::size_t>(out.order[i - 1])].service_rate;
        const double cur = model.groups[static_cast<std::size_t>(out.order[i])].service_rate;
        if (cur > prev) out.holds = false;
    }
    return out;
}

// Smallest policy-equivalent thresholds: group order[i] cannot receive a
// server before every earlier group is full, so θ_i ≥ 1 + Σ_{l<i} M_l.
inline ThresholdPolicy canonical(const QueueModel& model, ThresholdPolicy theta) {
    int before = 0, prev = 1;
    for (std::size_t i = 0; i < theta.thresholds.size(); ++i) {
        auto& t = theta.thresholds[i];
        t = std::max({t, prev, before + 1});
        prev = t;
        before += model.groups[static_cast<std::size_t>(theta.order[i])].servers;
    }
    return theta;
}

inline void check_threshold_shape(const QueueModel& model, const ThresholdPolicy& theta) {
    if (theta.thresholds.size() != model.group_count() || theta.order.size() != model.group_count()) {
        throw DomainError("threshold vector must have one entry per group");
    }
    std::vector<bool> seen(model.group_count(), false);
    for (int k : theta.order) {
        if (k < 0 || k >= static_cast<int>(model.group_count()) || seen[static_cast<std::size_t>(k)]) {
            throw DomainError("threshold order must be a permutation of the groups");
        }
        seen[static_cast<std::size_t>(k)] = true;
    }
    for (std::size_t i = 0; i < theta.thresholds.size(); ++i) {
        if (theta.thresholds[i] < 1) throw DomainError("thresholds must be positive");
        if (i > 0 && theta.thresholds[i] < theta.thresholds[i - 1]) {
            throw DomainError("thresholds must be nondecreasing in the priority order");
        }
    }
}

// d(n,k) = min(M_k, n - Σ_{l before k} d(n,l)) if n ≥ θ_k, else 0.
inline Action threshold_action(const QueueModel& model, const ThresholdPolicy& theta, int n) {
    Action a(std::vector<int>(model.group_count(), 0));
    int remaining = n;
    for (std::size_t i = 0; i < theta.order.size(); ++i) {
        if (n < theta.thresholds[i]) continue;
        const auto k = static_cast<std::size_t>(theta.order[i]);
        a[k] = std::min(model.groups[k].servers, remaining);
        remaining -= a[k];
    }
    return a;
}

inline Policy threshold_to_policy(const QueueModel& model, const ThresholdPolicy& theta) {
    check_threshold_shape(model, theta);
    const int frontier = std::max(theta.thresholds.back(), model.total_servers());
    std::vector<Action> table;
    table.reserve(static_cast<std::size_t>(frontier) + 1);
    for (int n = 0; n <= frontier; ++n) table.push_back(threshold_action(model, theta, n));
    // shrink to the first all-on state
    const Action full = all_on(model);
    auto first_full = std::find(table.begin(), table.end(), full);
    table.erase(first_full + 1, table.end());
    return Policy(model, std::move(table));
}

// Thresholds (by original group) reproducing `policy` through the
// threshold fill rule with some priority order, if any exist. θ_k is the
// first state where group k works; candidate orders sort groups by θ.
inline std::optional<std::vector<int>> threshold_form(const QueueModel& model, const Policy& policy) {
    const auto K = model.group_count();
    std::vector<int> first(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        int n = 0;
        while (policy(n)[k] == 0) ++n;
        first[k] = n;
    }
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return first[static_cast<std::size_t>(a)] < first[static_cast<std::size_t>(b)];
    });
    auto matches = [&](const std::vector<int>& ord) {
        ThresholdPolicy theta{{}, ord};
        for (int k : ord) theta.thresholds.push_back(first[static_cast<std::size_t>(k)]);
        for (int n = 0; n <= policy.frontier(); ++n) {
            if (threshold_action(model, theta, n) != policy(n)) return false;
        }
        return true;
    };
    // groups sharing a first state may fill in any relative order
    do {
        bool sorted = true;
        for (std::size_t i = 1; i < K; ++i) {
            sorted = sorted && first[static_cast<std::size_t>(order[i - 1])] <= first[static_cast<std::size_t>(order[i])];
        }
        if (sorted && matches(order)) return first;
    } while (K <= 8 && std::next_permutation(order.begin(), order.end(), [&](int a, int b) {
                 const auto fa = first[static_cast<std::size_t>(a)], fb = first[static_cast<std::size_t>(b)];
                 return fa != fb ? fa < fb : a < b;
             }));
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Policy iteration

struct OptimizeOptions {
    int max_iterations = 100;
    EvalOptions eval;
    double cycle_tolerance = 1e-12;
};

namespace detail {

// Re-evaluates until G is trustworthy at state n.
inline void ensure_reach(const QueueModel& model, const Policy& policy, const OptimizeOptions& opt,
                         SolveReport& report, int n) {
    if (n <= report.reliable_limit) return;
    if (opt.eval.truncation > 0) {
        if (n < report.truncation) return;
        throw TruncationError("fixed truncation " + std::to_string(opt.eval.truncation) +
                              " is too small: the policy sweep needs G(" + std::to_string(n) + ")");
    }
    EvalOptions wider = opt.eval;
    wider.reliable_to = std::max(2 * n, report.reliable_limit + 1);
    report = evaluate(model, policy, wider);
}

inline IterationRecord make_record(int iteration, const SolveReport& r, const Policy& policy) {
    IterationRecord rec;
    rec.iteration = iteration;
    rec.eta = r.eta;
    rec.mean_queue_length = r.mean_queue_length;
    rec.frontier = policy.frontier();
    rec.policy = policy;
    return rec;
}

} // namespace detail

struct Algorithm1Result {
    Policy policy;
    SolveReport report;
    OptimizationTrace trace;
};

// Initial policy: all servers on whenever the efficiency constraint allows,
// filled in c/μ order.
inline Policy initial_all_on_policy(const QueueModel& model) {
    const auto order = cmu_order(model);
    std::vector<Action> table;
    for (int n = 0; n <= model.total_servers(); ++n) table.push_back(fill_in_order(model, n, order));
    return Policy(model, std::move(table));
}

// One improvement step: d'(n) = ilp_greedy(n, G(n)) up to the first all-on state.
inline Policy improve_policy(const QueueModel& model, const Policy& current, const OptimizeOptions& opt,
                             SolveReport& report) {
    const Action full = all_on(model);
    std::vector<Action> table;
    table.push_back(Action(std::vector<int>(model.group_count(), 0)));
    for (int n = 1;; ++n) {
        detail::ensure_reach(model, current, opt, report, n);
        Action a = ilp_greedy(model, n, report.prf(n));
        const bool done = a == full;
        table.push_back(std::move(a));
        if (done) break;
    }
    return Policy(model, std::move(table));
}

inline Algorithm1Result algorithm1(const QueueModel& model, const OptimizeOptions& opt = {}) {
    const auto check = validate(model);
    if (!check.ok()) throw DomainError("invalid model: " + check.summary());

    OptimizationTrace trace;
    std::map<std::size_t, std::pair<Policy, double>> seen;
    Policy policy = initial_all_on_policy(model);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        SolveReport report = evaluate(model, policy, opt.eval);
        trace.iterations.push_back(detail::make_record(it, report, policy));

        Policy next = improve_policy(model, policy, opt, report);
        if (next == policy) {
            trace.converged = true;
            return {std::move(policy), std::move(report), std::move(trace)};
        }
        if (auto hit = seen.find(next.hash()); hit != seen.end() && hit->second.first == next) {
            const double eta_seen = hit->second.second;
            if (std::abs(eta_seen - report.eta) <= opt.cycle_tolerance * std::max(1.0, std::abs(report.eta))) {
                // float ties oscillating between equal-cost policies: keep the best seen
                trace.cycle_terminated = true;
                std::size_t best = 0;
                for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
                    if (trace.iterations[i].eta < trace.iterations[best].eta) best = i;
                }
                Policy chosen = *trace.iterations[best].policy;
                SolveReport final_report = evaluate(model, chosen, opt.eval);
                return {std::move(chosen), std::move(final_report), std::move(trace)};
            }
            throw CycleError("algorithm1 revisited a policy with a different average cost", std::move(trace));
        }
        seen.insert_or_assign(policy.hash(), std::make_pair(policy, report.eta));
        policy = std::move(next);
    }
    throw NonConvergenceError("algorithm1 did not converge within " + std::to_string(opt.max_iterations) +
                                  " iterations",
                              std::move(trace));
}

struct Algorithm2Result {
    ThresholdPolicy thresholds;  // canonical, in c/μ order
    Policy policy;
    SolveReport report;
    OptimizationTrace trace;
    bool heuristic = false;      // scale economies fail: c/μ-rule optimality not guaranteed
};

// One threshold update: θ_k = first n with G(n) > v·c_k/μ_k, swept in c/μ order.
inline ThresholdPolicy improve_thresholds(const QueueModel& model, const ThresholdPolicy& theta,
                                          const Policy& current, const OptimizeOptions& opt, SolveReport& report) {
    ThresholdPolicy next{std::vector<int>(theta.order.size(), 1), theta.order};
    std::size_t k = 0;
    for (int n = 1; k < theta.order.size(); ++n) {
        detail::ensure_reach(model, current, opt, report, n);
        const double G_n = report.prf(n);
        while (k < theta.order.size()) {
            const auto& g = model.groups[static_cast<std::size_t>(theta.order[k])];
            if (!(G_n > model.operating_weight * g.cost_rate / g.service_rate)) break;
            next.thresholds[k] = n;
            ++k;
        }
    }
    return canonical(model, std::move(next));
}

inline Algorithm2Result algorithm2(const QueueModel& model, const OptimizeOptions& opt = {}) {
    const auto check = validate(model);
    if (!check.ok()) throw DomainError("invalid model: " + check.summary());

    const auto economies = check_scale_economies(model);
    ThresholdPolicy theta = canonical(model, {std::vector<int>(model.group_count(), 1), economies.order});
    OptimizationTrace trace;
    std::map<std::vector<int>, double> seen;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Policy policy = threshold_to_policy(model, theta);
        SolveReport report = evaluate(model, policy, opt.eval);
        auto rec = detail::make_record(it, report, policy);
        rec.thresholds = theta.by_group();
        trace.iterations.push_back(std::move(rec));

        ThresholdPolicy next = improve_thresholds(model, theta, policy, opt, report);
        if (next == theta) {
            trace.converged = true;
            return {std::move(theta), std::move(policy), std::move(report), std::move(trace), !economies.holds};
        }
        if (auto hit = seen.find(next.thresholds); hit != seen.end()) {
            if (std::abs(hit->second - report.eta) <= opt.cycle_tolerance * std::max(1.0, std::abs(report.eta))) {
                trace.cycle_terminated = true;
                std::size_t best = 0;
                for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
                    if (trace.iterations[i].eta < trace.iterations[best].eta) best = i;
                }
                ThresholdPolicy chosen{std::vector<int>(economies.order.size()), economies.order};
                for (std::size_t i = 0; i < chosen.order.size(); ++i) {
                    chosen.thresholds[i] = trace.iterations[best].thresholds[static_cast<std::size_t>(chosen.order[i])];
                }
                Policy p = threshold_to_policy(model, chosen);
                SolveReport r = evaluate(model, p, opt.eval);
                return {std::move(chosen), std::move(p), std::move(r), std::move(trace), !economies.holds};
            }
            throw CycleError("algorithm2 revisited a threshold vector with a different average cost",
                             std::move(trace));
        }
        seen.emplace(theta.thresholds, report.eta);
        theta = std::move(next);
    }
    throw NonConvergenceError("algorithm2 did not converge within " + std::to_string(opt.max_iterations) +
                                  " iterations",
                              std::move(trace));
}

// ---------------------------------------------------------------------------
// Performance difference between two policies

// Σ_n π'(n) Σ_k (d'(n,k) - d(n,k)) (v·c_k - μ_k G(n)), with G under d and π'
// under d_new, both on a common truncation. Equals η' - η.
inline double policy_cost_difference(const QueueModel& model, const Policy& d, const Policy& d_new,
                                     const EvalOptions& opt = {}) {
    int n_max = opt.truncation;
    if (n_max <= 0) n_max = std::max(evaluate(model, d, opt).truncation, evaluate(model, d_new, opt).truncation);
    const auto base = evaluate_at(model, d, n_max);
    const auto chain_new = build_chain(model, d_new, n_max);
    const auto pi_new = stationary_distribution(chain_new).pi;

    double sum = 0, carry = 0;
    for (int n = 0; n <= n_max; ++n) {
        const auto& a = d(n);
        const auto& b = d_new(n);
        if (a == b) continue;
        const double G_n = n == 0 ? 0.0 : base.prf(n);
        double inner = 0;
        for (std::size_t k = 0; k < model.group_count(); ++k) {
            const auto& g = model.groups[k];
            inner += (b[k] - a[k]) * (model.operating_weight * g.cost_rate - g.service_rate * G_n);
        }
        const double term = pi_new[static_cast<std::size_t>(n)] * inner;
        const double t = sum + term;
        carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return sum + carry;
}

// ---------------------------------------------------------------------------
// Relative value iteration on the uniformized chain

struct ValueIterationResult {
    std::vector<double> g;      // g(0) = 0
    double eta = 0;
    int sweeps = 0;
    double worst_increment = 0; // min over sweeps/states of Δg / max(1, max|g|)
    double worst_convexity = 0; // min over sweeps/states of Δ²g / max(1, max|g|)
};

// Λ g_{l+1}(n) = min_m { f(n,m) - η_l + Σ B(n,n'|m) g_l(n') + Λ g_l(n) }, Λ = λ + Σ M_k μ_k,
// with η_l fixing g_{l+1}(0) = 0. The state N continues g linearly
// (g(N+1) = 2g(N) - g(N-1)), which keeps every iterate increasing and convex.
// Stops when the span of g_{l+1} - g_l drops below epsilon.
inline ValueIterationResult value_iteration(const QueueModel& model, int n_max, double epsilon = 1e-10,
                                            int max_sweeps = 2'000'000) {
    if (n_max < 2) throw DomainError("value iteration needs at least three states");
    const double lambda = model.arrival_rate;
    const double Lambda = lambda + model.capacity();
    const auto N = static_cast<std::size_t>(n_max);

    std::vector<double> h(N + 1);
    for (std::size_t n = 0; n <= N; ++n) h[n] = model.holding(static_cast<int>(n));

    ValueIterationResult out;
    std::vector<double> g(N + 1, 0.0), next(N + 1);
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        for (std::size_t n = 0; n <= N; ++n) {
            const double up = n < N ? g[n + 1] : 2 * g[N] - g[N - 1];
            double best = h[n] + lambda * up + (Lambda - lambda) * g[n];
            if (n > 0) {
                const Action m = ilp_greedy(model, static_cast<int>(n), g[n] - g[n - 1]);
                const double rate = m.service_rate(model);
                best += model.operating_weight * m.operating_cost(model) + rate * (g[n - 1] - g[n]);
            }
            next[n] = best;
        }
        const double eta = next[0] - Lambda * g[0];
        const double base = next[0];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, scale = 1;
        for (std::size_t n = 0; n <= N; ++n) {
            next[n] = (next[n] - base) / Lambda;
            lo = std::min(lo, next[n] - g[n]);
            hi = std::max(hi, next[n] - g[n]);
            scale = std::max(scale, std::abs(next[n]));
        }
        for (std::size_t n = 1; n <= N; ++n) {
            out.worst_increment = std::min(out.worst_increment, (next[n] - next[n - 1]) / scale);
            if (n >= 2) {
                out.worst_convexity =
                    std::min(out.worst_convexity, (next[n] - 2 * next[n - 1] + next[n - 2]) / scale);
            }
        }
        g.swap(next);
        out.eta = eta;
        out.sweeps = sweep;
        if (hi - lo < epsilon) {
            out.g = std::move(g);
            return out;
        }
    }
    throw NonConvergenceError("value iteration did not converge within " + std::to_string(max_sweeps) + " sweeps",
                              OptimizationTrace{});
}

// ---------------------------------------------------------------------------
// Exhaustive threshold search

struct BruteForceResult {
    ThresholdPolicy best;
    double eta = std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
};

// Number of nondecreasing K-vectors with entries in [1, bound].
inline double threshold_vector_count(int K, int bound) {
    double count = 1;
    for (int i = 1; i <= K; ++i) count = count * (bound - 1 + i) / i;
    return count;
}

// Every nondecreasing θ ≤ bound in c/μ order, evaluated exactly; each policy
// is visited once through its canonical representative.
inline BruteForceResult brute_force_thresholds(const QueueModel& model, int theta_bound,
                                               const EvalOptions& opt = {}, double guard = 1e6) {
    const auto check = validate(model);
    if (!check.ok()) throw DomainError("invalid model: " + check.summary());
    const int K = static_cast<int>(model.group_count());
    if (theta_bound < 1) throw DomainError("theta bound must be >= 1");
    if (threshold_vector_count(K, theta_bound) > guard) {
        throw GuardError("threshold enumeration exceeds " + std::to_string(static_cast<long long>(guard)) +
                         " vectors");
    }
    const auto order = cmu_order(model);
    BruteForceResult out;
    ThresholdPolicy theta{std::vector<int>(static_cast<std::size_t>(K), 1), order};

    std::function<void(int, int, int)> visit = [&](int i, int prev, int before) {
        if (i == K) {
            const auto report = evaluate(model, threshold_to_policy(model, theta), opt);
            ++out.evaluated;
            if (report.eta < out.eta - 1e-12 * std::max(1.0, std::abs(report.eta))) {
                out.eta = report.eta;
                out.best = theta;
            }
            return;
        }
        const int lo = std::max(prev, before + 1);
        const int hi = std::max(theta_bound, lo);
        for (int t = lo; t <= hi; ++t) {
            theta.thresholds[static_cast<std::size_t>(i)] = t;
            visit(i + 1, t, before + model.groups[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].servers);
        }
    };
    visit(0, 1, 0);
    return out;
}

} // namespace gsq
