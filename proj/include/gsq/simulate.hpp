#pragma once

// Event-driven simulation of the queue under a fixed policy. One exponential
// clock at rate λ + d(n)μ, thinned into arrival or departure; memorylessness
// makes this equivalent to per-server clocks with free migration.

#include "gsq/error.hpp"
#include "gsq/model.hpp"
#include "gsq/optimize.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gsq {

inline constexpr const char* simulation_rng_name = "mt19937_64, replication seeds by splitmix64";

struct SimConfig {
    double horizon = 1e6;
    std::optional<double> warmup;  // defaults to 10% of the horizon
    int replications = 1;
    std::uint64_t seed = 1;
    int batch_count = 20;
    bool parallel = true;
    double guard_factor = 100;      // queue above guard_factor·max(n̄,1) counts as unstable

    double warmup_time() const { return warmup.value_or(0.1 * horizon); }

    void check() const {
        const double w = warmup_time();
        if (!(horizon > 0) || !std::isfinite(horizon)) throw DomainError("simulation horizon must be positive");
        if (!(w >= 0) || !(horizon > w)) throw DomainError("simulation needs horizon > warmup >= 0");
        if (replications < 1) throw DomainError("simulation needs at least one replication");
        if (batch_count < 2) throw DomainError("simulation needs batch_count >= 2");
    }
};

struct SimEstimate {
    double eta_hat = 0;
    double ci_halfwidth = 0;
    double mean_queue_length = 0;
    double queue_ci_halfwidth = 0;
    std::vector<double> replication_eta;
    long long events = 0;
    int max_queue = 0;
    std::string rng = simulation_rng_name;

    bool covers(double value) const { return std::abs(value - eta_hat) <= ci_halfwidth; }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace detail {

struct ReplicationOutput {
    std::vector<double> cost_batches;
    std::vector<double> queue_batches;
    long long events = 0;
    int max_queue = 0;
};

// uniform on [0, 1) with 53 random bits
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline ReplicationOutput simulate_replication(const QueueModel& model, const Policy& policy, const SimConfig& cfg,
                                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double lambda = model.arrival_rate;
    const int frontier = policy.frontier();
    const int guard = static_cast<int>(cfg.guard_factor * std::max(frontier, 1));

    std::vector<double> rate_table, cost_table;
    for (int n = 0; n <= frontier; ++n) {
        rate_table.push_back(policy(n).service_rate(model));
        cost_table.push_back(total_cost_rate(model, n, policy(n)));
    }
    const Action full = all_on(model);
    const double full_rate = full.service_rate(model);
    const double full_operating = model.operating_weight * full.operating_cost(model);
    auto death = [&](int n) { return n <= frontier ? rate_table[static_cast<std::size_t>(n)] : full_rate; };
    auto cost = [&](int n) {
        return n <= frontier ? cost_table[static_cast<std::size_t>(n)] : model.holding(n) + full_operating;
    };

    const double warmup = cfg.warmup_time();
    const double batch_length = (cfg.horizon - warmup) / cfg.batch_count;
    ReplicationOutput out;
    out.cost_batches.assign(static_cast<std::size_t>(cfg.batch_count), 0.0);
    out.queue_batches.assign(static_cast<std::size_t>(cfg.batch_count), 0.0);

    // Credits the interval [from, to) spent in state n to the batches it overlaps.
    auto accumulate = [&](double from, double to, int n) {
        from = std::max(from, warmup);
        if (to <= from) return;
        const double c = cost(n);
        while (from < to) {
            auto b = static_cast<std::size_t>((from - warmup) / batch_length);
            if (b >= out.cost_batches.size()) break;
            const double end = std::min(to, warmup + batch_length * static_cast<double>(b + 1));
            out.cost_batches[b] += c * (end - from);
            out.queue_batches[b] += n * (end - from);
            if (end <= from) break;
            from = end;
        }
    };

    int n = 0;
    double t = 0;
    while (t < cfg.horizon) {
        const double d = death(n);
        const double rate = lambda + d;
        const double dt = -std::log1p(-unit_uniform(rng)) / rate;
        const double next = std::min(t + dt, cfg.horizon);
        accumulate(t, next, n);
        t = next;
        if (t >= cfg.horizon) break;
        ++out.events;
        if (unit_uniform(rng) * rate < lambda) {
            ++n;
            out.max_queue = std::max(out.max_queue, n);
            if (n > guard) {
                throw StabilityError("simulated queue exceeded " + std::to_string(guard) +
                                     " customers; the policy looks unstable");
            }
        } else {
            --n;
        }
    }
    for (auto& x : out.cost_batches) x /= batch_length;
    for (auto& x : out.queue_batches) x /= batch_length;
    return out;
}

inline std::pair<double, double> mean_and_halfwidth(const std::vector<double>& xs) {
    const auto count = static_cast<double>(xs.size());
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= count;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (count - 1));
    boost::math::students_t_distribution<double> t(count - 1);
    return {mean, boost::math::quantile(t, 0.975) * sd / std::sqrt(count)};
}

} // namespace detail

// Time-average cost after warmup with a 95% batch-means interval; batches
// from all replications are pooled.
inline SimEstimate simulate(const QueueModel& model, const Policy& policy, const SimConfig& cfg = {}) {
    cfg.check();
    const auto check = validate(model);
    if (!check.ok()) throw DomainError("invalid model: " + check.summary());

    std::vector<detail::ReplicationOutput> reps(static_cast<std::size_t>(cfg.replications));
    auto seed_of = [&](int r) { return splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(r))); };
    if (cfg.parallel && cfg.replications > 1) {
        std::vector<std::future<detail::ReplicationOutput>> jobs;
        for (int r = 0; r < cfg.replications; ++r) {
            jobs.push_back(std::async(std::launch::async, [&, r] {
                return detail::simulate_replication(model, policy, cfg, seed_of(r));
            }));
        }
        for (std::size_t r = 0; r < jobs.size(); ++r) reps[r] = jobs[r].get();
    } else {
        for (int r = 0; r < cfg.replications; ++r) {
            reps[static_cast<std::size_t>(r)] = detail::simulate_replication(model, policy, cfg, seed_of(r));
        }
    }

    SimEstimate est;
    std::vector<double> cost_batches, queue_batches;
    for (const auto& rep : reps) {
        cost_batches.insert(cost_batches.end(), rep.cost_batches.begin(), rep.cost_batches.end());
        queue_batches.insert(queue_batches.end(), rep.queue_batches.begin(), rep.queue_batches.end());
        double m = 0;
        for (double x : rep.cost_batches) m += x;
        est.replication_eta.push_back(m / static_cast<double>(rep.cost_batches.size()));
        est.events += rep.events;
        est.max_queue = std::max(est.max_queue, rep.max_queue);
    }
    std::tie(est.eta_hat, est.ci_halfwidth) = detail::mean_and_halfwidth(cost_batches);
    std::tie(est.mean_queue_length, est.queue_ci_halfwidth) = detail::mean_and_halfwidth(queue_batches);
    return est;
}

inline SimEstimate simulate(const QueueModel& model, const ThresholdPolicy& theta, const SimConfig& cfg = {}) {
    return simulate(model, threshold_to_policy(model, theta), cfg);
}

} // namespace gsq
