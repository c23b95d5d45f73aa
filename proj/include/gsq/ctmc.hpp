#pragma once

// Policy evaluation on a truncated birth-death chain: stationary distribution,
// average cost, performance potentials g and realization factors
// G(n) = g(n) - g(n-1).

#include "gsq/error.hpp"
#include "gsq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gsq {

struct BirthDeathChain {
    double birth_rate = 0;            // λ, every state except the truncation boundary
    std::vector<double> death_rates;  // d(n)·μ for n in [0, N], death_rates[0] = 0
    int frontier = 0;                 // n̄ of the policy the chain was built from

    int truncation() const { return static_cast<int>(death_rates.size()) - 1; }
    std::size_t size() const { return death_rates.size(); }

    // B(n, n+1); zero on the reflecting boundary N.
    double up_rate(int n) const { return n < truncation() ? birth_rate : 0.0; }
    double down_rate(int n) const { return death_rates[static_cast<std::size_t>(n)]; }
};

inline BirthDeathChain build_chain(const QueueModel& model, const Policy& policy, int n_max) {
    if (n_max < policy.frontier()) {
        throw TruncationError("truncation level " + std::to_string(n_max) + " is below the policy frontier " +
                              std::to_string(policy.frontier()));
    }
    BirthDeathChain chain;
    chain.birth_rate = model.arrival_rate;
    chain.frontier = policy.frontier();
    chain.death_rates.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) {
        chain.death_rates[static_cast<std::size_t>(n)] = n == 0 ? 0.0 : policy(n).service_rate(model);
    }
    const double tail_rate = chain.death_rates.back();
    if (!(tail_rate > chain.birth_rate)) {
        throw StabilityError("policy tail service rate " + std::to_string(tail_rate) +
                             " does not exceed the arrival rate " + std::to_string(chain.birth_rate));
    }
    return chain;
}

// f(n, d(n)) for n in [0, n_max]
inline std::vector<double> cost_vector(const QueueModel& model, const Policy& policy, int n_max) {
    std::vector<double> f(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) f[static_cast<std::size_t>(n)] = total_cost_rate(model, n, policy(n));
    return f;
}

// States below this one are transient (some death rate above 0 vanishes).
inline int first_recurrent_state(const BirthDeathChain& chain) {
    int first = 0;
    for (int n = 1; n <= chain.truncation(); ++n) {
        if (chain.down_rate(n) <= 0) first = n;
    }
    return first;
}

struct Stationary {
    std::vector<double> pi;
    double tail_mass = 0;  // geometric estimate of the mass the untruncated chain puts beyond N
    int first_recurrent = 0;
};

// Product form π(n) ∝ Π_{j≤n} λ / (d(j)μ), accumulated in log space.
inline Stationary stationary_distribution(const BirthDeathChain& chain) {
    const int top = chain.truncation();
    if (top < 0) throw SolverError("empty chain");
    if (top > 0 && chain.down_rate(top) <= 0) {
        throw SolverError("stationary distribution diverges: no service at the truncation boundary");
    }
    Stationary out;
    out.first_recurrent = first_recurrent_state(chain);
    const auto n0 = static_cast<std::size_t>(out.first_recurrent);

    std::vector<double> logw(chain.size(), -std::numeric_limits<double>::infinity());
    logw[n0] = 0.0;
    const double log_birth = std::log(chain.birth_rate);
    for (std::size_t n = n0 + 1; n < chain.size(); ++n) {
        logw[n] = logw[n - 1] + log_birth - std::log(chain.death_rates[n]);
    }
    const double peak = *std::max_element(logw.begin() + static_cast<std::ptrdiff_t>(n0), logw.end());

    out.pi.assign(chain.size(), 0.0);
    double total = 0;
    for (std::size_t n = n0; n < chain.size(); ++n) {
        out.pi[n] = std::exp(logw[n] - peak);
        total += out.pi[n];
    }
    for (double& p : out.pi) p /= total;

    const double rho = chain.birth_rate / chain.death_rates.back();
    out.tail_mass = rho < 1 ? out.pi.back() * rho / (1 - rho) : std::numeric_limits<double>::infinity();
    return out;
}

// Neumaier-compensated Σ a_i b_i
inline double compensated_dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0, carry = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double term = a[i] * b[i];
        const double t = sum + term;
        carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    }
    return sum + carry;
}

inline double average_cost(std::span<const double> pi, std::span<const double> cost) {
    return compensated_dot(pi, cost);
}

inline double average_cost(const QueueModel& model, const Policy& policy, std::span<const double> pi) {
    const auto f = cost_vector(model, policy, static_cast<int>(pi.size()) - 1);
    return average_cost(pi, f);
}

// G(n), n in [1, N], G[0] = 0 as a placeholder.
//
// Numerically this is λπ(n)G(n+1) = Σ_{j≤n} π(j)(η - f(j)). The lower sum is used
// up to the stationary median; above it the equal upper tail
// Σ_{j>n} π(j)(f(j) - η) is accumulated backwards, where every step multiplies
// by λ/d(j)μ < 1. Transient states (π = 0) use the forward recursion.
inline std::vector<double> prf_tailsum(const BirthDeathChain& chain, std::span<const double> cost,
                                       std::span<const double> pi, double eta) {
    const int top = chain.truncation();
    const double lambda = chain.birth_rate;
    std::vector<double> G(chain.size(), 0.0);
    if (top == 0) return G;

    const int n0 = first_recurrent_state(chain);
    // transient prefix
    for (int n = 0; n < n0; ++n) {
        const double prev = n == 0 ? 0.0 : G[static_cast<std::size_t>(n)];
        G[static_cast<std::size_t>(n) + 1] = (chain.down_rate(n) * prev + eta - cost[static_cast<std::size_t>(n)]) / lambda;
    }

    int split = top;
    double mass = 0, lower = 0;
    for (int n = n0; n < top; ++n) {
        const auto i = static_cast<std::size_t>(n);
        mass += pi[i];
        if (mass > 0.5) {
            split = n;
            break;
        }
        lower += pi[i] * (eta - cost[i]);
        G[i + 1] = lower / (lambda * pi[i]);
    }
    // T(n) = Σ_{j>n} (π(j)/π(n)) (f(j) - η)
    double tail = 0;
    for (int n = top - 1; n >= split; --n) {
        const auto i = static_cast<std::size_t>(n);
        tail = (lambda / chain.death_rates[i + 1]) * ((cost[i + 1] - eta) + tail);
        G[i + 1] = tail / lambda;
    }
    return G;
}

inline std::vector<double> prf_tailsum(const QueueModel& model, const Policy& policy, std::span<const double> pi,
                                       double eta) {
    const int n_max = static_cast<int>(pi.size()) - 1;
    const auto chain = build_chain(model, policy, n_max);
    const auto f = cost_vector(model, policy, n_max);
    return prf_tailsum(chain, f, pi, eta);
}

// g with g(0) = 0, the prefix sums of G.
inline std::vector<double> potentials_from_prf(std::span<const double> G) {
    std::vector<double> g(G.size(), 0.0);
    for (std::size_t n = 1; n < G.size(); ++n) g[n] = g[n - 1] + G[n];
    return g;
}

// Solves the truncated Poisson equation f - η1 + Bg = 0 with g(0) = 0.
inline std::vector<double> potentials(const QueueModel& model, const Policy& policy, std::span<const double> pi,
                                      double eta) {
    return potentials_from_prf(prf_tailsum(model, policy, pi, eta));
}

// Forward recursion G(n+1) = (d(n)μ/λ)G(n) + (η - f(n))/λ, for n in [1, n_hi].
// Exact algebra, but it multiplies η's rounding error by Π d(j)μ/λ; see
// prf_forward.hpp for the extended-precision variant.
template <class Real>
std::vector<Real> prf_forward(const BirthDeathChain& chain, std::span<const double> cost, const Real& eta, int n_hi) {
    n_hi = std::min(n_hi, chain.truncation());
    std::vector<Real> G(static_cast<std::size_t>(std::max(n_hi, 0)) + 1, Real(0));
    if (n_hi < 1) return G;
    const Real lambda(chain.birth_rate);
    G[1] = (eta - Real(cost[0])) / lambda;
    for (int n = 1; n < n_hi; ++n) {
        const auto i = static_cast<std::size_t>(n);
        G[i + 1] = (Real(chain.death_rates[i]) * G[i] + (eta - Real(cost[i]))) / lambda;
    }
    return G;
}

inline std::vector<double> prf_forward(const QueueModel& model, const Policy& policy, double eta, int n_max) {
    const auto chain = build_chain(model, policy, n_max);
    const auto f = cost_vector(model, policy, n_max);
    return prf_forward<double>(chain, f, eta, n_max);
}

// max_n |(πB)(n)| / max(λ, max d(n)μ)
inline double global_balance_residual(const BirthDeathChain& chain, std::span<const double> pi) {
    const int top = chain.truncation();
    double scale = chain.birth_rate;
    for (double d : chain.death_rates) scale = std::max(scale, d);
    double worst = 0;
    for (int n = 0; n <= top; ++n) {
        const auto i = static_cast<std::size_t>(n);
        double flow = -(chain.up_rate(n) + chain.down_rate(n)) * pi[i];
        if (n > 0) flow += chain.up_rate(n - 1) * pi[i - 1];
        if (n < top) flow += chain.down_rate(n + 1) * pi[i + 1];
        worst = std::max(worst, std::abs(flow));
    }
    return worst / scale;
}

// max over all rows of |f(n) - η + (Bg)(n)| / max(1, |η|)
inline double poisson_residual(const BirthDeathChain& chain, std::span<const double> cost, double eta,
                               std::span<const double> g) {
    const int top = chain.truncation();
    double worst = 0;
    for (int n = 0; n <= top; ++n) {
        const auto i = static_cast<std::size_t>(n);
        double r = cost[i] - eta;
        if (n < top) r += chain.up_rate(n) * (g[i + 1] - g[i]);
        if (n > 0) r -= chain.down_rate(n) * (g[i] - g[i - 1]);
        worst = std::max(worst, std::abs(r));
    }
    return worst / std::max(1.0, std::abs(eta));
}

struct EvalOptions {
    int truncation = 0;            // fixed N; 0 selects adaptive growth
    double tail_tolerance = 1e-12;
    double eta_tolerance = 1e-9;   // relative change of η between consecutive levels
    int reliable_to = 0;           // G must be trustworthy up to this state
    int initial_margin = 50;       // first level is n̄ + margin
    int max_truncation = 1 << 22;
};

struct SolveReport {
    std::vector<double> pi;
    double eta = 0;
    std::vector<double> g;     // g(0) = 0
    std::vector<double> G;     // G[n] = g(n) - g(n-1), G[0] = 0
    std::vector<double> cost;  // f(n, d(n))
    double tail_mass = 0;
    double mean_queue_length = 0;
    int truncation = 0;
    int frontier = 0;
    int reliable_limit = 0;    // largest n where truncation does not bias G(n)

    double prf(int n) const { return G.at(static_cast<std::size_t>(n)); }
};

// States within this distance of the boundary see the reflection in G.
inline int boundary_layer(const BirthDeathChain& chain) {
    const double rho = chain.birth_rate / chain.death_rates.back();
    if (rho <= 0) return 1;
    return static_cast<int>(std::ceil(std::log(1e-14) / std::log(rho))) + 1;
}

inline SolveReport evaluate_at(const QueueModel& model, const Policy& policy, int n_max) {
    const auto chain = build_chain(model, policy, n_max);
    SolveReport r;
    r.cost = cost_vector(model, policy, n_max);
    auto st = stationary_distribution(chain);
    r.pi = std::move(st.pi);
    r.tail_mass = st.tail_mass;
    r.eta = average_cost(r.pi, r.cost);
    r.G = prf_tailsum(chain, r.cost, r.pi, r.eta);
    r.g = potentials_from_prf(r.G);
    r.truncation = n_max;
    r.frontier = policy.frontier();
    r.reliable_limit = std::max(0, n_max - boundary_layer(chain));
    double L = 0;
    for (std::size_t n = 0; n < r.pi.size(); ++n) L += static_cast<double>(n) * r.pi[n];
    r.mean_queue_length = L;
    return r;
}

// Exact evaluation with adaptive truncation: N doubles from n̄ + margin until
// the tail mass and the change of η between levels are both negligible.
inline SolveReport evaluate(const QueueModel& model, const Policy& policy, const EvalOptions& opt = {}) {
    if (opt.truncation > 0) return evaluate_at(model, policy, opt.truncation);

    int n_max = std::max({policy.frontier() + opt.initial_margin, opt.reliable_to + opt.initial_margin, 8});
    SolveReport prev;
    bool have_prev = false;
    while (true) {
        SolveReport cur = evaluate_at(model, policy, n_max);
        const bool tail_ok = cur.tail_mass < opt.tail_tolerance;
        const bool reach_ok = cur.reliable_limit >= std::max(policy.frontier() + 10, opt.reliable_to);
        const bool eta_ok =
            have_prev && std::abs(cur.eta - prev.eta) <= opt.eta_tolerance * std::max(1.0, std::abs(cur.eta));
        if (tail_ok && reach_ok && eta_ok) return cur;
        if (n_max >= opt.max_truncation) {
            throw TruncationError("adaptive truncation exceeded " + std::to_string(opt.max_truncation) + " states");
        }
        prev = std::move(cur);
        have_prev = tail_ok && reach_ok;
        n_max = std::min(2 * n_max, opt.max_truncation);
    }
}

} // namespace gsq
