#pragma once

// Forward PRF recursion evaluated in enough precision to survive its
// error amplification. π and η are recomputed in the same wide type so the
// only input is the chain and the cost vector.

#include "gsq/ctmc.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <span>
#include <vector>

namespace gsq {

struct ForwardPrf {
    std::vector<double> G;  // G[n] for n in [0, n_hi], G[0] = 0
    double amplification_log10 = 0;
    int digits = 0;         // decimal digits of the arithmetic used
};

// log10 of max_{n ≤ n_hi} Π_{j=1..n} d(j)μ/λ (clamped at 0).
inline double forward_amplification_log10(const BirthDeathChain& chain, int n_hi) {
    double cumulative = 0, worst = 0;
    const double log_birth = std::log10(chain.birth_rate);
    for (int n = 1; n <= std::min(n_hi, chain.truncation()); ++n) {
        const double d = chain.down_rate(n);
        if (d <= 0) {
            cumulative = 0;  // recursion restarts: G(n+1) no longer depends on G(n)
            continue;
        }
        cumulative += std::log10(d) - log_birth;
        worst = std::max(worst, cumulative);
    }
    return worst;
}

namespace detail {

template <class Real>
std::vector<double> forward_prf_in(const BirthDeathChain& chain, std::span<const double> cost, int n_hi) {
    const int n0 = first_recurrent_state(chain);
    const Real lambda(chain.birth_rate);
    Real weight(1), total(1), weighted_cost(cost[static_cast<std::size_t>(n0)]);
    for (int n = n0 + 1; n <= chain.truncation(); ++n) {
        const auto i = static_cast<std::size_t>(n);
        weight = weight * lambda / Real(chain.death_rates[i]);
        total += weight;
        weighted_cost += weight * Real(cost[i]);
    }
    const Real eta = weighted_cost / total;
    const auto wide = prf_forward<Real>(chain, cost, eta, n_hi);
    std::vector<double> out(wide.size());
    for (std::size_t i = 0; i < wide.size(); ++i) out[i] = static_cast<double>(wide[i]);
    return out;
}

} // namespace detail

// G(n) on [1, n_hi] via the forward recursion in the narrowest arithmetic
// that keeps about 16 significant digits after amplification.
inline ForwardPrf prf_forward_extended(const BirthDeathChain& chain, std::span<const double> cost, int n_hi) {
    using namespace boost::multiprecision;
    ForwardPrf out;
    out.amplification_log10 = forward_amplification_log10(chain, n_hi);
    const double needed = out.amplification_log10 + 18;
    if (needed <= 50) {
        out.digits = 50;
        out.G = detail::forward_prf_in<cpp_bin_float_50>(chain, cost, n_hi);
    } else if (needed <= 100) {
        out.digits = 100;
        out.G = detail::forward_prf_in<cpp_bin_float_100>(chain, cost, n_hi);
    } else if (needed <= 300) {
        out.digits = 300;
        out.G = detail::forward_prf_in<number<cpp_bin_float<300>>>(chain, cost, n_hi);
    } else if (needed <= 1000) {
        out.digits = 1000;
        out.G = detail::forward_prf_in<number<cpp_bin_float<1000>>>(chain, cost, n_hi);
    } else {
        throw SolverError("forward PRF recursion needs more than 1000 digits");
    }
    return out;
}

inline ForwardPrf prf_forward_extended(const QueueModel& model, const Policy& policy, int n_max, int n_hi) {
    const auto chain = build_chain(model, policy, n_max);
    const auto f = cost_vector(model, policy, n_max);
    return prf_forward_extended(chain, f, n_hi);
}

// max_{n in [1, n_hi]} |G_fwd(n) - G(n)| / max(1, |G(n)|)
inline double prf_disagreement(std::span<const double> forward, std::span<const double> reference, int n_hi) {
    double worst = 0;
    for (int n = 1; n <= n_hi && n < static_cast<int>(forward.size()) && n < static_cast<int>(reference.size()); ++n) {
        const auto i = static_cast<std::size_t>(n);
        worst = std::max(worst, std::abs(forward[i] - reference[i]) / std::max(1.0, std::abs(reference[i])));
    }
    return worst;
}

} // namespace gsq
