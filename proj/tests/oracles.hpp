#pragma once

// Independent references for the tests. Nothing here reuses the library's
// product-form or tail-sum code.

#include "gsq/model.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

struct Dense {
    std::vector<double> pi, g, G;
    double eta = 0;
};

// Generator with the up-rate removed at N; π from πB = 0, Σπ = 1 and g from
// B g = η·1 - f with g(0) = 0, both by LU on the full dense system.
// The system amplifies rounding by about (max rate / λ)^n, so it is solved
// in 50-digit arithmetic.
using Wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<50>, boost::multiprecision::et_off>;
using WideMatrix = Eigen::Matrix<Wide, Eigen::Dynamic, Eigen::Dynamic>;
using WideVector = Eigen::Matrix<Wide, Eigen::Dynamic, 1>;

inline Dense poisson_solve(const gsq::QueueModel& model, const gsq::Policy& policy, int N) {
    const int S = N + 1;
    WideMatrix B = WideMatrix::Zero(S, S);
    WideVector f(S);
    for (int n = 0; n < S; ++n) {
        const auto& a = policy(n);
        Wide down = 0, op = 0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            down += a[k] * Wide(model.groups[k].service_rate);
            op += a[k] * Wide(model.groups[k].cost_rate);
        }
        f(n) = Wide(model.holding(n)) + Wide(model.operating_weight) * op;
        if (n < N) B(n, n + 1) = model.arrival_rate;
        if (n > 0) B(n, n - 1) = down;
        B(n, n) = -(B.row(n).sum());
    }
    WideMatrix A = B.transpose();
    A.row(S - 1).setOnes();
    WideVector rhs = WideVector::Zero(S);
    rhs(S - 1) = 1;
    WideVector pi = A.fullPivLu().solve(rhs);

    Dense out;
    const Wide eta = pi.dot(f);
    out.eta = static_cast<double>(eta);
    // unknowns g(1..N); rows 0..N-1 of B g = η - f
    WideMatrix C = B.block(0, 1, N, N);
    WideVector r = (WideVector::Constant(S, eta) - f).head(N);
    WideVector tail = C.fullPivLu().solve(r);

    for (int n = 0; n < S; ++n) out.pi.push_back(static_cast<double>(pi(n)));
    out.g.assign(1, 0.0);
    for (int n = 0; n < N; ++n) out.g.push_back(static_cast<double>(tail(n)));
    out.G.assign(1, 0.0);
    out.G.push_back(static_cast<double>(tail(0)));
    for (int n = 1; n < N; ++n) out.G.push_back(static_cast<double>(tail(n) - tail(n - 1)));
    return out;
}

// min over all feasible m of Σ_k m_k (v·c_k - μ_k G_n), by enumeration.
// Exact minimum of Σ (v c_k - μ_k G) x_k over 0 ≤ x_k ≤ M_k, Σ x_k ≤ n, by dynamic
// programming over groups and the number of servers used so far.
inline double ilp_minimum(const gsq::QueueModel& model, int n, double G_n) {
    const int budget = std::min(n, model.total_servers());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(static_cast<std::size_t>(budget) + 1, inf), next;
    best[0] = 0;
    for (const auto& grp : model.groups) {
        const double unit = model.operating_weight * grp.cost_rate - grp.service_rate * G_n;
        next.assign(best.size(), inf);
        for (int used = 0; used <= budget; ++used) {
            if (best[static_cast<std::size_t>(used)] == inf) continue;
            for (int x = 0; x <= grp.servers && used + x <= budget; ++x) {
                auto& slot = next[static_cast<std::size_t>(used + x)];
                slot = std::min(slot, best[static_cast<std::size_t>(used)] + x * unit);
            }
        }
        best.swap(next);
    }
    return *std::min_element(best.begin(), best.end());
}

inline double action_value(const gsq::QueueModel& model, const gsq::Action& a, double G_n) {
    double value = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        value += a[k] * (model.operating_weight * model.groups[k].cost_rate - model.groups[k].service_rate * G_n);
    }
    return value;
}

// M/M/1 served by one always-available server at rate mu, cost c while busy.
struct MM1 {
    double lambda, mu, c;
    double rho() const { return lambda / mu; }
    double pi(int n) const { return (1 - rho()) * std::pow(rho(), n); }
    double eta() const { return rho() / (1 - rho()) + c * rho(); }
};

inline gsq::QueueModel mm1_model(double lambda = 1, double mu = 2, double c = 3) {
    gsq::QueueModel m;
    m.arrival_rate = lambda;
    m.groups = {{1, mu, c}};
    m.holding = gsq::HoldingCost::linear(1);
    return m;
}

// Random small instance: K ≤ max_groups, M_k ≤ max_servers, load in [0.2, 0.85].
// With scale_economies, μ is decreasing and c/μ increasing along the group index.
inline gsq::QueueModel random_model(std::mt19937_64& rng, int max_groups = 4, int max_servers = 5,
                                    bool scale_economies = false) {
    std::uniform_int_distribution<int> groups(1, max_groups), servers(1, max_servers);
    std::uniform_real_distribution<double> rate(0.5, 6.0), ratio(0.1, 3.0), load(0.2, 0.85), coin(0, 1);
    gsq::QueueModel m;
    const int K = groups(rng);
    std::vector<double> mu, r;
    for (int k = 0; k < K; ++k) {
        mu.push_back(rate(rng));
        r.push_back(ratio(rng));
    }
    if (scale_economies) {
        std::sort(mu.begin(), mu.end(), std::greater<>());
        std::sort(r.begin(), r.end());
    }
    for (int k = 0; k < K; ++k) m.groups.push_back({servers(rng), mu[k], r[k] * mu[k]});
    m.arrival_rate = load(rng) * m.capacity();
    m.holding = coin(rng) < 0.7 ? gsq::HoldingCost::linear(0.5 + 1.5 * coin(rng))
                                : gsq::HoldingCost::power(0.05 + 0.3 * coin(rng), 2.0, 0.0);
    m.operating_weight = 0.5 + coin(rng);
    return m;
}

} // namespace oracle
