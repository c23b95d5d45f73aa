// Thresholds under the c/mu rule, checked against simulation.

#include "gsq/gsq.hpp"

#include <cstdio>

int main() {
    gsq::QueueModel m;
    m.arrival_rate = 10;
    m.groups = {{3, 6, 7}, {4, 4, 8}, {3, 2, 5}};
    m.holding = gsq::HoldingCost::linear(1);

    const auto sol = gsq::algorithm2(m);
    const auto theta = sol.thresholds.by_group();
    std::printf("thresholds (by group): %d %d %d\n", theta[0], theta[1], theta[2]);
    std::printf("eta* = %.6f after %d iterations\n", sol.report.eta, sol.trace.iteration_count());

    gsq::SimConfig cfg;
    cfg.horizon = 2e5;
    cfg.replications = 4;
    const auto est = gsq::simulate(m, sol.policy, cfg);
    std::printf("simulated: %.4f +- %.4f (%s)\n", est.eta_hat, est.ci_halfwidth,
                est.covers(sol.report.eta) ? "covers" : "misses");
    return 0;
}
