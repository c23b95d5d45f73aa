// Optimize a three-group system without scale economies and print the policy.

#include "gsq/gsq.hpp"

#include <cstdio>

int main() {
    gsq::QueueModel m;
    m.arrival_rate = 10;
    m.groups = {{3, 6, 7}, {4, 4, 4}, {3, 2, 1.8}};
    m.holding = gsq::HoldingCost::linear(1);

    const auto economies = gsq::check_scale_economies(m);
    std::printf("scale economies: %s\n", economies.holds ? "yes" : "no");

    const auto sol = gsq::algorithm1(m);
    for (const auto& it : sol.trace.iterations) {
        std::printf("iteration %d  eta %.6f  frontier %d\n", it.iteration, it.eta, it.frontier);
    }
    std::printf("eta* = %.6f, L = %.4f\n\n", sol.report.eta, sol.report.mean_queue_length);

    std::printf("  n   d(n)        G(n)\n");
    for (int n = 0; n <= sol.policy.frontier() + 2; ++n) {
        const auto& a = sol.policy(n);
        std::printf("%3d   (%d,%d,%d)   %9.4f\n", n, a[0], a[1], a[2], n ? sol.report.prf(n) : 0.0);
    }
    // group 1 switches off between n=5 and n=6 while the total keeps growing
    return 0;
}
