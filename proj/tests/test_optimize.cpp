#include "gsq/optimize.hpp"
#include "oracles.hpp"
#include "properties.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gsq;

namespace {

QueueModel three_groups(double lambda, std::vector<double> c, double v = 1) {
    QueueModel m;
    m.arrival_rate = lambda;
    m.groups = {{3, 6, c[0]}, {4, 4, c[1]}, {3, 2, c[2]}};
    m.holding = HoldingCost::linear(1);
    m.operating_weight = v;
    return m;
}

ThresholdPolicy in_order(std::vector<int> theta) {
    std::vector<int> order(theta.size());
    std::iota(order.begin(), order.end(), 0);
    return {std::move(theta), order};
}

} // namespace

// ---------------------------------------------------------------------------
// ilp_greedy

TEST(IlpGreedy, EmptyStateIdles) {
    const auto m = three_groups(10, {7, 4, 3});
    for (double G : {-5.0, 0.0, 3.0, 100.0}) EXPECT_EQ(ilp_greedy(m, 0, G), (Action{0, 0, 0}));
    EXPECT_THROW(ilp_greedy(m, -1, 1.0), DomainError);
}

TEST(IlpGreedy, CheapestIndexFirst) {
    const auto m = three_groups(10, {7, 8, 5});
    // indices 7-9 = -2, 8-6 = 2, 5-3 = 2
    EXPECT_EQ(ilp_greedy(m, 10, 1.5), (Action{3, 0, 0}));
    EXPECT_NEAR(oracle::action_value(m, ilp_greedy(m, 10, 1.5), 1.5), oracle::ilp_minimum(m, 10, 1.5), 1e-12);
}

TEST(IlpGreedy, ZeroIndexStaysOff) {
    const auto m = three_groups(10, {6, 8, 5});
    EXPECT_EQ(ilp_greedy(m, 5, 1.0), (Action{0, 0, 0}));
    EXPECT_EQ(ilp_greedy(m, 5, 2.0), (Action{3, 0, 0}));
}

TEST(IlpGreedy, OptimalGeneralPolicyIsAllOnFromTwelve) {
    const auto m = three_groups(10, {7, 4, 3});
    const auto sol = algorithm1(m);
    for (int n = 12; n <= sol.report.reliable_limit && n < 60; ++n) {
        EXPECT_EQ(ilp_greedy(m, n, sol.report.prf(n)), (Action{3, 4, 3})) << n;
    }
    EXPECT_NE(ilp_greedy(m, 11, sol.report.prf(11)), (Action{3, 4, 3}));
}

TEST(IlpGreedy, MatchesExhaustiveEnumeration) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> G(-2, 12);
    for (int i = 0; i < 300; ++i) {
        const auto m = oracle::random_model(rng, 4, 5);
        const int n = std::uniform_int_distribution<int>(0, m.total_servers() + 3)(rng);
        const double g = G(rng);
        const auto a = ilp_greedy(m, n, g);
        EXPECT_TRUE(is_feasible(m, n, a));
        EXPECT_NEAR(oracle::action_value(m, a, g), oracle::ilp_minimum(m, n, g), 1e-9);
    }
}

TEST(IndexTable, EconomicSetMatchesSign) {
    const auto m = three_groups(10, {7, 4, 3});
    const auto sol = algorithm1(m);
    const auto rows = index_table(m, sol.report.G, 30);
    ASSERT_EQ(rows.size(), 31u);
    for (std::size_t n = 1; n < rows.size(); ++n) {
        for (std::size_t k = 0; k < 3; ++k) {
            const bool in = std::find(rows[n].economic.begin(), rows[n].economic.end(), static_cast<int>(k)) !=
                            rows[n].economic.end();
            EXPECT_EQ(in, rows[n].index[k] < 0);
        }
        for (std::size_t i = 1; i < 3; ++i) {
            EXPECT_LE(rows[n].index[static_cast<std::size_t>(rows[n].order[i - 1])],
                      rows[n].index[static_cast<std::size_t>(rows[n].order[i])]);
        }
        if (n + 1 < rows.size()) {
            for (int k : rows[n].economic) {
                EXPECT_NE(std::find(rows[n + 1].economic.begin(), rows[n + 1].economic.end(), k),
                          rows[n + 1].economic.end());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// algorithm1

TEST(Algorithm1, GeneralIndexInstance) {
    const auto m = three_groups(10, {7, 4, 3});
    const auto sol = algorithm1(m);
    EXPECT_NEAR(sol.report.eta, 12.5706, 1e-3);
    EXPECT_EQ(sol.policy.frontier(), 12);
    EXPECT_TRUE(sol.trace.converged);
    EXPECT_TRUE(sol.trace.monotone());
    EXPECT_LE(sol.trace.iteration_count(), 6);
    for (int n = 12; n < 200; ++n) EXPECT_EQ(sol.policy(n), (Action{3, 4, 3}));
}

TEST(Algorithm1, NonMonotoneGroupUsage) {
    const auto m = three_groups(10, {7, 4, 1.8});
    const auto sol = algorithm1(m);
    EXPECT_NEAR(sol.report.eta, 12.5659, 1e-3);
    EXPECT_EQ(sol.policy(5), (Action{0, 4, 1}));
    EXPECT_EQ(sol.policy(6), (Action{2, 4, 0}));
    EXPECT_FALSE(props::per_group_monotone(sol.policy, sol.policy.frontier()));
    for (int n = 0; n < sol.policy.frontier() + 10; ++n) EXPECT_LE(sol.policy(n).total(), sol.policy(n + 1).total());
}

TEST(Algorithm1, CheapSlowGroupInstance) {
    EXPECT_NEAR(algorithm1(three_groups(10, {4, 3, 1})).report.eta, 8.4044, 1e-3);
}

TEST(Algorithm1, IterationCapReportsTrace) {
    OptimizeOptions opt;
    opt.max_iterations = 1;
    try {
        algorithm1(three_groups(10, {7, 4, 1.8}), opt);
        FAIL() << "expected non-convergence";
    } catch (const NonConvergenceError& e) {
        EXPECT_EQ(e.trace().iteration_count(), 1);
        EXPECT_FALSE(e.trace().converged);
    }
}

TEST(Algorithm1, RejectsInvalidModel) {
    EXPECT_THROW(algorithm1(three_groups(40, {7, 4, 3})), DomainError);
}

TEST(Algorithm1, FixedTruncationTooSmallIsReported) {
    OptimizeOptions opt;
    opt.eval.truncation = 12;
    EXPECT_THROW(algorithm1(three_groups(10, {7, 8, 5}), opt), TruncationError);
}

// ---------------------------------------------------------------------------
// algorithm2 and thresholds

TEST(Algorithm2, CmuRuleInstance) {
    const auto m = three_groups(10, {7, 8, 5});
    const auto sol = algorithm2(m);
    EXPECT_EQ(sol.thresholds.by_group(), (std::vector<int>{1, 9, 21}));
    EXPECT_NEAR(sol.report.eta, 13.6965, 1e-3);
    EXPECT_FALSE(sol.heuristic);
    EXPECT_TRUE(sol.trace.converged);
    EXPECT_TRUE(sol.trace.monotone());
}

TEST(Algorithm2, HeavyTraffic) {
    EXPECT_EQ(algorithm2(three_groups(39, {7, 8, 5})).thresholds.by_group(), (std::vector<int>{1, 4, 8}));
}

TEST(Algorithm2, SingleGroup) {
    const auto sol = algorithm2(oracle::mm1_model());
    EXPECT_EQ(sol.thresholds.thresholds, std::vector<int>{1});
    EXPECT_NEAR(sol.report.eta, 2.5, 1e-10);
}

TEST(Algorithm2, FlagsHeuristicWithoutScaleEconomies) {
    const auto sol = algorithm2(three_groups(10, {8, 3, 1}));
    EXPECT_TRUE(sol.heuristic);
    EXPECT_EQ(sol.thresholds.by_group(), (std::vector<int>{11, 4, 1}));
    EXPECT_NEAR(sol.report.eta, 10.0615, 1e-3);
}

TEST(Algorithm2, AgreesWithAlgorithm1UnderScaleEconomies) {
    const auto m = three_groups(10, {7, 8, 5});
    const auto a1 = algorithm1(m);
    const auto a2 = algorithm2(m);
    EXPECT_EQ(a1.policy, a2.policy);
    EXPECT_EQ(a1.policy, threshold_to_policy(m, ThresholdPolicy{{1, 9, 21}, {0, 1, 2}}));
}

TEST(ThresholdToPolicy, FillRule) {
    const auto m = three_groups(10, {7, 8, 5});
    const auto p = threshold_to_policy(m, in_order({1, 9, 21}));
    EXPECT_EQ(p(0), (Action{0, 0, 0}));
    EXPECT_EQ(p(2), (Action{2, 0, 0}));
    EXPECT_EQ(p(9), (Action{3, 4, 0}));
    EXPECT_EQ(p(20), (Action{3, 4, 0}));
    EXPECT_EQ(p(21), (Action{3, 4, 3}));
    EXPECT_EQ(p.frontier(), 21);
    const auto q = threshold_to_policy(m, in_order({1, 1, 1}));
    EXPECT_EQ(q.frontier(), 10);
    EXPECT_EQ(q, threshold_to_policy(m, canonical(m, in_order({1, 1, 1}))));
    EXPECT_EQ(canonical(m, in_order({1, 1, 1})).thresholds, (std::vector<int>{1, 4, 8}));
    EXPECT_THROW(threshold_to_policy(m, in_order({2, 1, 3})), DomainError);
}

TEST(ThresholdForm, RecoversThresholdsFromTables) {
    const auto m = three_groups(10, {8, 3, 1});
    const auto sol = algorithm1(m);
    const auto form = threshold_form(m, sol.policy);
    ASSERT_TRUE(form.has_value());
    EXPECT_EQ(*form, (std::vector<int>{11, 1, 5}));
    const auto general = algorithm1(three_groups(10, {7, 4, 1.8}));
    EXPECT_FALSE(threshold_form(three_groups(10, {7, 4, 1.8}), general.policy).has_value());
}

TEST(ScaleEconomies, Detection) {
    auto e = check_scale_economies(three_groups(10, {7, 8, 5}));
    EXPECT_TRUE(e.holds);
    EXPECT_EQ(e.order, (std::vector<int>{0, 1, 2}));
    e = check_scale_economies(three_groups(10, {7, 4, 3}));
    EXPECT_FALSE(e.holds);
    EXPECT_TRUE(check_scale_economies(oracle::mm1_model()).holds);
}

// ---------------------------------------------------------------------------
// performance difference

TEST(PolicyCostDifference, IdenticalPoliciesGiveZero) {
    const auto m = three_groups(10, {7, 4, 3});
    const auto p = threshold_to_policy(m, in_order({1, 5, 9}));
    EXPECT_NEAR(policy_cost_difference(m, p, p), 0, 1e-15);
}

TEST(PolicyCostDifference, MatchesDirectEvaluation) {
    const auto m = three_groups(10, {7, 4, 3});
    const std::vector<std::vector<int>> thetas{{1, 5, 9}, {1, 9, 21}, {2, 6, 6}, {1, 4, 8}, {3, 10, 14}};
    for (const auto& a : thetas) {
        for (const auto& b : thetas) {
            const auto pa = threshold_to_policy(m, in_order(a));
            const auto pb = threshold_to_policy(m, in_order(b));
            const double direct = evaluate(m, pb).eta - evaluate(m, pa).eta;
            EXPECT_NEAR(policy_cost_difference(m, pa, pb), direct, 1e-6);
        }
    }
}

TEST(PolicyCostDifference, ImprovementStepIsNonpositive) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 15; ++i) {
        const auto m = oracle::random_model(rng, 3, 4);
        const auto d = initial_all_on_policy(m);
        auto r = evaluate(m, d);
        const auto d_new = improve_policy(m, d, {}, r);
        EXPECT_LE(policy_cost_difference(m, d, d_new), 1e-9);
        EXPECT_NEAR(policy_cost_difference(m, d, d_new), evaluate(m, d_new).eta - evaluate(m, d).eta, 1e-6);
    }
}

// ---------------------------------------------------------------------------
// value iteration

TEST(ValueIteration, MatchesPolicyIteration) {
    for (auto c : std::vector<std::vector<double>>{{7, 4, 3}, {7, 8, 5}}) {
        const auto m = three_groups(10, c);
        const auto sol = algorithm1(m);
        const auto vi = value_iteration(m, sol.report.truncation);
        EXPECT_NEAR(vi.eta, sol.report.eta, 1e-3);
        EXPECT_GE(vi.worst_increment, -1e-8);
        EXPECT_GE(vi.worst_convexity, -1e-8);
    }
}

TEST(ValueIteration, SingleServerClosedForm) {
    const auto vi = value_iteration(oracle::mm1_model(), 200);
    EXPECT_NEAR(vi.eta, 2.5, 1e-6);
    EXPECT_EQ(vi.g[0], 0);
}

TEST(ValueIteration, SweepCapIsReported) {
    EXPECT_THROW(value_iteration(three_groups(10, {7, 4, 3}), 100, 1e-10, 5), NonConvergenceError);
}

// ---------------------------------------------------------------------------
// brute force

TEST(BruteForce, CmuRuleInstance) {
    const auto bf = brute_force_thresholds(three_groups(10, {7, 8, 5}), 30);
    EXPECT_EQ(bf.best.by_group(), (std::vector<int>{1, 9, 21}));
    EXPECT_NEAR(bf.eta, 13.6965, 1e-3);
}

TEST(BruteForce, SingleGroup) {
    EXPECT_EQ(brute_force_thresholds(oracle::mm1_model(), 10).best.thresholds, std::vector<int>{1});
}

TEST(BruteForce, BestCmuOrderedThresholdWithoutScaleEconomies) {
    const auto bf = brute_force_thresholds(three_groups(10, {8, 3, 1}), 30);
    EXPECT_NEAR(bf.eta, 10.0615, 1e-3);
}

TEST(BruteForce, Guard) {
    QueueModel m;
    for (int k = 0; k < 6; ++k) m.groups.push_back({2, 6.0 - k, 1.0 + k});
    m.arrival_rate = 10;
    EXPECT_THROW(brute_force_thresholds(m, 40), GuardError);
    EXPECT_NEAR(threshold_vector_count(3, 30), 4960, 1e-9);
}

// ---------------------------------------------------------------------------
// properties on random instances

TEST(Properties, GeneralFixedPoints) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 40; ++i) {
        const auto m = oracle::random_model(rng, 4, 5);
        const auto sol = algorithm1(m);
        EXPECT_TRUE(sol.trace.monotone()) << "instance " << i;
        EXPECT_TRUE(sol.trace.converged || sol.trace.cycle_terminated);
        const auto check = props::check_fixed_point(m, sol.policy, sol.report);
        EXPECT_TRUE(check.ok()) << "instance " << i << ": " << check.summary();
        const auto chain = build_chain(m, sol.policy, sol.report.truncation);
        EXPECT_LE(poisson_residual(chain, sol.report.cost, sol.report.eta, sol.report.g), 1e-8);
    }
}

TEST(Properties, ScaleEconomiesFixedPoints) {
    std::mt19937_64 rng(4048);
    for (int i = 0; i < 40; ++i) {
        const auto m = oracle::random_model(rng, 4, 5, true);
        ASSERT_TRUE(check_scale_economies(m).holds);
        const auto a1 = algorithm1(m);
        const auto a2 = algorithm2(m);
        EXPECT_TRUE(a2.trace.monotone());
        EXPECT_EQ(a2.thresholds.thresholds.front(), 1);
        EXPECT_TRUE(std::is_sorted(a2.thresholds.thresholds.begin(), a2.thresholds.thresholds.end()));
        EXPECT_EQ(a1.policy, a2.policy) << "instance " << i;
        EXPECT_NEAR(a1.report.eta, a2.report.eta, 1e-9 * std::max(1.0, a1.report.eta));
        EXPECT_TRUE(props::per_group_monotone(a2.policy, a2.policy.frontier() + 10));
        const auto check = props::check_fixed_point(m, a2.policy, a2.report);
        EXPECT_TRUE(check.ok()) << "instance " << i << ": " << check.summary();
    }
}

TEST(Properties, BruteForceAgreesUnderScaleEconomies) {
    std::mt19937_64 rng(99);
    int compared = 0;
    for (int i = 0; compared < 6 && i < 50; ++i) {
        const auto m = oracle::random_model(rng, 3, 4, true);
        const auto a2 = algorithm2(m);
        if (a2.thresholds.thresholds.back() > 20) continue;
        ++compared;
        const auto bf = brute_force_thresholds(m, 20);
        EXPECT_EQ(bf.best, a2.thresholds) << "instance " << i;
        EXPECT_NEAR(bf.eta, a2.report.eta, 1e-6);
    }
    EXPECT_EQ(compared, 6);
}
