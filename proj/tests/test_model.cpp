#include "gsq/model.hpp"

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

} // namespace

TEST(Validate, AcceptsThreeGroupInstance) {
    const auto r = validate(three_groups(10, {7, 4, 3}));
    EXPECT_TRUE(r.ok()) << r.summary();
    EXPECT_DOUBLE_EQ(r.capacity, 40);
}

TEST(Validate, RejectsLoadAtCapacity) {
    const auto r = validate(three_groups(40, {7, 4, 3}));
    ASSERT_FALSE(r.ok());
    EXPECT_TRUE(r.has("capacity"));
    EXPECT_NE(r.summary().find("40 not < 40"), std::string::npos) << r.summary();
}

TEST(Validate, RejectsConcaveTable) {
    auto m = three_groups(10, {7, 4, 3});
    m.holding = HoldingCost::table({0, 1, 1.5}, 1);
    const auto r = validate(m);
    EXPECT_TRUE(r.has("holding-convexity")) << r.summary();
}

TEST(Validate, RejectsNonpositiveRates) {
    auto m = three_groups(10, {7, 4, 3});
    m.groups[1].service_rate = 0;
    m.groups[2].servers = 0;
    m.groups[0].cost_rate = -1;
    const auto r = validate(m);
    EXPECT_TRUE(r.has("service_rate"));
    EXPECT_TRUE(r.has("servers"));
    EXPECT_TRUE(r.has("cost_rate"));

    auto n = three_groups(-1, {7, 4, 3});
    EXPECT_TRUE(validate(n).has("arrival_rate"));
    n = three_groups(10, {7, 4, 3}, -0.5);
    EXPECT_TRUE(validate(n).has("operating_weight"));
}

TEST(Validate, RejectsUnboundedOrDecreasingHolding) {
    auto m = three_groups(10, {7, 4, 3});
    m.holding = HoldingCost::linear(0);
    EXPECT_TRUE(validate(m).has("holding"));
    m.holding = HoldingCost::power(1, 0.5);
    EXPECT_TRUE(validate(m).has("holding"));
    m.holding = HoldingCost::table({3, 2, 2.5}, 1);
    EXPECT_TRUE(validate(m).has("holding-monotonicity"));
    m.holding = HoldingCost::power(1, 60);
    EXPECT_TRUE(validate(m).has("holding-overflow"));
}

TEST(Validate, AcceptsEveryWorkedInstance) {
    for (auto c : std::vector<std::vector<double>>{{7, 4, 3}, {7, 4, 1.8}, {7, 4, 1}, {8, 3, 1}, {4, 3, 1}, {18, 10, 3},
                                                    {7, 8, 5}}) {
        EXPECT_TRUE(validate(three_groups(10, c)).ok());
    }
    for (double lambda : {2.0, 5.0, 10.0, 20.0, 30.0, 38.0, 39.0}) EXPECT_TRUE(validate(three_groups(lambda, {7, 8, 5})).ok());
    for (double v : {0.1, 0.3, 0.5, 1.0, 2.0, 3.0}) EXPECT_TRUE(validate(three_groups(10, {7, 8, 5}, v)).ok());
    for (int K : {3, 5, 10, 20, 30, 50}) {
        QueueModel m;
        for (int k = 0; k < K; ++k) m.groups.push_back({3, k + 2.0, std::pow(k + 2.0, 0.9)});
        m.arrival_rate = 0.5 * m.capacity();
        EXPECT_TRUE(validate(m).ok()) << K;
    }
}

TEST(Holding, Evaluates) {
    auto m = three_groups(10, {7, 4, 3});
    EXPECT_DOUBLE_EQ(holding(m, 7), 7);
    EXPECT_DOUBLE_EQ(holding(m, 0), 0);
    m.holding = HoldingCost::power(1, 2, 0);
    EXPECT_DOUBLE_EQ(holding(m, 3), 9);
    EXPECT_DOUBLE_EQ(holding(m, 0), 0);
    m.holding = HoldingCost::table({0, 1, 3}, 4);
    EXPECT_DOUBLE_EQ(holding(m, 2), 3);
    EXPECT_DOUBLE_EQ(holding(m, 4), 11);
    EXPECT_THROW(holding(m, -1), DomainError);
}

TEST(TotalCostRate, AddsHoldingAndWeightedOperatingCost) {
    const auto m = three_groups(10, {7, 4, 3});
    EXPECT_DOUBLE_EQ(total_cost_rate(m, 12, {3, 4, 3}), 58);
    EXPECT_DOUBLE_EQ(total_cost_rate(m, 0, {0, 0, 0}), 0);
    const auto w = three_groups(10, {7, 8, 5}, 2);
    // one server at n=0 would break efficiency, so the weighted operating part is checked at n=1
    EXPECT_DOUBLE_EQ(total_cost_rate(w, 1, {1, 0, 0}), 1 + 2 * 7);
    EXPECT_THROW(total_cost_rate(m, 0, {1, 0, 0}), DomainError);
    EXPECT_THROW(total_cost_rate(m, 10, {4, 0, 0}), DomainError);
}

TEST(TotalCostRate, OperatingPartIsAdditive) {
    std::mt19937_64 rng(11);
    const auto m = three_groups(10, {7, 4, 1.8}, 1.7);
    std::uniform_int_distribution<int> a(0, 3), b(0, 4), c(0, 3);
    for (int i = 0; i < 200; ++i) {
        Action act{a(rng), b(rng), c(rng)};
        const int n = act.total() + i % 5;
        const double expected = 1.7 * (act[0] * 7 + act[1] * 4 + act[2] * 1.8);
        EXPECT_NEAR(total_cost_rate(m, n, act) - total_cost_rate(m, n, {0, 0, 0}), expected, 1e-12);
    }
}

TEST(Holding, SampledConvexityOnValidModels) {
    std::vector<HoldingCost> forms{HoldingCost::linear(2), HoldingCost::power(0.3, 2, 1), HoldingCost::power(1, 1.5),
                                   HoldingCost::table({0, 0.5, 1.5, 3}, 2)};
    for (const auto& h : forms) {
        auto m = three_groups(10, {7, 4, 3});
        m.holding = h;
        ASSERT_TRUE(validate(m).ok()) << validate(m).summary();
        for (int n = 1; n < 1000; ++n) {
            const double d0 = h(n) - h(n - 1), d1 = h(n + 1) - h(n);
            EXPECT_GE(d0, 0);
            EXPECT_GE(d1, d0 - 1e-9 * std::max(1.0, std::abs(d0)));
        }
    }
}

TEST(Policy, RejectsInefficientOrIncompleteTables) {
    const auto m = three_groups(10, {7, 4, 3});
    EXPECT_THROW(Policy(m, {{0, 0, 0}, {2, 0, 0}}), DomainError);
    EXPECT_THROW(Policy(m, {{0, 0, 0}, {1, 0, 0}}), DomainError);
    EXPECT_THROW(Policy(m, {}), DomainError);
    std::vector<Action> table;
    for (int n = 0; n <= 10; ++n) table.push_back(fill_in_order(m, n, std::vector<int>{0, 1, 2}));
    const Policy p(m, table);
    EXPECT_EQ(p.frontier(), 10);
    EXPECT_EQ(p(500), all_on(m));
    EXPECT_EQ(p(4), (Action{3, 1, 0}));
    EXPECT_THROW(p(-1), DomainError);
}
