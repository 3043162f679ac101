#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magbot/errors.hpp"
#include "magbot/metrics.hpp"
#include "magbot/stats.hpp"

using namespace magbot;

namespace {

std::vector<double> normal_sample(std::mt19937_64& rng, double mu, double sigma, int n) {
    std::normal_distribution<double> d(mu, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

// Monte Carlo studentized range: range of k normals over an independent
// chi-based scale with df degrees of freedom.
double mc_ptukey(double q, int k, int df, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        double lo = 1e300, hi = -1e300, chi2 = 0.0;
        for (int j = 0; j < k; ++j) {
            const double v = z(rng);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (int j = 0; j < df; ++j) {
            const double v = z(rng);
            chi2 += v * v;
        }
        if ((hi - lo) / std::sqrt(chi2 / df) <= q) ++hits;
    }
    return static_cast<double>(hits) / n;
}

}  // namespace

TEST(Stats, MeanAndStddev) {
    EXPECT_DOUBLE_EQ(mean({1, 2, 3, 4}), 2.5);
    EXPECT_NEAR(stddev({2, 4, 4, 4, 5, 5, 7, 9}), std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_EQ(stddev({1.0}), 0.0);
}

TEST(Stats, StudentizedRangeCriticalValues) {
    // Published upper 5% points of the studentized range.
    EXPECT_NEAR(qtukey(0.05, 3, 10), 3.877, 2e-3);
    EXPECT_NEAR(qtukey(0.05, 2, std::numeric_limits<double>::infinity()), 2.772, 2e-3);
    EXPECT_NEAR(qtukey(0.05, 4, 20), 3.958, 2e-3);
}

TEST(Stats, TwoMeanRangeMatchesNormal) {
    // For k = 2 and known variance, R / sqrt(2) is |N(0,1)|.
    for (double q : {0.5, 1.0, 2.0, 3.0}) {
        const double expected = std::erf(q / 2.0);
        EXPECT_NEAR(ptukey(q, 2, std::numeric_limits<double>::infinity()), expected, 1e-9);
    }
}

TEST(Stats, PtukeyMatchesMonteCarlo) {
    std::mt19937_64 rng(11);
    const int n = 200000;
    for (auto [q, k, df] : {std::tuple{3.0, 3, 10}, std::tuple{2.0, 5, 6}, std::tuple{4.5, 4, 30}}) {
        const double mc = mc_ptukey(q, k, df, n, rng);
        const double se = std::sqrt(mc * (1 - mc) / n);
        EXPECT_NEAR(ptukey(q, k, df), mc, 4.0 * se + 1e-4) << q << " " << k << " " << df;
    }
}

TEST(Stats, PtukeyMonotone) {
    double prev = 0.0;
    for (double q = 0.25; q < 8.0; q += 0.25) {
        const double p = ptukey(q, 4, 12);
        EXPECT_GE(p, prev - 1e-12);
        prev = p;
    }
    EXPECT_NEAR(prev, 1.0, 1e-3);
    EXPECT_EQ(ptukey(0.0, 3, 10), 0.0);
    EXPECT_THROW(ptukey(1.0, 1, 10), InvalidSpecError);
}

TEST(Stats, TTestAgreesWithTukeyForTwoGroups) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        const auto a = normal_sample(rng, 0.0, 1.0, 20);
        const auto b = normal_sample(rng, 0.4, 1.0, 25);
        const auto hsd = tukey_hsd({a, b});
        ASSERT_EQ(hsd.size(), 1u);
        EXPECT_NEAR(hsd[0].p_value, t_test(a, b), 1e-6);
    }
}

TEST(Stats, NullComparisonsMostlyNotSignificant) {
    std::mt19937_64 rng(5);
    int not_significant = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r)
        if (compare_conditions(normal_sample(rng, 0, 1, 100), normal_sample(rng, 0, 1, 100)) > 0.05)
            ++not_significant;
    EXPECT_GE(not_significant, reps * 9 / 10);
}

TEST(Stats, LargeEffectIsSignificant) {
    std::mt19937_64 rng(6);
    EXPECT_LT(compare_conditions(normal_sample(rng, 0, 1, 100), normal_sample(rng, 5, 1, 100)), 0.001);
}

TEST(Stats, DegenerateSamples) {
    const std::vector<double> a{2.0, 2.0, 2.0};
    EXPECT_EQ(compare_conditions(a, a), 1.0);
    EXPECT_EQ(compare_conditions(a, {3.0, 3.0}), 0.0);
    EXPECT_EQ(tukey_hsd({a, a, a})[0].p_value, 1.0);
    EXPECT_THROW(compare_conditions({1.0}, a), InvalidSpecError);
    EXPECT_THROW(tukey_hsd({a}), InvalidSpecError);
}

TEST(Stats, TukeySeparatesShiftedGroup) {
    std::mt19937_64 rng(8);
    const auto g0 = normal_sample(rng, 0, 1, 30), g1 = normal_sample(rng, 0, 1, 30), g2 = normal_sample(rng, 3, 1, 30);
    const auto hsd = tukey_hsd({g0, g1, g2});
    ASSERT_EQ(hsd.size(), 3u);
    EXPECT_GT(hsd[0].p_value, 0.01);  // 0 vs 1
    EXPECT_LT(hsd[1].p_value, 1e-4);  // 0 vs 2
    EXPECT_LT(hsd[2].p_value, 1e-4);  // 1 vs 2
}

TEST(Displacement, StraightPath) {
    const auto m = displacement_metrics({{0, 0}, {3, 4}});
    EXPECT_DOUBLE_EQ(m.euclidean, 5.0);
    EXPECT_DOUBLE_EQ(m.x, 3.0);
    EXPECT_DOUBLE_EQ(m.y, 4.0);
    EXPECT_DOUBLE_EQ(m.manhattan, 7.0);
    EXPECT_FALSE(m.degenerate);
}

TEST(Displacement, LPath) {
    const auto m = displacement_metrics({{0, 0}, {3, 0}, {3, 4}});
    EXPECT_DOUBLE_EQ(m.manhattan, 7.0);
    EXPECT_DOUBLE_EQ(m.euclidean, 5.0);
}

TEST(Displacement, ZigzagSumsPath) {
    const std::vector<Eigen::Vector2d> zig{{0, 0}, {2, 0}, {1, 0}, {3, 1}, {2, 2}, {4, 2}};
    const auto m = displacement_metrics(zig);
    double oracle = 0.0;
    for (std::size_t i = 1; i < zig.size(); ++i)
        oracle += std::abs(zig[i].x() - zig[i - 1].x()) + std::abs(zig[i].y() - zig[i - 1].y());
    EXPECT_DOUBLE_EQ(m.manhattan, oracle);
    EXPECT_GT(m.manhattan, m.endpoint_l1);
}

TEST(Displacement, AxisProjection) {
    const auto m = displacement_metrics({{0, 0}, {0, 2}}, {0, -1});
    EXPECT_DOUBLE_EQ(m.x, 2.0);
    EXPECT_DOUBLE_EQ(m.y, 0.0);
}

TEST(Displacement, Degenerate) {
    const auto m = displacement_metrics({{1, 1}});
    EXPECT_TRUE(m.degenerate);
    EXPECT_EQ(m.euclidean, 0.0);
    EXPECT_THROW(displacement_metrics({}), InvalidSpecError);
}

TEST(Displacement, InequalitiesOnRandomWalks) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int r = 0; r < 500; ++r) {
        std::vector<Eigen::Vector2d> t{{0, 0}};
        const int n = 1 + r % 12;
        for (int i = 0; i < n; ++i) t.push_back(t.back() + Eigen::Vector2d(d(rng), d(rng)));
        const Eigen::Vector2d axis(d(rng), d(rng));
        const auto m = displacement_metrics(t, axis);
        EXPECT_LE(m.euclidean, m.endpoint_l1 + 1e-12);
        EXPECT_LE(m.endpoint_l1, std::sqrt(2.0) * m.euclidean + 1e-12);
        EXPECT_LE(m.endpoint_l1, m.manhattan + 1e-12);
        EXPECT_LE(m.x, m.euclidean + 1e-12);
        EXPECT_LE(m.y, m.euclidean + 1e-12);
    }
}
