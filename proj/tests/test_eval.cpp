#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dada/eval.hpp"
#include "dada/sim.hpp"

using namespace dada;

namespace {

// O(n^2) oracle: probability a random positive outscores a random negative,
// ties counted one half.
double pair_count_auc(const std::vector<ScoredPoint>& pts) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& p : pts) {
        if (!p.label) continue;
        for (const auto& n : pts) {
            if (n.label) continue;
            ++pairs;
            if (p.score > n.score) wins += 1.0;
            else if (p.score == n.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

std::vector<ScoredPoint> random_points(Rng& rng, std::size_t n, bool coarse) {
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::uniform_int_distribution<int> level(0, 6);
    std::bernoulli_distribution coin(0.4);
    std::vector<ScoredPoint> pts(n);
    for (auto& p : pts) p = {coarse ? static_cast<double>(level(rng)) : u(rng), coin(rng)};
    pts[0].label = true;
    pts[1].label = false;
    return pts;
}

}  // namespace

TEST(Roc, PerfectSeparation) {
    const std::vector<ScoredPoint> pts{{2.0, true}, {1.0, false}};
    const auto c = roc(pts);
    const bool through_corner = std::any_of(c.points.begin(), c.points.end(),
                                            [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 1.0; });
    EXPECT_TRUE(through_corner);
    EXPECT_EQ(auc(c), 1.0);
}

TEST(Roc, AllTiedIsDiagonal) {
    const std::vector<ScoredPoint> pts{{1.0, true}, {1.0, false}, {1.0, true}, {1.0, false}};
    const auto c = roc(pts);
    ASSERT_EQ(c.points.size(), 2u);
    EXPECT_EQ(c.points.back().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    EXPECT_EQ(auc(c), 0.5);
}

TEST(Roc, InfiniteScoresFormTopClass) {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<ScoredPoint> pts{{inf, true}, {inf, false}, {0.5, true}, {0.1, false}};
    EXPECT_DOUBLE_EQ(auc(pts), pair_count_auc(pts));
}

TEST(Roc, RequiresBothClasses) {
    const std::vector<ScoredPoint> pos{{1.0, true}};
    const std::vector<ScoredPoint> neg{{1.0, false}};
    EXPECT_THROW(roc(pos), ContractViolation);
    EXPECT_THROW(roc(neg), ContractViolation);
    EXPECT_THROW(tpr_fpr_at(neg, {2.0}), ContractViolation);
}

TEST(RocProperty, CoordinatesMonotone) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = roc(random_points(rng, 2 + trial, trial % 2));
        EXPECT_EQ(c.points.front().fpr, 0.0);
        EXPECT_EQ(c.points.front().tpr, 0.0);
        EXPECT_EQ(c.points.back().fpr, 1.0);
        EXPECT_EQ(c.points.back().tpr, 1.0);
        for (std::size_t i = 1; i < c.points.size(); ++i) {
            EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
            EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
        }
    }
}

TEST(AucProperty, EqualsPairCountOracle) {
    Rng rng(2);
    std::uniform_int_distribution<std::size_t> n_dist(2, 200);
    for (int trial = 0; trial < 200; ++trial) {
        const auto pts = random_points(rng, n_dist(rng), trial % 3 == 0);
        const double oracle = pair_count_auc(pts);
        EXPECT_NEAR(auc(pts), oracle, 1e-12 * oracle) << "trial " << trial;
    }
}

TEST(AucProperty, InvariantUnderIncreasingTransform) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto pts = random_points(rng, 50, trial % 2);
        const double before = auc(pts);
        for (auto& p : pts) p.score = std::exp(3.0 * p.score) + 7.0;
        EXPECT_EQ(auc(pts), before);
    }
}

TEST(RocProperty, PermutationInvariant) {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        auto pts = random_points(rng, 80, trial % 2);
        const auto a = roc(pts);
        std::shuffle(pts.begin(), pts.end(), rng);
        const auto b = roc(pts);
        ASSERT_EQ(a.points.size(), b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i) {
            EXPECT_EQ(a.points[i].fpr, b.points[i].fpr);
            EXPECT_EQ(a.points[i].tpr, b.points[i].tpr);
        }
    }
}

TEST(TprFpr, Extremes) {
    const std::vector<ScoredPoint> pts{{0.5, true}, {1.5, false}, {3.0, true}, {0.1, false}};
    const auto all = tpr_fpr_at(pts, {1e-9});
    EXPECT_EQ(all.tpr, 1.0);
    EXPECT_EQ(all.fpr, 1.0);
    const auto none = tpr_fpr_at(pts, {1e300});
    EXPECT_EQ(none.tpr, 0.0);
    EXPECT_EQ(none.fpr, 0.0);
}

TEST(TprFpr, HandEnumeratedSixPoints) {
    // p = 2: positives 3.1 (TP), 2.0 (boundary, FN), 0.4 (FN); negatives 2.5 (FP), 1.9 (TN), 0.0 (TN)
    const std::vector<ScoredPoint> pts{{3.1, true}, {2.0, true}, {0.4, true}, {2.5, false}, {1.9, false}, {0.0, false}};
    const auto r = tpr_fpr_at(pts, {2.0});
    EXPECT_DOUBLE_EQ(r.tpr, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.fpr, 1.0 / 3.0);
}

// Cross-module: thresholding the stored scores reproduces the uploaded flags.
TEST(EvalProperty, RatesReproduceDetectorFlags) {
    SimConfig c;
    c.signal = {.sensors = 3, .days = 10, .readings_per_day = 16, .noise_std = 0.04, .seed = 5};
    c.anomalies = {.kind = AnomalyKind::Mixed, .rate_per_day = 4, .magnitude_mean = 0.2, .magnitude_var = 0.01,
                   .burst_min = 2, .burst_max = 4, .seed = 6};
    c.shape = {16, 5};
    c.training = {.epochs = 100, .seed = 7, .halve_on_increase = true};
    c.policy = {.d_u = 3};
    c.bootstrap_days = 3;
    const auto r = run_simulation(c);
    ASSERT_TRUE(has_both_classes(r));
    std::uint64_t tp = 0, fp = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < r.flag.size(); ++i) {
        (r.label[i] ? pos : neg) += 1;
        if (r.flag[i]) (r.label[i] ? tp : fp) += 1;
    }
    const auto rates = tpr_fpr_at(scored_points(r), c.threshold);
    EXPECT_EQ(rates.tpr, static_cast<double>(tp) / static_cast<double>(pos));
    EXPECT_EQ(rates.fpr, static_cast<double>(fp) / static_cast<double>(neg));
}
