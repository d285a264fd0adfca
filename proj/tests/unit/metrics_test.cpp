#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "hlstm/metrics.hpp"
#include "test_util.hpp"

using namespace hlstm;

namespace {

SurfaceLabelMap map_of(std::size_t h, std::size_t w, std::vector<std::uint8_t> v, std::size_t classes = 3) {
    SurfaceLabelMap m(h, w, classes);
    m.labels = std::move(v);
    return m;
}

// AP from scratch: walk every distinct threshold from high to low.
double brute_force_ap(const std::vector<double>& s, const std::vector<bool>& pos) {
    const double total_pos = static_cast<double>(std::count(pos.begin(), pos.end(), true));
    std::vector<double> thresholds = s;
    std::sort(thresholds.rbegin(), thresholds.rend());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    double ap = 0.0;
    double prev_recall = 0.0;
    for (double t : thresholds) {
        double tp = 0.0;
        double taken = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                taken += 1.0;
                tp += pos[i] ? 1.0 : 0.0;
            }
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / taken);
        prev_recall = recall;
    }
    return ap;
}

}  // namespace

TEST(PixelAccuracy, Examples) {
    const SurfaceLabelMap a = map_of(2, 2, {0, 1, 2, 1});
    EXPECT_EQ(pixel_accuracy(a, a), 1.0);
    EXPECT_EQ(mean_accuracy(a, a), 1.0);
    EXPECT_EQ(pixel_accuracy(map_of(2, 2, {0, 1, 0, 0}), a), 0.5);
}

TEST(MeanAccuracy, RecallOverPresentClasses) {
    const SurfaceLabelMap truth = map_of(2, 2, {0, 0, 0, 1});
    const SurfaceLabelMap pred = map_of(2, 2, {0, 1, 0, 1});
    EXPECT_NEAR(mean_accuracy(pred, truth), 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(pixel_accuracy(pred, truth), 0.75, 1e-15);
}

TEST(PixelAccuracy, ShapeErrors) {
    EXPECT_THROW(pixel_accuracy(map_of(1, 2, {0, 0}), map_of(2, 1, {0, 0})), std::invalid_argument);
    EXPECT_THROW(mean_accuracy(map_of(1, 2, {0, 0}), map_of(1, 3, {0, 0, 0})), std::invalid_argument);
    EXPECT_THROW(pixel_accuracy(SurfaceLabelMap{}, SurfaceLabelMap{}), std::invalid_argument);
}

TEST(PixelAccuracy, MatchesCountingOracleOnRandomMaps) {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        SurfaceLabelMap p(16, 16, 3);
        SurfaceLabelMap t(16, 16, 3);
        // Skew the truth so some trials miss a class.
        const std::size_t classes_in_truth = 1 + rng.below(3);
        for (std::size_t i = 0; i < 256; ++i) {
            p.labels[i] = static_cast<std::uint8_t>(rng.below(3));
            t.labels[i] = static_cast<std::uint8_t>(rng.below(classes_in_truth));
        }
        std::size_t correct = 0;
        std::array<double, 3> hit{};
        std::array<double, 3> count{};
        for (std::size_t i = 0; i < 256; ++i) {
            correct += p.labels[i] == t.labels[i];
            count[t.labels[i]] += 1.0;
            hit[t.labels[i]] += p.labels[i] == t.labels[i] ? 1.0 : 0.0;
        }
        double recall_sum = 0.0;
        double present = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            if (count[c] > 0) {
                recall_sum += hit[c] / count[c];
                present += 1.0;
            }
        }
        EXPECT_NEAR(pixel_accuracy(p, t), static_cast<double>(correct) / 256.0, 1e-15);
        EXPECT_NEAR(mean_accuracy(p, t), recall_sum / present, 1e-14);
    }
}

TEST(AveragePrecision, Examples) {
    EXPECT_NEAR(average_precision({0.9, 0.8, 0.7}, {true, false, true}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
    EXPECT_NEAR(average_precision({0.9, 0.8, 0.7}, {true, false, true}), 0.8333, 1e-4);
    EXPECT_EQ(average_precision({0.9, 0.8, 0.1, 0.05}, {true, true, false, false}), 1.0);
    EXPECT_TRUE(std::isnan(average_precision({0.5, 0.2}, {false, false})));
}

TEST(AveragePrecision, ConstantScoresGivePositiveRate) {
    for (std::size_t n : {1u, 4u, 7u}) {
        for (std::size_t p = 1; p <= n; ++p) {
            std::vector<bool> pos(n, false);
            for (std::size_t i = 0; i < p; ++i) pos[(i * 3) % n] = true;
            const double got = average_precision(std::vector<double>(n, 0.25), pos);
            EXPECT_NEAR(got, static_cast<double>(std::count(pos.begin(), pos.end(), true)) / n, 1e-15);
        }
    }
}

TEST(AveragePrecision, MatchesThresholdOracleOnRandomScores) {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(6)) / 5.0;  // coarse, so ties are common
            pos[i] = rng.below(2) == 1;
            any = any || pos[i];
        }
        if (!any) pos[0] = true;
        const double got = average_precision(s, pos);
        EXPECT_NEAR(got, brute_force_ap(s, pos), 1e-12);
        EXPECT_GE(got, 0.0);
        EXPECT_LE(got, 1.0);
    }
}

TEST(RelationMetrics, MeanOverPresentClasses) {
    std::vector<ScoredPair> pairs(4);
    pairs[0] = {{0.9, 0.05, 0.03, 0.02}, RelationLabel::kLayering};
    pairs[1] = {{0.1, 0.8, 0.05, 0.05}, RelationLabel::kSupporting};
    pairs[2] = {{0.6, 0.1, 0.1, 0.2}, RelationLabel::kLayering};
    pairs[3] = {{0.7, 0.25, 0.03, 0.02}, RelationLabel::kSupporting};
    // Supporting separates perfectly; layering ranks a negative second.
    EXPECT_NEAR(relation_average_precision(pairs), (1.0 + (1.0 + 2.0 / 3.0) / 2.0) / 2.0, 1e-15);
    EXPECT_NEAR(relation_accuracy(pairs), 0.75, 1e-15);

    pairs[3].scores = {0.7, 0.01, 0.03, 0.02};
    // Pair 3 now ranks last for supporting.
    const double support = brute_force_ap({0.05, 0.8, 0.1, 0.01}, {false, true, false, true});
    const double layering = brute_force_ap({0.9, 0.1, 0.6, 0.7}, {true, false, true, false});
    EXPECT_NEAR(relation_average_precision(pairs), (support + layering) / 2.0, 1e-15);
    EXPECT_TRUE(std::isnan(relation_average_precision({})));
    EXPECT_TRUE(std::isnan(relation_accuracy({})));
}

TEST(RelationMetrics, ScorePairsAttachesTruth) {
    RelationGraphPrediction pred;
    RelationPrediction p;
    p.region_a = 0;
    p.region_b = 1;
    p.probs = {0.1, 0.2, 0.3, 0.4};
    pred.pairs.push_back(p);
    RelationTruth truth;
    truth[{0, 1}] = RelationLabel::kSiding;
    const std::vector<ScoredPair> s = score_pairs(pred, truth);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].truth, RelationLabel::kSiding);
    EXPECT_EQ(s[0].scores[3], 0.4);
    truth.clear();
    EXPECT_THROW(score_pairs(pred, truth), std::out_of_range);
}
