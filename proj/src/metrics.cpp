#include "hlstm/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hlstm {

namespace {

void check_maps(const SurfaceLabelMap& pred, const SurfaceLabelMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width || pred.labels.size() != truth.labels.size()) {
        throw std::invalid_argument("label maps differ in shape: " + std::to_string(pred.height) + "x" +
                                    std::to_string(pred.width) + " vs " + std::to_string(truth.height) + "x" +
                                    std::to_string(truth.width));
    }
    if (truth.labels.empty()) throw std::invalid_argument("empty label maps");
}

}  // namespace

double pixel_accuracy(const SurfaceLabelMap& pred, const SurfaceLabelMap& truth) {
    check_maps(pred, truth);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.labels.size(); ++i) correct += pred.labels[i] == truth.labels[i];
    return static_cast<double>(correct) / static_cast<double>(truth.labels.size());
}

double mean_accuracy(const SurfaceLabelMap& pred, const SurfaceLabelMap& truth) {
    check_maps(pred, truth);
    std::array<std::size_t, 256> total{};
    std::array<std::size_t, 256> hit{};
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        ++total[truth.labels[i]];
        hit[truth.labels[i]] += pred.labels[i] == truth.labels[i];
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < total.size(); ++c) {
        if (total[c] == 0) continue;
        sum += static_cast<double>(hit[c]) / static_cast<double>(total[c]);
        ++present;
    }
    return sum / static_cast<double>(present);
}

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw std::invalid_argument("average_precision: size mismatch");
    const std::size_t positives = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    if (positives == 0) return std::numeric_limits<double>::quiet_NaN();

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t prev_tp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            tp += positive[order[i]];
            ++seen;
            ++i;
        }
        if (tp != prev_tp) {
            const double precision = static_cast<double>(tp) / static_cast<double>(seen);
            ap += static_cast<double>(tp - prev_tp) / static_cast<double>(positives) * precision;
            prev_tp = tp;
        }
    }
    return ap;
}

double relation_average_precision(const std::vector<ScoredPair>& pairs) {
    if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    std::size_t classes = 0;
    std::vector<double> scores(pairs.size());
    std::vector<bool> positive(pairs.size());
    for (std::size_t r = 0; r < kRelationCount; ++r) {
        bool any = false;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            scores[i] = pairs[i].scores[r];
            positive[i] = static_cast<std::size_t>(pairs[i].truth) == r;
            any = any || positive[i];
        }
        if (!any) continue;
        sum += average_precision(scores, positive);
        ++classes;
    }
    return sum / static_cast<double>(classes);
}

double relation_accuracy(const std::vector<ScoredPair>& pairs) {
    if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t correct = 0;
    for (const ScoredPair& p : pairs) {
        const auto best = std::max_element(p.scores.begin(), p.scores.end()) - p.scores.begin();
        correct += static_cast<std::size_t>(best) == static_cast<std::size_t>(p.truth);
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<ScoredPair> score_pairs(const RelationGraphPrediction& prediction, const RelationTruth& truth) {
    std::vector<ScoredPair> out;
    out.reserve(prediction.pairs.size());
    for (const RelationPrediction& p : prediction.pairs) {
        const auto it = truth.find({p.region_a, p.region_b});
        if (it == truth.end()) {
            throw std::out_of_range("no relation ground truth for region pair (" + std::to_string(p.region_a) + ", " +
                                    std::to_string(p.region_b) + ")");
        }
        out.push_back({p.probs, it->second});
    }
    return out;
}

}  // namespace hlstm
