#pragma once

#include <array>
#include <vector>

#include "hlstm/labels.hpp"
#include "hlstm/mslstm.hpp"
#include "hlstm/training.hpp"

namespace hlstm {

/// Fraction of pixels whose label matches. Throws std::invalid_argument on
/// shape mismatch or empty maps.
double pixel_accuracy(const SurfaceLabelMap& pred, const SurfaceLabelMap& truth);

/// Mean over the classes present in `truth` of per-class recall.
double mean_accuracy(const SurfaceLabelMap& pred, const SurfaceLabelMap& truth);

struct ScoredPair {
    std::array<double, kRelationCount> scores{};
    RelationLabel truth = RelationLabel::kLayering;
};

/// Area under the precision-recall curve, summing (R_i - R_{i-1}) P_i over
/// distinct score thresholds in descending order. Pairs with equal scores
/// enter the curve together, so a constant score gives positives / total.
/// Returns NaN when there are no positives.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Mean of the per-class AP over relation classes present in the ground
/// truth. NaN when the list is empty.
double relation_average_precision(const std::vector<ScoredPair>& pairs);

/// Fraction of pairs whose argmax score is the true label. NaN when empty.
double relation_accuracy(const std::vector<ScoredPair>& pairs);

/// Attaches ground truth to each predicted pair. Throws std::out_of_range
/// for a pair missing from `truth`.
std::vector<ScoredPair> score_pairs(const RelationGraphPrediction& prediction, const RelationTruth& truth);

}  // namespace hlstm
