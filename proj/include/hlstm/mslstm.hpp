#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/labels.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Log-sum-exp pooling of a (channels x count) set of pixel cells:
///   (1 / pi) log( (1 / count) sum_j exp(pi * v_j) )
/// per channel, with max-subtraction. Lies between the channel mean and max.
/// Throws std::invalid_argument for an empty set or pi <= 0.
Tensor lse_fuse(const Tensor& cells, double pi);

/// [mean of the neighbors' fused cells, own fused cells] for one region, from
/// fused cells stored as (2d x K). A region without neighbors gets zeros in
/// the first half.
Tensor gather_superpixel_input(const AdjacencyGraph& graph, const Tensor& fused, std::uint32_t region);

struct MsLstmCache {
    Tensor hbar;           // (2d x HW) enhanced pixel cells
    Tensor fused;          // (2d x K)
    Tensor inputs;         // (4d x K)
    Tensor gates;          // (4d x K), activated
    Tensor region_m;       // (d x K) pooled memory
    Tensor region_m_next;  // (d x K)
    Tensor region_h_next;  // (d x K)
};

struct MsLstmLayerOutput {
    Tensor h_field;   // (d, H, W), piecewise constant over regions
    Tensor m_field;   // (d, H, W)
    Tensor region_h;  // (d x K)
    Tensor region_m;  // (d x K)
};

/// One MS-LSTM layer. `h_track`/`m_track` are the superpixel track's
/// per-pixel cells and `h_pixel` the depth hidden output of the paired
/// P-LSTM layer. `weights` is packed 4d x 4d.
MsLstmLayerOutput mslstm_layer_forward(const Tensor& h_track, const Tensor& m_track, const Tensor& h_pixel,
                                       const SuperpixelMap& map, const AdjacencyGraph& graph, const Tensor& weights,
                                       double pi, HiddenFrom mode = HiddenFrom::kCurrent,
                                       MsLstmCache* cache = nullptr);

struct MsLstmLayerGrads {
    Tensor h_track;
    Tensor m_track;
    Tensor h_pixel;
};

/// Any of the upstream pointers may be null (zero gradient). Weight
/// gradients accumulate into `dweights`.
MsLstmLayerGrads mslstm_layer_backward(const SuperpixelMap& map, const AdjacencyGraph& graph, const Tensor& weights,
                                       const MsLstmCache& cache, double pi, HiddenFrom mode, const Tensor* dh_field,
                                       const Tensor* dm_field, const Tensor* dregion_h, Tensor& dweights);

/// Relation head for ordered region pairs. With a hidden layer:
///   softmax(W_out tanh(W_hid [h_a, h_b] + b_hid) + b_out)
/// and without one (hidden_weight empty): softmax(W_out [h_a, h_b] + b_out).
struct RelationClassifier {
    Tensor hidden_weight;  // hidden x 2d
    Tensor hidden_bias;    // hidden
    Tensor out_weight;     // 4 x hidden (or 4 x 2d)
    Tensor out_bias;       // 4

    bool linear() const { return hidden_weight.empty(); }
    static RelationClassifier init(std::size_t d, std::size_t hidden, Rng& rng);
    static RelationClassifier zeros(std::size_t d, std::size_t hidden);
};

struct RelationPrediction {
    std::uint32_t region_a = 0;
    std::uint32_t region_b = 0;
    std::array<double, kRelationCount> probs{};

    RelationLabel argmax() const;
};

/// Predictions for every ordered adjacent pair at one layer.
struct RelationGraphPrediction {
    double scale = 0.0;
    std::vector<RelationPrediction> pairs;
};

struct RelationCache {
    Tensor inputs;  // (2d x P)
    Tensor hidden;  // (hidden x P), post-tanh; empty for a linear head
};

RelationGraphPrediction predict_relations(const Tensor& region_h, const AdjacencyGraph& graph,
                                          const RelationClassifier& classifier, double scale = 0.0,
                                          RelationCache* cache = nullptr);

/// Given d logits (4 x P) for the pairs in graph.ordered_pairs order,
/// accumulates head gradients and returns d region_h (d x K).
Tensor relation_backward(const Tensor& region_h, const AdjacencyGraph& graph, const RelationClassifier& classifier,
                         const RelationCache& cache, const Tensor& dlogits, RelationClassifier& dclassifier);

}  // namespace hlstm
