#pragma once

#include <cstddef>

#include "hlstm/config.hpp"
#include "hlstm/labels.hpp"
#include "hlstm/pixel_state.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Input state of pixel (y, x): for each direction n in N, NE, ..., NW the
/// hidden cell the neighbor in direction n sends toward (y, x), then the
/// depth hidden cell at (y, x). Neighbors outside the grid contribute zeros.
/// Length (N + 1) * d.
Tensor gather_input_state(const PixelLayerState& state, std::size_t y, std::size_t x);

/// All input states at once as a ((N + 1) d) x (H W) matrix, one column per pixel.
Tensor gather_input_matrix(const PixelLayerState& state);

/// One P-LSTM layer: a single spatial gate set shared by all eight
/// directions, and a separate depth gate set. Both packed 4d x (N + 1) d.
struct PLstmLayerWeights {
    Tensor spatial;
    Tensor depth;

    static PLstmLayerWeights init(std::size_t d, Rng& rng, std::size_t neighbors = kNeighborCount);
    static PLstmLayerWeights zeros(std::size_t d, std::size_t neighbors = kNeighborCount);
};

struct PLstmLayerCache {
    Tensor inputs;         // gathered input matrix
    Tensor spatial_gates;  // activated, 4d x HW
    Tensor depth_gates;
};

/// Layer-synchronous update: every pixel reads only the layer-i state.
PixelLayerState plstm_layer_forward(const PixelLayerState& state, const PLstmLayerWeights& weights,
                                    HiddenFrom mode = HiddenFrom::kCurrent, PLstmLayerCache* cache = nullptr);

/// Returns the gradient with respect to the input state and accumulates
/// weight gradients into `dweights`.
PixelLayerState plstm_layer_backward(const PixelLayerState& input, const PixelLayerState& output,
                                     const PLstmLayerWeights& weights, const PLstmLayerCache& cache,
                                     const PixelLayerState& doutput, HiddenFrom mode, PLstmLayerWeights& dweights);

/// 1x1 map from the final depth hidden cells to class logits.
struct SurfaceClassifier {
    Tensor weight;  // classes x d
    Tensor bias;    // classes

    static SurfaceClassifier init(std::size_t classes, std::size_t d, Rng& rng);
    static SurfaceClassifier zeros(std::size_t classes, std::size_t d);
};

/// Per-pixel class distribution, (classes, H, W).
Tensor classify_pixels(const Tensor& h_depth, const SurfaceClassifier& classifier);

/// Accumulates classifier gradients and returns d h_depth given d logits (classes, H, W).
Tensor classify_backward(const Tensor& h_depth, const SurfaceClassifier& classifier, const Tensor& dlogits,
                         SurfaceClassifier& dclassifier);

/// Argmax over the class axis; ties go to the smaller class index.
SurfaceLabelMap argmax_labels(const Tensor& probs);

}  // namespace hlstm
