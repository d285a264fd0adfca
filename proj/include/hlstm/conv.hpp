#pragma once

#include <cstddef>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/pixel_state.hpp"
#include "hlstm/rng.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Cross-correlation layer with zero padding. Weight is
/// out_channels x (in_channels * kernel * kernel), columns ordered (c, ky, kx).
struct ConvLayer {
    std::size_t kernel = 3;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t stride = 1;
    std::size_t padding = 1;
    bool relu = true;
    Tensor weight;
    Tensor bias;

    static ConvLayer zeros(std::size_t kernel, std::size_t in_channels, std::size_t out_channels,
                           std::size_t stride = 1, std::size_t padding = 0, bool relu = false);
    std::size_t output_extent(std::size_t input_extent) const;
};

struct ConvStack {
    std::vector<ConvLayer> layers;

    /// 3x3, stride 1, padding 1, rectified layers with the given output
    /// widths. He-uniform weights, zero bias.
    static ConvStack standard(std::size_t in_channels, const std::vector<std::size_t>& channels, Rng& rng);

    std::size_t in_channels() const { return layers.front().in_channels; }
    std::size_t out_channels() const { return layers.back().out_channels; }
};

struct ConvCache {
    std::vector<Tensor> columns;  // im2col matrix per layer
    std::vector<Tensor> outputs;  // post-activation output per layer, (C, H, W)
};

struct ConvLayerGrads {
    Tensor weight;
    Tensor bias;
};

/// Image (C, H, W) to features (F, H', W'). Throws std::invalid_argument on a
/// channel mismatch.
Tensor conv_forward(const Tensor& image, const ConvStack& stack, ConvCache* cache = nullptr);

/// Accumulates parameter gradients into `grads` (resized on first use) and
/// returns the gradient with respect to the image.
Tensor conv_backward(const ConvStack& stack, const ConvCache& cache, const Tensor& image, const Tensor& doutput,
                     std::vector<ConvLayerGrads>& grads);

/// 1x1 maps from features to the initial depth hidden and memory cells, each d x F.
struct TransitionWeights {
    Tensor hidden;
    Tensor memory;

    static TransitionWeights init(std::size_t d, std::size_t features, Rng& rng);
    std::size_t hidden_dim() const { return hidden.dim(0); }
};

/// Seeds a PixelLayerState from features: h_depth = W_h x and m_depth = W_m x
/// per pixel, and every spatial field is a copy of the matching depth field.
PixelLayerState transition_layer(const Tensor& features, const TransitionWeights& weights,
                                 std::size_t neighbors = kNeighborCount);
PixelLayerState transition_layer(const Tensor& features, const TransitionWeights& weights, const ModelConfig& config);

/// Accumulates into dweights and returns the feature gradient.
Tensor transition_backward(const Tensor& features, const TransitionWeights& weights, const PixelLayerState& dstate,
                           TransitionWeights& dweights);

}  // namespace hlstm
