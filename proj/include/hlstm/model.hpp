#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hlstm/config.hpp"
#include "hlstm/conv.hpp"
#include "hlstm/lstm.hpp"
#include "hlstm/mslstm.hpp"
#include "hlstm/plstm.hpp"
#include "hlstm/superpixel.hpp"
#include "hlstm/tensor.hpp"

namespace hlstm {

/// Parameter groups. W_CNN is kConv plus kTransition, W_P is kPixel, and W_S is kSuperpixel.
enum class ParamGroup { kConv, kTransition, kPixel, kSuperpixel };

/// Every learnable tensor of the network.
struct Parameters {
    ConvStack conv;
    TransitionWeights transition;
    std::vector<PLstmLayerWeights> plstm;
    SurfaceClassifier label;
    std::vector<Tensor> mslstm;  // packed 4d x 4d per layer
    std::vector<RelationClassifier> relation;

    static Parameters init(const ModelConfig& config, Rng& rng);
    /// Same structure, all zeros.
    static Parameters zeros_like(const Parameters& other);

    /// Visits (name, group, tensor) in a fixed order.
    template <typename F>
    void for_each(F&& visit);
    template <typename F>
    void for_each(F&& visit) const;

    std::size_t scalar_count() const;
};

/// Superpixel maps and graphs for each MS-LSTM layer of one image.
struct SceneStructure {
    std::vector<SuperpixelMap> maps;
    std::vector<AdjacencyGraph> graphs;
};

/// Over-segments the image at every configured scale.
SceneStructure segment_scene(const Tensor& image, const ModelConfig& config);

/// Everything produced by a forward pass, including what backward needs.
struct ForwardPass {
    ConvCache conv_cache;
    Tensor features;
    std::vector<PixelLayerState> pixel_states;  // transition output, then one per P-LSTM layer
    std::vector<PLstmLayerCache> pixel_caches;
    Tensor probs;  // (classes, H, W)

    std::vector<Tensor> track_h;  // MS track input per layer, then final output
    std::vector<Tensor> track_m;
    std::vector<MsLstmCache> ms_caches;
    std::vector<Tensor> region_h;  // per layer, d x K
    std::vector<RelationCache> relation_caches;
    std::vector<RelationGraphPrediction> relations;  // per layer
};

class HLstmModel {
public:
    /// Random initialization from config.seed.
    explicit HLstmModel(ModelConfig config);
    HLstmModel(ModelConfig config, Parameters params);

    const ModelConfig& config() const { return config_; }
    Parameters& params() { return params_; }
    const Parameters& params() const { return params_; }

    /// Over-segments the image at every configured scale.
    SceneStructure segment(const Tensor& image) const;

    ForwardPass forward(const Tensor& image, const SceneStructure& structure) const;

    /// Parameter gradients for upstream gradients on the surface logits
    /// (classes, H, W) and on each layer's relation logits (4 x pairs).
    /// An empty relation list means no relation gradient.
    Parameters backward(const Tensor& image, const SceneStructure& structure, const ForwardPass& pass,
                        const Tensor& dsurface_logits, const std::vector<Tensor>& drelation_logits) const;

private:
    void check_structure(const Tensor& image, const SceneStructure& structure) const;

    ModelConfig config_;
    Parameters params_;
};

template <typename F>
void Parameters::for_each(F&& visit) {
    for (std::size_t i = 0; i < conv.layers.size(); ++i) {
        visit("conv." + std::to_string(i) + ".weight", ParamGroup::kConv, conv.layers[i].weight);
        visit("conv." + std::to_string(i) + ".bias", ParamGroup::kConv, conv.layers[i].bias);
    }
    visit(std::string("transition.hidden"), ParamGroup::kTransition, transition.hidden);
    visit(std::string("transition.memory"), ParamGroup::kTransition, transition.memory);
    for (std::size_t i = 0; i < plstm.size(); ++i) {
        visit("plstm." + std::to_string(i) + ".spatial", ParamGroup::kPixel, plstm[i].spatial);
        visit("plstm." + std::to_string(i) + ".depth", ParamGroup::kPixel, plstm[i].depth);
    }
    visit(std::string("label.weight"), ParamGroup::kPixel, label.weight);
    visit(std::string("label.bias"), ParamGroup::kPixel, label.bias);
    for (std::size_t i = 0; i < mslstm.size(); ++i) {
        visit("mslstm." + std::to_string(i) + ".gates", ParamGroup::kSuperpixel, mslstm[i]);
    }
    for (std::size_t i = 0; i < relation.size(); ++i) {
        const std::string prefix = "relation." + std::to_string(i);
        if (!relation[i].linear()) {
            visit(prefix + ".hidden_weight", ParamGroup::kSuperpixel, relation[i].hidden_weight);
            visit(prefix + ".hidden_bias", ParamGroup::kSuperpixel, relation[i].hidden_bias);
        }
        visit(prefix + ".out_weight", ParamGroup::kSuperpixel, relation[i].out_weight);
        visit(prefix + ".out_bias", ParamGroup::kSuperpixel, relation[i].out_bias);
    }
}

template <typename F>
void Parameters::for_each(F&& visit) const {
    const_cast<Parameters*>(this)->for_each(
        [&](const std::string& name, ParamGroup group, Tensor& t) { visit(name, group, static_cast<const Tensor&>(t)); });
}

}  // namespace hlstm
