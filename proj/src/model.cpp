#include "hlstm/model.hpp"

#include <stdexcept>

namespace hlstm {

Parameters Parameters::init(const ModelConfig& config, Rng& rng) {
    config.validate();
    Parameters p;
    p.conv = ConvStack::standard(config.image_channels, config.conv_channels, rng);
    p.transition = TransitionWeights::init(config.d, p.conv.out_channels(), rng);
    for (std::size_t i = 0; i < config.num_plstm_layers; ++i) {
        p.plstm.push_back(PLstmLayerWeights::init(config.d, rng, config.neighbors));
    }
    p.label = SurfaceClassifier::init(config.num_classes, config.d, rng);
    for (std::size_t i = 0; i < config.num_mslstm_layers; ++i) {
        p.mslstm.push_back(init_packed_gates(config.d, 4 * config.d, rng));
    }
    for (std::size_t i = 0; i < config.num_mslstm_layers; ++i) {
        p.relation.push_back(RelationClassifier::init(config.d, config.relation_hidden, rng));
    }
    return p;
}

Parameters Parameters::zeros_like(const Parameters& other) {
    Parameters p = other;
    p.for_each([](const std::string&, ParamGroup, Tensor& t) { t.fill(0.0); });
    return p;
}

std::size_t Parameters::scalar_count() const {
    std::size_t total = 0;
    for_each([&](const std::string&, ParamGroup, const Tensor& t) { total += t.size(); });
    return total;
}

HLstmModel::HLstmModel(ModelConfig config) : config_(std::move(config)) {
    Rng rng(config_.seed);
    params_ = Parameters::init(config_, rng);
}

HLstmModel::HLstmModel(ModelConfig config, Parameters params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
}

SceneStructure segment_scene(const Tensor& image, const ModelConfig& config) {
    SceneStructure s;
    const SlicOptions options = SlicOptions::from_config(config);
    for (double scale : config.scales) {
        s.maps.push_back(oversegment(image, scale, options));
        s.graphs.push_back(adjacency(s.maps.back()));
    }
    return s;
}

SceneStructure HLstmModel::segment(const Tensor& image) const { return segment_scene(image, config_); }

void HLstmModel::check_structure(const Tensor& image, const SceneStructure& structure) const {
    if (image.rank() != 3 || image.dim(0) != config_.image_channels) {
        throw std::invalid_argument("image must be (" + std::to_string(config_.image_channels) + ", H, W), got " +
                                    shape_string(image.shape()));
    }
    if (structure.maps.size() != config_.num_mslstm_layers || structure.graphs.size() != config_.num_mslstm_layers) {
        throw std::invalid_argument("scene structure must hold one superpixel map per MS-LSTM layer");
    }
    for (const SuperpixelMap& m : structure.maps) {
        if (m.height != image.dim(1) || m.width != image.dim(2)) {
            throw std::invalid_argument("superpixel map extents do not match the image");
        }
    }
}

ForwardPass HLstmModel::forward(const Tensor& image, const SceneStructure& structure) const {
    check_structure(image, structure);
    const HiddenFrom mode = config_.hidden_from_memory;
    ForwardPass pass;
    pass.features = conv_forward(image, params_.conv, &pass.conv_cache);
    pass.pixel_states.push_back(transition_layer(pass.features, params_.transition, config_));
    pass.pixel_caches.resize(config_.num_plstm_layers);
    for (std::size_t i = 0; i < config_.num_plstm_layers; ++i) {
        pass.pixel_states.push_back(
            plstm_layer_forward(pass.pixel_states.back(), params_.plstm[i], mode, &pass.pixel_caches[i]));
    }
    pass.probs = classify_pixels(pass.pixel_states.back().h_depth, params_.label);

    pass.track_h.push_back(pass.pixel_states.front().h_depth);
    pass.track_m.push_back(pass.pixel_states.front().m_depth);
    pass.ms_caches.resize(config_.num_mslstm_layers);
    pass.relation_caches.resize(config_.num_mslstm_layers);
    for (std::size_t k = 0; k < config_.num_mslstm_layers; ++k) {
        MsLstmLayerOutput out = mslstm_layer_forward(pass.track_h.back(), pass.track_m.back(),
                                                     pass.pixel_states[k + 1].h_depth, structure.maps[k],
                                                     structure.graphs[k], params_.mslstm[k], config_.pi_smooth, mode,
                                                     &pass.ms_caches[k]);
        pass.relations.push_back(predict_relations(out.region_h, structure.graphs[k], params_.relation[k],
                                                   config_.scales[k], &pass.relation_caches[k]));
        pass.region_h.push_back(std::move(out.region_h));
        pass.track_h.push_back(std::move(out.h_field));
        pass.track_m.push_back(std::move(out.m_field));
    }
    return pass;
}

Parameters HLstmModel::backward(const Tensor& image, const SceneStructure& structure, const ForwardPass& pass,
                                const Tensor& dsurface_logits, const std::vector<Tensor>& drelation_logits) const {
    check_structure(image, structure);
    const HiddenFrom mode = config_.hidden_from_memory;
    const std::size_t d = config_.d;
    const std::size_t height = image.dim(1);
    const std::size_t width = image.dim(2);
    const bool with_relations = !drelation_logits.empty();
    if (with_relations && drelation_logits.size() != config_.num_mslstm_layers) {
        throw std::invalid_argument("backward: one relation gradient per MS-LSTM layer expected");
    }

    Parameters grads = Parameters::zeros_like(params_);

    // Superpixel track, last layer first. dh_pixel[k] flows into P-LSTM layer k's output.
    std::vector<Tensor> dh_pixel(config_.num_mslstm_layers);
    Tensor dtrack_h;
    Tensor dtrack_m;
    if (with_relations) {
        for (std::size_t k = config_.num_mslstm_layers; k-- > 0;) {
            Tensor dregion = relation_backward(pass.region_h[k], structure.graphs[k], params_.relation[k],
                                               pass.relation_caches[k], drelation_logits[k], grads.relation[k]);
            MsLstmLayerGrads g = mslstm_layer_backward(
                structure.maps[k], structure.graphs[k], params_.mslstm[k], pass.ms_caches[k], config_.pi_smooth, mode,
                dtrack_h.empty() ? nullptr : &dtrack_h, dtrack_m.empty() ? nullptr : &dtrack_m, &dregion,
                grads.mslstm[k]);
            dtrack_h = std::move(g.h_track);
            dtrack_m = std::move(g.m_track);
            dh_pixel[k] = std::move(g.h_pixel);
        }
    }

    // Pixel track.
    PixelLayerState dstate = PixelLayerState::zeros(d, height, width);
    dstate.h_depth = classify_backward(pass.pixel_states.back().h_depth, params_.label, dsurface_logits, grads.label);
    for (std::size_t i = config_.num_plstm_layers; i-- > 0;) {
        if (i < dh_pixel.size() && !dh_pixel[i].empty()) dstate.h_depth += dh_pixel[i];
        dstate = plstm_layer_backward(pass.pixel_states[i], pass.pixel_states[i + 1], params_.plstm[i],
                                      pass.pixel_caches[i], dstate, mode, grads.plstm[i]);
    }
    if (!dtrack_h.empty()) {
        dstate.h_depth += dtrack_h;
        dstate.m_depth += dtrack_m;
    }

    const Tensor dfeatures = transition_backward(pass.features, params_.transition, dstate, grads.transition);
    std::vector<ConvLayerGrads> conv_grads;
    conv_backward(params_.conv, pass.conv_cache, image, dfeatures, conv_grads);
    for (std::size_t i = 0; i < conv_grads.size(); ++i) {
        grads.conv.layers[i].weight = std::move(conv_grads[i].weight);
        grads.conv.layers[i].bias = std::move(conv_grads[i].bias);
    }
    return grads;
}

}  // namespace hlstm
