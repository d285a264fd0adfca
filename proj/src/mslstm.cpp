#include "hlstm/mslstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hlstm/lstm.hpp"
#include "hlstm/numerics.hpp"

namespace hlstm {

Tensor lse_fuse(const Tensor& cells, double pi) {
    if (cells.rank() != 2 || cells.dim(1) == 0) throw std::invalid_argument("lse_fuse: empty region");
    if (!(pi > 0.0)) throw std::invalid_argument("lse_fuse: smoothness must be > 0");
    const std::size_t channels = cells.dim(0);
    const std::size_t count = cells.dim(1);
    Tensor out({channels});
    for (std::size_t c = 0; c < channels; ++c) {
        const double* row = cells.raw() + c * count;
        const double peak = *std::max_element(row, row + count);
        double acc = 0.0;
        for (std::size_t j = 0; j < count; ++j) acc += std::exp(pi * (row[j] - peak));
        out[c] = peak + std::log(acc / static_cast<double>(count)) / pi;
    }
    return out;
}

Tensor gather_superpixel_input(const AdjacencyGraph& graph, const Tensor& fused, std::uint32_t region) {
    const std::size_t width = fused.dim(0);
    const std::size_t k = fused.dim(1);
    if (region >= k || region >= graph.neighbors.size()) throw std::out_of_range("gather_superpixel_input: bad region");
    Tensor out({2 * width});
    const auto& nbrs = graph.neighbors[region];
    if (!nbrs.empty()) {
        for (std::uint32_t nb : nbrs) {
            for (std::size_t c = 0; c < width; ++c) out[c] += fused[c * k + nb];
        }
        const double inv = 1.0 / static_cast<double>(nbrs.size());
        for (std::size_t c = 0; c < width; ++c) out[c] *= inv;
    }
    for (std::size_t c = 0; c < width; ++c) out[width + c] = fused[c * k + region];
    return out;
}

MsLstmLayerOutput mslstm_layer_forward(const Tensor& h_track, const Tensor& m_track, const Tensor& h_pixel,
                                       const SuperpixelMap& map, const AdjacencyGraph& graph, const Tensor& weights,
                                       double pi, HiddenFrom mode, MsLstmCache* cache) {
    require_same_shape(h_track, m_track, "mslstm_layer_forward m_track");
    require_same_shape(h_track, h_pixel, "mslstm_layer_forward h_pixel");
    const std::size_t d = h_track.dim(0);
    const std::size_t n = map.assignment.size();
    const std::size_t k = map.region_count;
    if (h_track.dim(1) != map.height || h_track.dim(2) != map.width) {
        throw std::invalid_argument("mslstm_layer_forward: field extents do not match the superpixel map");
    }
    if (weights.rank() != 2 || weights.dim(0) != 4 * d || weights.dim(1) != 4 * d) {
        throw std::invalid_argument("mslstm_layer_forward: weights must be 4d x 4d");
    }

    Tensor hbar({2 * d, n});
    std::copy(h_track.raw(), h_track.raw() + d * n, hbar.raw());
    std::copy(h_pixel.raw(), h_pixel.raw() + d * n, hbar.raw() + d * n);

    // Log-sum-exp pooling per region and channel.
    const auto pixels = map.region_pixels();
    Tensor fused({2 * d, k});
    for (std::size_t c = 0; c < 2 * d; ++c) {
        const double* row = hbar.raw() + c * n;
        for (std::size_t r = 0; r < k; ++r) {
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t p : pixels[r]) peak = std::max(peak, row[p]);
            double acc = 0.0;
            for (std::size_t p : pixels[r]) acc += std::exp(pi * (row[p] - peak));
            fused.at(c, r) = peak + std::log(acc / static_cast<double>(pixels[r].size())) / pi;
        }
    }

    Tensor inputs({4 * d, k});
    for (std::size_t r = 0; r < k; ++r) {
        const Tensor column = gather_superpixel_input(graph, fused, static_cast<std::uint32_t>(r));
        for (std::size_t c = 0; c < 4 * d; ++c) inputs.at(c, r) = column[c];
    }

    Tensor region_m = region_mean(m_track, map);
    Tensor gates({4 * d, k});
    matmul_acc(weights, inputs, gates);
    cell::activate_gates(gates, d);
    Tensor region_m_next({d, k});
    Tensor region_h_next({d, k});
    cell::forward(gates, region_m.raw(), region_m_next.raw(), region_h_next.raw(), d, k, mode);

    MsLstmLayerOutput out;
    out.h_field = assign_back(region_h_next, map);
    out.m_field = assign_back(region_m_next, map);
    out.region_h = region_h_next;
    out.region_m = region_m_next;
    if (cache) {
        cache->hbar = std::move(hbar);
        cache->fused = std::move(fused);
        cache->inputs = std::move(inputs);
        cache->gates = std::move(gates);
        cache->region_m = std::move(region_m);
        cache->region_m_next = std::move(region_m_next);
        cache->region_h_next = std::move(region_h_next);
    }
    return out;
}

MsLstmLayerGrads mslstm_layer_backward(const SuperpixelMap& map, const AdjacencyGraph& graph, const Tensor& weights,
                                       const MsLstmCache& cache, double pi, HiddenFrom mode, const Tensor* dh_field,
                                       const Tensor* dm_field, const Tensor* dregion_h, Tensor& dweights) {
    const std::size_t d = cache.region_m.dim(0);
    const std::size_t k = map.region_count;
    const std::size_t n = map.assignment.size();
    if (dweights.empty()) dweights = Tensor::zeros_like(weights);

    // Adjoint of assign_back: sum pixel gradients per region.
    Tensor dh_region({d, k});
    Tensor dm_region({d, k});
    if (dregion_h) dh_region += *dregion_h;
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t r = map.assignment[p];
            if (dh_field) dh_region[c * k + r] += (*dh_field)[c * n + p];
            if (dm_field) dm_region[c * k + r] += (*dm_field)[c * n + p];
        }
    }

    Tensor dgates({4 * d, k});
    Tensor dm_prev({d, k});
    cell::backward(cache.gates, cache.region_m.raw(), cache.region_m_next.raw(), cache.region_h_next.raw(),
                   dm_region.raw(), dh_region.raw(), dgates.raw(), dm_prev.raw(), d, k, mode);
    cell::gate_activation_backward(cache.gates, dgates, d);
    matmul_nt_acc(dgates, cache.inputs, dweights);
    Tensor dinputs({4 * d, k});
    matmul_tn_acc(weights, dgates, dinputs);

    const std::size_t width = 2 * d;
    Tensor dfused({width, k});
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < width; ++c) dfused.at(c, r) += dinputs.at(width + c, r);
        const auto& nbrs = graph.neighbors[r];
        if (nbrs.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nbrs.size());
        for (std::uint32_t nb : nbrs) {
            for (std::size_t c = 0; c < width; ++c) dfused.at(c, nb) += dinputs.at(c, r) * inv;
        }
    }

    // d fused / d hbar_j = exp(pi (hbar_j - fused)) / Q, the pooling weights.
    const std::vector<std::size_t> sizes = map.region_sizes();
    Tensor dhbar({width, n});
    for (std::size_t c = 0; c < width; ++c) {
        const double* row = cache.hbar.raw() + c * n;
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t r = map.assignment[p];
            const double w = std::exp(pi * (row[p] - cache.fused.at(c, r))) / static_cast<double>(sizes[r]);
            dhbar[c * n + p] = dfused.at(c, r) * w;
        }
    }

    MsLstmLayerGrads grads;
    grads.h_track = Tensor({d, map.height, map.width});
    grads.h_pixel = Tensor({d, map.height, map.width});
    grads.m_track = Tensor({d, map.height, map.width});
    std::copy(dhbar.raw(), dhbar.raw() + d * n, grads.h_track.raw());
    std::copy(dhbar.raw() + d * n, dhbar.raw() + 2 * d * n, grads.h_pixel.raw());
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t p = 0; p < n; ++p) {
            const std::uint32_t r = map.assignment[p];
            grads.m_track[c * n + p] = dm_prev.at(c, r) / static_cast<double>(sizes[r]);
        }
    }
    return grads;
}

RelationClassifier RelationClassifier::init(std::size_t d, std::size_t hidden, Rng& rng) {
    RelationClassifier c = zeros(d, hidden);
    if (hidden > 0) {
        const double s = 1.0 / std::sqrt(static_cast<double>(2 * d));
        for (double& v : c.hidden_weight.data()) v = rng.uniform(-s, s);
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(hidden > 0 ? hidden : 2 * d));
    for (double& v : c.out_weight.data()) v = rng.uniform(-s, s);
    return c;
}

RelationClassifier RelationClassifier::zeros(std::size_t d, std::size_t hidden) {
    RelationClassifier c;
    if (hidden > 0) {
        c.hidden_weight = Tensor({hidden, 2 * d});
        c.hidden_bias = Tensor({hidden});
        c.out_weight = Tensor({kRelationCount, hidden});
    } else {
        c.out_weight = Tensor({kRelationCount, 2 * d});
    }
    c.out_bias = Tensor({kRelationCount});
    return c;
}

RelationLabel RelationPrediction::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return static_cast<RelationLabel>(best);
}

RelationGraphPrediction predict_relations(const Tensor& region_h, const AdjacencyGraph& graph,
                                          const RelationClassifier& classifier, double scale, RelationCache* cache) {
    const std::size_t d = region_h.dim(0);
    const std::size_t k = region_h.dim(1);
    if (k != graph.node_count) throw std::invalid_argument("predict_relations: hidden cells missing for some regions");
    const std::size_t pairs = graph.ordered_pairs.size();

    Tensor inputs({2 * d, pairs});
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto [a, b] = graph.ordered_pairs[i];
        for (std::size_t c = 0; c < d; ++c) {
            inputs.at(c, i) = region_h.at(c, a);
            inputs.at(d + c, i) = region_h.at(c, b);
        }
    }
    Tensor hidden;
    const Tensor* features = &inputs;
    if (!classifier.linear()) {
        hidden = Tensor({classifier.hidden_weight.dim(0), pairs});
        for (std::size_t h = 0; h < hidden.dim(0); ++h) {
            for (std::size_t i = 0; i < pairs; ++i) hidden.at(h, i) = classifier.hidden_bias[h];
        }
        matmul_acc(classifier.hidden_weight, inputs, hidden);
        for (double& v : hidden.data()) v = std::tanh(v);
        features = &hidden;
    }
    Tensor logits({kRelationCount, pairs});
    for (std::size_t r = 0; r < kRelationCount; ++r) {
        for (std::size_t i = 0; i < pairs; ++i) logits.at(r, i) = classifier.out_bias[r];
    }
    matmul_acc(classifier.out_weight, *features, logits);

    RelationGraphPrediction out;
    out.scale = scale;
    out.pairs.resize(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        RelationPrediction& pred = out.pairs[i];
        pred.region_a = graph.ordered_pairs[i].first;
        pred.region_b = graph.ordered_pairs[i].second;
        for (std::size_t r = 0; r < kRelationCount; ++r) pred.probs[r] = logits.at(r, i);
        softmax_inplace(pred.probs);
    }
    if (cache) {
        cache->inputs = std::move(inputs);
        cache->hidden = std::move(hidden);
    }
    return out;
}

Tensor relation_backward(const Tensor& region_h, const AdjacencyGraph& graph, const RelationClassifier& classifier,
                         const RelationCache& cache, const Tensor& dlogits, RelationClassifier& dclassifier) {
    const std::size_t d = region_h.dim(0);
    const std::size_t k = region_h.dim(1);
    const std::size_t pairs = graph.ordered_pairs.size();
    if (dclassifier.out_weight.empty()) {
        dclassifier = RelationClassifier::zeros(d, classifier.linear() ? 0 : classifier.hidden_weight.dim(0));
    }
    for (std::size_t r = 0; r < kRelationCount; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pairs; ++i) acc += dlogits.at(r, i);
        dclassifier.out_bias[r] += acc;
    }
    Tensor dinputs({2 * d, pairs});
    if (classifier.linear()) {
        matmul_nt_acc(dlogits, cache.inputs, dclassifier.out_weight);
        matmul_tn_acc(classifier.out_weight, dlogits, dinputs);
    } else {
        matmul_nt_acc(dlogits, cache.hidden, dclassifier.out_weight);
        Tensor dhidden(cache.hidden.shape());
        matmul_tn_acc(classifier.out_weight, dlogits, dhidden);
        for (std::size_t i = 0; i < dhidden.size(); ++i) dhidden[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
        for (std::size_t h = 0; h < dhidden.dim(0); ++h) {
            double acc = 0.0;
            for (std::size_t i = 0; i < pairs; ++i) acc += dhidden.at(h, i);
            dclassifier.hidden_bias[h] += acc;
        }
        matmul_nt_acc(dhidden, cache.inputs, dclassifier.hidden_weight);
        matmul_tn_acc(classifier.hidden_weight, dhidden, dinputs);
    }
    Tensor dregion({d, k});
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto [a, b] = graph.ordered_pairs[i];
        for (std::size_t c = 0; c < d; ++c) {
            dregion.at(c, a) += dinputs.at(c, i);
            dregion.at(c, b) += dinputs.at(d + c, i);
        }
    }
    return dregion;
}

}  // namespace hlstm
