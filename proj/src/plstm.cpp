#include "hlstm/plstm.hpp"

#include <cmath>
#include <stdexcept>

#include "hlstm/lstm.hpp"
#include "hlstm/numerics.hpp"

namespace hlstm {

PixelLayerState PixelLayerState::zeros(std::size_t d, std::size_t height, std::size_t width, std::size_t neighbors) {
    PixelLayerState s;
    s.h_depth = Tensor({d, height, width});
    s.m_depth = Tensor({d, height, width});
    s.h_spatial.assign(neighbors, s.h_depth);
    s.m_spatial.assign(neighbors, s.m_depth);
    return s;
}

PixelLayerState& PixelLayerState::operator+=(const PixelLayerState& other) {
    for (std::size_t n = 0; n < h_spatial.size(); ++n) {
        h_spatial[n] += other.h_spatial[n];
        m_spatial[n] += other.m_spatial[n];
    }
    h_depth += other.h_depth;
    m_depth += other.m_depth;
    return *this;
}

namespace {

bool inside(long y, long x, std::size_t height, std::size_t width) {
    return y >= 0 && x >= 0 && y < static_cast<long>(height) && x < static_cast<long>(width);
}

void check_state(const PixelLayerState& s) {
    if (s.h_spatial.size() != kNeighborCount || s.m_spatial.size() != kNeighborCount) {
        throw std::invalid_argument("PixelLayerState must carry eight spatial fields");
    }
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        require_same_shape(s.h_spatial[n], s.h_depth, "PixelLayerState h_spatial");
        require_same_shape(s.m_spatial[n], s.h_depth, "PixelLayerState m_spatial");
    }
    require_same_shape(s.m_depth, s.h_depth, "PixelLayerState m_depth");
}

}  // namespace

Tensor gather_input_state(const PixelLayerState& state, std::size_t y, std::size_t x) {
    const std::size_t d = state.hidden_dim();
    if (y >= state.height() || x >= state.width()) throw std::out_of_range("gather_input_state: pixel outside grid");
    Tensor out({(kNeighborCount + 1) * d});
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        const long qy = static_cast<long>(y) + kDirectionOffsets[n].dy;
        const long qx = static_cast<long>(x) + kDirectionOffsets[n].dx;
        if (!inside(qy, qx, state.height(), state.width())) continue;
        const Tensor& field = state.h_spatial[opposite(n)];
        for (std::size_t c = 0; c < d; ++c) {
            out[n * d + c] = field.at(c, static_cast<std::size_t>(qy), static_cast<std::size_t>(qx));
        }
    }
    for (std::size_t c = 0; c < d; ++c) out[kNeighborCount * d + c] = state.h_depth.at(c, y, x);
    return out;
}

Tensor gather_input_matrix(const PixelLayerState& state) {
    check_state(state);
    const std::size_t d = state.hidden_dim();
    const std::size_t height = state.height();
    const std::size_t width = state.width();
    const std::size_t n_pix = height * width;
    Tensor out({(kNeighborCount + 1) * d, n_pix});
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        const Tensor& field = state.h_spatial[opposite(n)];
        const Offset off = kDirectionOffsets[n];
        for (std::size_t c = 0; c < d; ++c) {
            double* row = out.raw() + (n * d + c) * n_pix;
            const double* src = field.raw() + c * n_pix;
            for (std::size_t y = 0; y < height; ++y) {
                const long qy = static_cast<long>(y) + off.dy;
                if (qy < 0 || qy >= static_cast<long>(height)) continue;
                for (std::size_t x = 0; x < width; ++x) {
                    const long qx = static_cast<long>(x) + off.dx;
                    if (qx < 0 || qx >= static_cast<long>(width)) continue;
                    row[y * width + x] = src[static_cast<std::size_t>(qy) * width + static_cast<std::size_t>(qx)];
                }
            }
        }
    }
    const double* depth = state.h_depth.raw();
    std::copy(depth, depth + d * n_pix, out.raw() + kNeighborCount * d * n_pix);
    return out;
}

PLstmLayerWeights PLstmLayerWeights::init(std::size_t d, Rng& rng, std::size_t neighbors) {
    PLstmLayerWeights w;
    w.spatial = init_packed_gates(d, (neighbors + 1) * d, rng);
    w.depth = init_packed_gates(d, (neighbors + 1) * d, rng);
    return w;
}

PLstmLayerWeights PLstmLayerWeights::zeros(std::size_t d, std::size_t neighbors) {
    return {Tensor({4 * d, (neighbors + 1) * d}), Tensor({4 * d, (neighbors + 1) * d})};
}

PixelLayerState plstm_layer_forward(const PixelLayerState& state, const PLstmLayerWeights& weights, HiddenFrom mode,
                                    PLstmLayerCache* cache) {
    const std::size_t d = state.hidden_dim();
    const std::size_t n_pix = state.height() * state.width();
    if (weights.spatial.dim(0) != 4 * d || weights.depth.dim(0) != 4 * d) {
        throw std::invalid_argument("plstm_layer_forward: weights do not match hidden width");
    }
    Tensor inputs = gather_input_matrix(state);
    Tensor spatial({4 * d, n_pix});
    Tensor depth({4 * d, n_pix});
    matmul_acc(weights.spatial, inputs, spatial);
    matmul_acc(weights.depth, inputs, depth);
    cell::activate_gates(spatial, d);
    cell::activate_gates(depth, d);

    PixelLayerState out = PixelLayerState::zeros(d, state.height(), state.width());
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        cell::forward(spatial, state.m_spatial[n].raw(), out.m_spatial[n].raw(), out.h_spatial[n].raw(), d, n_pix,
                      mode);
    }
    cell::forward(depth, state.m_depth.raw(), out.m_depth.raw(), out.h_depth.raw(), d, n_pix, mode);

    if (cache) {
        cache->inputs = std::move(inputs);
        cache->spatial_gates = std::move(spatial);
        cache->depth_gates = std::move(depth);
    }
    return out;
}

PixelLayerState plstm_layer_backward(const PixelLayerState& input, const PixelLayerState& output,
                                     const PLstmLayerWeights& weights, const PLstmLayerCache& cache,
                                     const PixelLayerState& doutput, HiddenFrom mode, PLstmLayerWeights& dweights) {
    const std::size_t d = input.hidden_dim();
    const std::size_t height = input.height();
    const std::size_t width = input.width();
    const std::size_t n_pix = height * width;
    if (dweights.spatial.empty()) dweights = PLstmLayerWeights::zeros(d);

    PixelLayerState dinput = PixelLayerState::zeros(d, height, width);
    Tensor dspatial({4 * d, n_pix});
    Tensor ddepth({4 * d, n_pix});
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        cell::backward(cache.spatial_gates, input.m_spatial[n].raw(), output.m_spatial[n].raw(),
                       output.h_spatial[n].raw(), doutput.m_spatial[n].raw(), doutput.h_spatial[n].raw(),
                       dspatial.raw(), dinput.m_spatial[n].raw(), d, n_pix, mode);
    }
    cell::backward(cache.depth_gates, input.m_depth.raw(), output.m_depth.raw(), output.h_depth.raw(),
                   doutput.m_depth.raw(), doutput.h_depth.raw(), ddepth.raw(), dinput.m_depth.raw(), d, n_pix, mode);
    cell::gate_activation_backward(cache.spatial_gates, dspatial, d);
    cell::gate_activation_backward(cache.depth_gates, ddepth, d);

    matmul_nt_acc(dspatial, cache.inputs, dweights.spatial);
    matmul_nt_acc(ddepth, cache.inputs, dweights.depth);
    Tensor dinputs(cache.inputs.shape());
    matmul_tn_acc(weights.spatial, dspatial, dinputs);
    matmul_tn_acc(weights.depth, ddepth, dinputs);

    // Scatter the gathered-input gradient back to the fields it was read from.
    for (std::size_t n = 0; n < kNeighborCount; ++n) {
        Tensor& field = dinput.h_spatial[opposite(n)];
        const Offset off = kDirectionOffsets[n];
        for (std::size_t c = 0; c < d; ++c) {
            const double* row = dinputs.raw() + (n * d + c) * n_pix;
            double* dst = field.raw() + c * n_pix;
            for (std::size_t y = 0; y < height; ++y) {
                const long qy = static_cast<long>(y) + off.dy;
                if (qy < 0 || qy >= static_cast<long>(height)) continue;
                for (std::size_t x = 0; x < width; ++x) {
                    const long qx = static_cast<long>(x) + off.dx;
                    if (qx < 0 || qx >= static_cast<long>(width)) continue;
                    dst[static_cast<std::size_t>(qy) * width + static_cast<std::size_t>(qx)] += row[y * width + x];
                }
            }
        }
    }
    const double* ddepth_in = dinputs.raw() + kNeighborCount * d * n_pix;
    double* dh_depth = dinput.h_depth.raw();
    for (std::size_t i = 0; i < d * n_pix; ++i) dh_depth[i] += ddepth_in[i];
    return dinput;
}

SurfaceClassifier SurfaceClassifier::init(std::size_t classes, std::size_t d, Rng& rng) {
    SurfaceClassifier c = zeros(classes, d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : c.weight.data()) v = rng.uniform(-s, s);
    return c;
}

SurfaceClassifier SurfaceClassifier::zeros(std::size_t classes, std::size_t d) {
    return {Tensor({classes, d}), Tensor({classes})};
}

Tensor classify_pixels(const Tensor& h_depth, const SurfaceClassifier& classifier) {
    const std::size_t d = h_depth.dim(0);
    const std::size_t height = h_depth.dim(1);
    const std::size_t width = h_depth.dim(2);
    const std::size_t n = height * width;
    const std::size_t classes = classifier.weight.dim(0);
    if (classifier.weight.dim(1) != d) throw std::invalid_argument("classify_pixels: classifier width mismatch");
    Tensor logits({classes, n});
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t j = 0; j < n; ++j) logits.at(k, j) = classifier.bias[k];
    }
    matmul_acc(classifier.weight, h_depth.reshaped({d, n}), logits);
    std::vector<double> column(classes);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < classes; ++k) column[k] = logits.at(k, j);
        softmax_inplace(column);
        for (std::size_t k = 0; k < classes; ++k) logits.at(k, j) = column[k];
    }
    return logits.reshaped({classes, height, width});
}

Tensor classify_backward(const Tensor& h_depth, const SurfaceClassifier& classifier, const Tensor& dlogits,
                         SurfaceClassifier& dclassifier) {
    const std::size_t d = h_depth.dim(0);
    const std::size_t n = h_depth.dim(1) * h_depth.dim(2);
    const std::size_t classes = classifier.weight.dim(0);
    if (dclassifier.weight.empty()) dclassifier = SurfaceClassifier::zeros(classes, d);
    const Tensor dl = dlogits.reshaped({classes, n});
    for (std::size_t k = 0; k < classes; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += dl.at(k, j);
        dclassifier.bias[k] += acc;
    }
    matmul_nt_acc(dl, h_depth.reshaped({d, n}), dclassifier.weight);
    Tensor dh({d, n});
    matmul_tn_acc(classifier.weight, dl, dh);
    return dh.reshaped(h_depth.shape());
}

SurfaceLabelMap argmax_labels(const Tensor& probs) {
    const std::size_t classes = probs.dim(0);
    const std::size_t height = probs.dim(1);
    const std::size_t width = probs.dim(2);
    SurfaceLabelMap map(height, width, classes);
    const std::size_t n = height * width;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes; ++k) {
            if (probs[k * n + j] > probs[best * n + j]) best = k;
        }
        map.labels[j] = static_cast<std::uint8_t>(best);
    }
    return map;
}

}  // namespace hlstm
