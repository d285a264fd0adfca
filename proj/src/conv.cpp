#include "hlstm/conv.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hlstm/numerics.hpp"

namespace hlstm {
namespace {

struct Geometry {
    std::size_t channels, height, width, out_height, out_width;
};

Geometry geometry_of(const ConvLayer& layer, const Tensor& input) {
    if (input.rank() != 3) throw std::invalid_argument("conv input must be (C, H, W), got " + shape_string(input.shape()));
    if (input.dim(0) != layer.in_channels) {
        throw std::invalid_argument("conv channel mismatch: layer expects " + std::to_string(layer.in_channels) +
                                    " channels, input has " + std::to_string(input.dim(0)));
    }
    return {input.dim(0), input.dim(1), input.dim(2), layer.output_extent(input.dim(1)),
            layer.output_extent(input.dim(2))};
}

Tensor im2col(const ConvLayer& layer, const Tensor& input, const Geometry& g) {
    const std::size_t k = layer.kernel;
    const std::size_t cols = g.out_height * g.out_width;
    Tensor out({g.channels * k * k, cols});
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = out.raw() + ((c * k + ky) * k + kx) * cols;
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const long iy = static_cast<long>(oy * layer.stride + ky) - static_cast<long>(layer.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const long ix = static_cast<long>(ox * layer.stride + kx) - static_cast<long>(layer.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                        row[oy * g.out_width + ox] = input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                    }
                }
            }
        }
    }
    return out;
}

void col2im_acc(const ConvLayer& layer, const Tensor& dcols, const Geometry& g, Tensor& dinput) {
    const std::size_t k = layer.kernel;
    const std::size_t cols = g.out_height * g.out_width;
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = dcols.raw() + ((c * k + ky) * k + kx) * cols;
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const long iy = static_cast<long>(oy * layer.stride + ky) - static_cast<long>(layer.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const long ix = static_cast<long>(ox * layer.stride + kx) - static_cast<long>(layer.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                        dinput.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                            row[oy * g.out_width + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

ConvLayer ConvLayer::zeros(std::size_t kernel, std::size_t in_channels, std::size_t out_channels, std::size_t stride,
                           std::size_t padding, bool relu) {
    ConvLayer layer;
    layer.kernel = kernel;
    layer.in_channels = in_channels;
    layer.out_channels = out_channels;
    layer.stride = stride;
    layer.padding = padding;
    layer.relu = relu;
    layer.weight = Tensor({out_channels, in_channels * kernel * kernel});
    layer.bias = Tensor({out_channels});
    return layer;
}

std::size_t ConvLayer::output_extent(std::size_t input_extent) const {
    const std::size_t padded = input_extent + 2 * padding;
    if (stride == 0 || padded < kernel) throw std::invalid_argument("conv: kernel larger than padded input");
    return (padded - kernel) / stride + 1;
}

ConvStack ConvStack::standard(std::size_t in_channels, const std::vector<std::size_t>& channels, Rng& rng) {
    ConvStack stack;
    std::size_t in = in_channels;
    for (std::size_t out : channels) {
        ConvLayer layer = ConvLayer::zeros(3, in, out, 1, 1, true);
        const double bound = std::sqrt(6.0 / static_cast<double>(in * 9));
        for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
        stack.layers.push_back(std::move(layer));
        in = out;
    }
    return stack;
}

Tensor conv_forward(const Tensor& image, const ConvStack& stack, ConvCache* cache) {
    if (cache) {
        cache->columns.clear();
        cache->outputs.clear();
    }
    Tensor current = image;
    for (const ConvLayer& layer : stack.layers) {
        const Geometry g = geometry_of(layer, current);
        Tensor cols = im2col(layer, current, g);
        const std::size_t n = g.out_height * g.out_width;
        Tensor out({layer.out_channels, n});
        for (std::size_t f = 0; f < layer.out_channels; ++f) {
            for (std::size_t j = 0; j < n; ++j) out.at(f, j) = layer.bias[f];
        }
        matmul_acc(layer.weight, cols, out);
        if (layer.relu) {
            for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        }
        current = out.reshaped({layer.out_channels, g.out_height, g.out_width});
        if (cache) {
            cache->columns.push_back(std::move(cols));
            cache->outputs.push_back(current);
        }
    }
    return current;
}

Tensor conv_backward(const ConvStack& stack, const ConvCache& cache, const Tensor& image, const Tensor& doutput,
                     std::vector<ConvLayerGrads>& grads) {
    if (grads.size() != stack.layers.size()) {
        grads.clear();
        for (const ConvLayer& layer : stack.layers) {
            grads.push_back({Tensor::zeros_like(layer.weight), Tensor::zeros_like(layer.bias)});
        }
    }
    Tensor upstream = doutput;
    for (std::size_t li = stack.layers.size(); li-- > 0;) {
        const ConvLayer& layer = stack.layers[li];
        const Tensor& input = li == 0 ? image : cache.outputs[li - 1];
        const Geometry g = geometry_of(layer, input);
        const std::size_t n = g.out_height * g.out_width;
        Tensor dpre = upstream.reshaped({layer.out_channels, n});
        if (layer.relu) {
            const Tensor& out = cache.outputs[li];
            for (std::size_t i = 0; i < dpre.size(); ++i) {
                if (!(out[i] > 0.0)) dpre[i] = 0.0;
            }
        }
        for (std::size_t f = 0; f < layer.out_channels; ++f) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += dpre.at(f, j);
            grads[li].bias[f] += acc;
        }
        matmul_nt_acc(dpre, cache.columns[li], grads[li].weight);
        Tensor dcols(cache.columns[li].shape());
        matmul_tn_acc(layer.weight, dpre, dcols);
        Tensor dinput(input.shape());
        col2im_acc(layer, dcols, g, dinput);
        upstream = std::move(dinput);
    }
    return upstream;
}

TransitionWeights TransitionWeights::init(std::size_t d, std::size_t features, Rng& rng) {
    TransitionWeights w{Tensor({d, features}), Tensor({d, features})};
    const double s = 1.0 / std::sqrt(static_cast<double>(features));
    for (double& v : w.hidden.data()) v = rng.uniform(-s, s);
    for (double& v : w.memory.data()) v = rng.uniform(-s, s);
    return w;
}

PixelLayerState transition_layer(const Tensor& features, const TransitionWeights& weights, std::size_t neighbors) {
    if (features.rank() != 3) throw std::invalid_argument("transition_layer expects (F, H, W) features");
    if (weights.hidden.dim(1) != features.dim(0) || weights.memory.dim(1) != features.dim(0)) {
        throw std::invalid_argument("transition_layer: weight width does not match feature channels");
    }
    const std::size_t d = weights.hidden_dim();
    const std::size_t height = features.dim(1);
    const std::size_t width = features.dim(2);
    const Tensor x = features.reshaped({features.dim(0), height * width});
    Tensor h({d, height * width});
    Tensor m({d, height * width});
    matmul_acc(weights.hidden, x, h);
    matmul_acc(weights.memory, x, m);

    PixelLayerState state;
    state.h_depth = h.reshaped({d, height, width});
    state.m_depth = m.reshaped({d, height, width});
    state.h_spatial.assign(neighbors, state.h_depth);
    state.m_spatial.assign(neighbors, state.m_depth);
    return state;
}

PixelLayerState transition_layer(const Tensor& features, const TransitionWeights& weights, const ModelConfig& config) {
    if (weights.hidden_dim() != config.d) throw std::invalid_argument("transition_layer: weights do not match config.d");
    return transition_layer(features, weights, config.neighbors);
}

Tensor transition_backward(const Tensor& features, const TransitionWeights& weights, const PixelLayerState& dstate,
                           TransitionWeights& dweights) {
    const std::size_t d = weights.hidden_dim();
    const std::size_t n = features.dim(1) * features.dim(2);
    Tensor dh = dstate.h_depth.reshaped({d, n});
    Tensor dm = dstate.m_depth.reshaped({d, n});
    for (const Tensor& t : dstate.h_spatial) {
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += t[i];
    }
    for (const Tensor& t : dstate.m_spatial) {
        for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += t[i];
    }
    const Tensor x = features.reshaped({features.dim(0), n});
    if (dweights.hidden.empty()) dweights = {Tensor::zeros_like(weights.hidden), Tensor::zeros_like(weights.memory)};
    matmul_nt_acc(dh, x, dweights.hidden);
    matmul_nt_acc(dm, x, dweights.memory);
    Tensor dx({features.dim(0), n});
    matmul_tn_acc(weights.hidden, dh, dx);
    matmul_tn_acc(weights.memory, dm, dx);
    return dx.reshaped(features.shape());
}

}  // namespace hlstm
