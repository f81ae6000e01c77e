#pragma once

// The dilated residual denoiser: Conv+ReLU, a stack of DilatedConv-BN-ReLU
// blocks, and a final Conv producing the noise estimate f(y). Denoising is
// y - f(y).

#include <string>
#include <vector>

#include "drdn/conv_arith.hpp"
#include "drdn/layers.hpp"
#include "drdn/tensor.hpp"

namespace drdn {

struct NetworkConfig {
    int depth = 10;        // convolutional layer count D
    int width = 64;        // hidden feature channels W
    int io_channels = 1;   // 1 gray, 3 color
    int patch_size = 40;   // training patch side, pixels

    // Layer l (1-based): plain convolution at both ends, 2-dilated in between.
    int dilation_at(int layer) const { return (layer == 1 || layer == depth) ? 1 : 2; }
    // p = d keeps the output size equal to the input size for k=3.
    int padding_at(int layer) const { return dilation_at(layer); }

    void validate() const {
        if (depth < 3) throw ConfigInvalid("depth must be >= 3");
        if (width < 1) throw ConfigInvalid("width must be >= 1");
        if (io_channels != 1 && io_channels != 3)
            throw ConfigInvalid("io_channels must be 1 or 3");
        if (patch_size < 1) throw ConfigInvalid("patch_size must be >= 1");
    }

    LayerStackSpec stack() const {
        LayerStackSpec stack;
        stack.input_size = patch_size;
        for (int l = 1; l <= depth; ++l)
            stack.layers.push_back({3, padding_at(l), 1, dilation_at(l)});
        return stack;
    }

    long final_receptive_field() const {
        const RfTable table = receptive_field(stack());
        return table.per_layer.back().receptive_field;
    }

    // Depth-selection rule: the last layer's receptive field should stay
    // below patch_size + (k-1). Violations are reported, not rejected.
    bool depth_rule_ok() const { return final_receptive_field() < patch_size + 2; }
};

inline NetworkConfig gray_config() { return {10, 64, 1, 40}; }
inline NetworkConfig color_config() { return {12, 64, 3, 50}; }

// Exact count of learnable scalars: conv weights, first/last biases,
// BN gamma and beta. Running statistics are not learnable.
inline long param_count(const NetworkConfig& config) {
    config.validate();
    const long w = config.width, c = config.io_channels, k2 = 9;
    long total = 0;
    total += w * c * k2 + w;                       // first conv + bias
    total += (config.depth - 2) * (w * w * k2);    // middle convs, no bias
    total += (config.depth - 2) * (2 * w);         // BN gamma + beta
    total += c * w * k2 + c;                       // last conv + bias
    return total;
}

template <typename T>
struct DenoiserModel {
    NetworkConfig config;
    std::vector<ConvLayer<T>> convs;       // depth entries
    std::vector<BatchNormLayer<T>> bns;    // depth-2 entries, for layers 2..D-1

    template <typename U>
    DenoiserModel<U> cast() const {
        DenoiserModel<U> out;
        out.config = config;
        for (const auto& conv : convs) out.convs.push_back(conv.template cast<U>());
        for (const auto& bn : bns) out.bns.push_back(bn.template cast<U>());
        return out;
    }
};

using DenoiserModelF = DenoiserModel<float>;

template <typename T>
DenoiserModel<T> build(const NetworkConfig& config, RngState& rng) {
    config.validate();
    DenoiserModel<T> model;
    model.config = config;
    for (int l = 1; l <= config.depth; ++l) {
        const int in_ch = (l == 1) ? config.io_channels : config.width;
        const int out_ch = (l == config.depth) ? config.io_channels : config.width;
        ConvLayer<T> conv;
        conv.weights = Tensor4<T>(out_ch, in_ch, 3, 3);
        conv.padding = config.padding_at(l);
        conv.dilation = config.dilation_at(l);
        if (l == 1 || l == config.depth) conv.bias.assign(out_ch, T(0));
        msra_init(conv, rng);
        model.convs.push_back(std::move(conv));
        if (l >= 2 && l < config.depth) model.bns.emplace_back(config.width);
    }
    return model;
}

// Intermediate activations retained during a training forward pass.
template <typename T>
struct ForwardCache {
    std::vector<Tensor4<T>> conv_inputs;   // input to conv l
    std::vector<BnCache<T>> bn_caches;
    std::vector<Tensor4<T>> relu_inputs;   // input to ReLU after layer l (l < D)
};

// f(y): the predicted noise map, same shape as y. Training mode uses batch
// statistics in BN and fills `cache` for backprop; inference mode uses the
// running statistics and mutates nothing.
template <typename T>
Tensor4<T> forward_residual(DenoiserModel<T>& model, const Tensor4<T>& y, bool training = false,
                            ForwardCache<T>* cache = nullptr) {
    if (y.shape().c != model.config.io_channels)
        throw ShapeMismatch("expected " + std::to_string(model.config.io_channels) +
                            " channels, got " + std::to_string(y.shape().c));
    const int depth = model.config.depth;
    if (cache) {
        cache->conv_inputs.clear();
        cache->bn_caches.assign(depth - 2, BnCache<T>{});
        cache->relu_inputs.clear();
    }
    Tensor4<T> act = y;
    for (int l = 1; l <= depth; ++l) {
        if (cache) cache->conv_inputs.push_back(act);
        act = conv_forward(model.convs[l - 1], act);
        if (l >= 2 && l < depth) {
            BatchNormLayer<T>& bn = model.bns[l - 2];
            act = training ? bn_forward_train(bn, act, cache ? &cache->bn_caches[l - 2] : nullptr)
                           : bn_forward_infer(bn, act);
        }
        if (l < depth) {
            if (cache) cache->relu_inputs.push_back(act);
            act = relu_forward(act);
        }
    }
    return act;
}

template <typename T>
Tensor4<T> forward_residual(const DenoiserModel<T>& model, const Tensor4<T>& y) {
    return forward_residual(const_cast<DenoiserModel<T>&>(model), y, /*training=*/false);
}

// y - f(y), clamped to [0,1]. The model must be frozen (inference mode).
template <typename T>
Tensor4<T> denoise(const DenoiserModel<T>& model, const Tensor4<T>& y) {
    return clamp01(sub(y, forward_residual(model, y)));
}

template <typename T>
struct ModelGrads {
    std::vector<Tensor4<T>> d_weights;       // per conv
    std::vector<std::vector<T>> d_bias;      // per conv (empty where no bias)
    std::vector<std::vector<T>> d_gamma;     // per BN
    std::vector<std::vector<T>> d_beta;      // per BN
};

// One learnable parameter blob; `decay` marks it for weight decay.
template <typename T>
struct ParamView {
    T* data;
    long count;
    bool decay;
};

template <typename T>
std::vector<ParamView<T>> param_views(DenoiserModel<T>& model) {
    std::vector<ParamView<T>> views;
    for (auto& conv : model.convs) {
        views.push_back({conv.weights.data(), conv.weights.size(), true});
        if (!conv.bias.empty())
            views.push_back({conv.bias.data(), static_cast<long>(conv.bias.size()), false});
    }
    for (auto& bn : model.bns) {
        views.push_back({bn.gamma.data(), static_cast<long>(bn.gamma.size()), false});
        views.push_back({bn.beta.data(), static_cast<long>(bn.beta.size()), false});
    }
    return views;
}

template <typename T>
std::vector<ParamView<T>> grad_views(const DenoiserModel<T>& model, ModelGrads<T>& grads) {
    std::vector<ParamView<T>> views;
    for (size_t i = 0; i < model.convs.size(); ++i) {
        views.push_back({grads.d_weights[i].data(), grads.d_weights[i].size(), true});
        if (!model.convs[i].bias.empty())
            views.push_back(
                {grads.d_bias[i].data(), static_cast<long>(grads.d_bias[i].size()), false});
    }
    for (size_t i = 0; i < model.bns.size(); ++i) {
        views.push_back({grads.d_gamma[i].data(), static_cast<long>(grads.d_gamma[i].size()), false});
        views.push_back({grads.d_beta[i].data(), static_cast<long>(grads.d_beta[i].size()), false});
    }
    return views;
}

// Residual L2 loss over a batch,
//   L = 1/(2N) * sum_i ||f(y_i) - (y_i - x_i)||^2,  N = element count,
// with gradients for every learnable parameter.
template <typename T>
double loss_and_grads(DenoiserModel<T>& model, const Tensor4<T>& noisy, const Tensor4<T>& clean,
                      ModelGrads<T>& grads) {
    detail::require_same_shape(noisy.shape(), clean.shape());
    const int depth = model.config.depth;

    ForwardCache<T> cache;
    Tensor4<T> predicted = forward_residual(model, noisy, /*training=*/true, &cache);
    const Tensor4<T> target = sub(noisy, clean);
    const Tensor4<T> residual = sub(predicted, target);

    // Mean squared residual error over all elements, halved. Normalizing by
    // the element count rather than the batch size alone keeps gradient
    // magnitudes independent of the patch area, which the quoted learning
    // rates assume.
    const double element_count = static_cast<double>(residual.size());
    const double loss = reduce_all(Reduce::sum_of_squares, residual) / (2.0 * element_count);

    grads.d_weights.assign(depth, Tensor4<T>{});
    grads.d_bias.assign(depth, {});
    grads.d_gamma.assign(depth - 2, {});
    grads.d_beta.assign(depth - 2, {});

    Tensor4<T> d_act = scale(residual, static_cast<T>(1.0 / element_count));
    for (int l = depth; l >= 1; --l) {
        if (l < depth) d_act = relu_backward(cache.relu_inputs[l - 1], d_act);
        if (l >= 2 && l < depth) {
            BnGrads<T> bn = bn_backward(model.bns[l - 2], cache.bn_caches[l - 2], d_act);
            grads.d_gamma[l - 2] = std::move(bn.d_gamma);
            grads.d_beta[l - 2] = std::move(bn.d_beta);
            d_act = std::move(bn.d_input);
        }
        ConvGrads<T> conv = conv_backward(model.convs[l - 1], cache.conv_inputs[l - 1], d_act);
        grads.d_weights[l - 1] = std::move(conv.d_weights);
        grads.d_bias[l - 1] = std::move(conv.d_bias);
        d_act = std::move(conv.d_input);
    }
    return loss;
}

// The post-activation channel with the highest spatial mean at `layer_index`
// (1-based), min-max normalized to [0,1]. A constant map comes out as 0.5.
template <typename T>
Tensor4<T> dump_feature_map(const DenoiserModel<T>& model, const Tensor4<T>& y, int layer_index) {
    const int depth = model.config.depth;
    if (layer_index < 1 || layer_index > depth)
        throw IndexOutOfRange("layer " + std::to_string(layer_index) + " of " +
                              std::to_string(depth));
    auto& mutable_model = const_cast<DenoiserModel<T>&>(model);
    Tensor4<T> act = y;
    for (int l = 1; l <= layer_index; ++l) {
        act = conv_forward(mutable_model.convs[l - 1], act);
        if (l >= 2 && l < depth) act = bn_forward_infer(mutable_model.bns[l - 2], act);
        if (l < depth) act = relu_forward(act);
    }
    const Shape4 s = act.shape();
    int best = 0;
    double best_mean = -1e300;
    for (int c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w) sum += act.at(0, c, h, w);
        const double mean = sum / (static_cast<double>(s.h) * s.w);
        if (mean > best_mean + 0.0) {  // strict: ties keep the lowest index
            best_mean = mean;
            best = c;
        }
    }
    Tensor4<T> map(1, 1, s.h, s.w);
    T lo = act.at(0, best, 0, 0), hi = lo;
    for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
            const T v = act.at(0, best, h, w);
            lo = v < lo ? v : lo;
            hi = v > hi ? v : hi;
        }
    for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
            map.at(0, 0, h, w) =
                hi > lo ? (act.at(0, best, h, w) - lo) / (hi - lo) : static_cast<T>(0.5);
    return map;
}

}  // namespace drdn
