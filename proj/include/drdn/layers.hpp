#pragma once

// Layer primitives of the DilatedConv-BN-ReLU block: dilated convolution,
// batch normalization, and ReLU, each with an analytic backward pass, plus
// MSRA weight initialization. Convolution stride is fixed at 1.

#include <cmath>
#include <vector>

#include "drdn/conv_arith.hpp"
#include "drdn/parallel.hpp"
#include "drdn/tensor.hpp"

namespace drdn {

// ---- convolution ------------------------------------------------------------

template <typename T>
struct ConvLayer {
    Tensor4<T> weights;   // (out_channels, in_channels, k, k)
    std::vector<T> bias;  // per out channel; empty means no bias
    int padding = 0;
    int dilation = 1;

    int out_channels() const { return weights.shape().n; }
    int in_channels() const { return weights.shape().c; }
    int filter_size() const { return weights.shape().h; }

    LayerSpec spec() const { return LayerSpec{filter_size(), padding, 1, dilation}; }

    template <typename U>
    ConvLayer<U> cast() const {
        ConvLayer<U> out;
        out.weights = weights.template cast<U>();
        out.bias.assign(bias.begin(), bias.end());
        out.padding = padding;
        out.dilation = dilation;
        return out;
    }
};

template <typename T>
struct ConvGrads {
    Tensor4<T> d_weights;
    std::vector<T> d_bias;
    Tensor4<T> d_input;
};

namespace detail {

template <typename T>
Tensor4<T> zero_pad(const Tensor4<T>& input, int pad) {
    const Shape4 s = input.shape();
    Tensor4<T> out(s.n, s.c, s.h + 2 * pad, s.w + 2 * pad);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int h = 0; h < s.h; ++h) {
                const T* src = input.data() + input.index(n, c, h, 0);
                T* dst = out.data() + out.index(n, c, h + pad, pad);
                for (int w = 0; w < s.w; ++w) dst[w] = src[w];
            }
    return out;
}

}  // namespace detail

template <typename T>
Tensor4<T> conv_forward(const ConvLayer<T>& layer, const Tensor4<T>& input) {
    const Shape4 in = input.shape();
    if (in.c != layer.in_channels())
        throw ShapeMismatch("conv expects " + std::to_string(layer.in_channels()) +
                            " input channels, got " + std::to_string(in.c));
    const LayerSpec spec = layer.spec();
    const int out_h = output_size(in.h, spec);
    const int out_w = output_size(in.w, spec);
    const int k = layer.filter_size();
    const int d = layer.dilation;
    const int oc = layer.out_channels();

    const Tensor4<T> padded = detail::zero_pad(input, layer.padding);
    Tensor4<T> out(in.n, oc, out_h, out_w);

    parallel_for(static_cast<long>(in.n) * oc, [&](long job) {
        const int n = static_cast<int>(job / oc);
        const int o = static_cast<int>(job % oc);
        T* plane = out.data() + out.index(n, o, 0, 0);
        const T init = layer.bias.empty() ? T(0) : layer.bias[o];
        for (long i = 0; i < static_cast<long>(out_h) * out_w; ++i) plane[i] = init;
        for (int c = 0; c < in.c; ++c)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const T wv = layer.weights.at(o, c, u, v);
                    if (wv == T(0)) continue;
                    for (int y = 0; y < out_h; ++y) {
                        const T* src = padded.data() + padded.index(n, c, y + d * u, d * v);
                        T* dst = plane + static_cast<long>(y) * out_w;
                        for (int x = 0; x < out_w; ++x) dst[x] += wv * src[x];
                    }
                }
    });
    return out;
}

template <typename T>
ConvGrads<T> conv_backward(const ConvLayer<T>& layer, const Tensor4<T>& input,
                           const Tensor4<T>& d_output) {
    const Shape4 in = input.shape();
    const LayerSpec spec = layer.spec();
    const int out_h = output_size(in.h, spec);
    const int out_w = output_size(in.w, spec);
    const Shape4 expected{in.n, layer.out_channels(), out_h, out_w};
    if (!(d_output.shape() == expected))
        throw ShapeMismatch("d_output " + d_output.shape().str() + " vs expected " +
                            expected.str());

    const int k = layer.filter_size();
    const int d = layer.dilation;
    const int p = layer.padding;
    const int oc = layer.out_channels();
    const Tensor4<T> padded = detail::zero_pad(input, p);

    ConvGrads<T> grads;
    grads.d_weights = Tensor4<T>(layer.weights.shape());
    if (!layer.bias.empty()) grads.d_bias.assign(oc, T(0));

    // Weight and bias gradients: one job per output channel.
    parallel_for(oc, [&](long job) {
        const int o = static_cast<int>(job);
        for (int c = 0; c < in.c; ++c)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    T acc = T(0);
                    for (int n = 0; n < in.n; ++n)
                        for (int y = 0; y < out_h; ++y) {
                            const T* src = padded.data() + padded.index(n, c, y + d * u, d * v);
                            const T* grad = d_output.data() + d_output.index(n, o, y, 0);
                            T row = T(0);
                            for (int x = 0; x < out_w; ++x) row += src[x] * grad[x];
                            acc += row;
                        }
                    grads.d_weights.at(o, c, u, v) = acc;
                }
        if (!layer.bias.empty()) {
            T acc = T(0);
            for (int n = 0; n < in.n; ++n) {
                const T* grad = d_output.data() + d_output.index(n, o, 0, 0);
                for (long i = 0; i < static_cast<long>(out_h) * out_w; ++i) acc += grad[i];
            }
            grads.d_bias[o] = acc;
        }
    });

    // Input gradient, accumulated into padded coordinates then cropped; the
    // slices destined for the zero padding are discarded by the crop.
    Tensor4<T> d_padded(in.n, in.c, in.h + 2 * p, in.w + 2 * p);
    parallel_for(static_cast<long>(in.n) * in.c, [&](long job) {
        const int n = static_cast<int>(job / in.c);
        const int c = static_cast<int>(job % in.c);
        for (int o = 0; o < oc; ++o)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const T wv = layer.weights.at(o, c, u, v);
                    if (wv == T(0)) continue;
                    for (int y = 0; y < out_h; ++y) {
                        const T* grad = d_output.data() + d_output.index(n, o, y, 0);
                        T* dst = d_padded.data() + d_padded.index(n, c, y + d * u, d * v);
                        for (int x = 0; x < out_w; ++x) dst[x] += wv * grad[x];
                    }
                }
    });
    grads.d_input = Tensor4<T>(in);
    for (int n = 0; n < in.n; ++n)
        for (int c = 0; c < in.c; ++c)
            for (int h = 0; h < in.h; ++h) {
                const T* src = d_padded.data() + d_padded.index(n, c, h + p, p);
                T* dst = grads.d_input.data() + grads.d_input.index(n, c, h, 0);
                for (int w = 0; w < in.w; ++w) dst[w] = src[w];
            }
    return grads;
}

// Weights ~ N(0, 2/fan_in) with fan_in = in_channels * k^2; biases zero.
template <typename T>
void msra_init(ConvLayer<T>& layer, RngState& rng) {
    const double fan_in = static_cast<double>(layer.in_channels()) * layer.filter_size() *
                          layer.filter_size();
    const double stddev = std::sqrt(2.0 / fan_in);
    for (long i = 0; i < layer.weights.size(); ++i)
        layer.weights[i] = static_cast<T>(stddev * rng.next_normal());
    for (T& b : layer.bias) b = T(0);
}

// ---- batch normalization ----------------------------------------------------

template <typename T>
struct BatchNormLayer {
    std::vector<T> gamma, beta;
    std::vector<T> running_mean, running_var;
    T epsilon = static_cast<T>(1e-5);
    T momentum = static_cast<T>(0.1);

    explicit BatchNormLayer(int channels = 0)
        : gamma(channels, T(1)),
          beta(channels, T(0)),
          running_mean(channels, T(0)),
          running_var(channels, T(1)) {}

    int channels() const { return static_cast<int>(gamma.size()); }

    template <typename U>
    BatchNormLayer<U> cast() const {
        BatchNormLayer<U> out(channels());
        out.gamma.assign(gamma.begin(), gamma.end());
        out.beta.assign(beta.begin(), beta.end());
        out.running_mean.assign(running_mean.begin(), running_mean.end());
        out.running_var.assign(running_var.begin(), running_var.end());
        out.epsilon = static_cast<U>(epsilon);
        out.momentum = static_cast<U>(momentum);
        return out;
    }
};

// Forward state needed by bn_backward.
template <typename T>
struct BnCache {
    Tensor4<T> normalized;       // x_hat
    std::vector<T> inv_std;      // 1/sqrt(var + eps) per channel
};

template <typename T>
struct BnGrads {
    std::vector<T> d_gamma, d_beta;
    Tensor4<T> d_input;
};

// Training mode normalizes by batch statistics over (N,H,W) and updates the
// running averages; pass cache to enable the backward pass.
template <typename T>
Tensor4<T> bn_forward_train(BatchNormLayer<T>& layer, const Tensor4<T>& input,
                            BnCache<T>* cache = nullptr) {
    const Shape4 s = input.shape();
    if (s.c != layer.channels())
        throw ShapeMismatch("bn expects " + std::to_string(layer.channels()) + " channels");
    const long count = static_cast<long>(s.n) * s.h * s.w;
    if (count == 1) throw DegenerateBatch("batch variance undefined for a single value");

    Tensor4<T> out(s);
    if (cache) {
        cache->normalized = Tensor4<T>(s);
        cache->inv_std.assign(s.c, T(0));
    }
    for (int c = 0; c < s.c; ++c) {
        double sum = 0.0, sum_sq = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const T* src = input.data() + input.index(n, c, 0, 0);
            for (long i = 0; i < static_cast<long>(s.h) * s.w; ++i) {
                sum += src[i];
                sum_sq += static_cast<double>(src[i]) * src[i];
            }
        }
        const double mean = sum / count;
        double var = sum_sq / count - mean * mean;
        if (var < 0.0) var = 0.0;  // rounding guard
        const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(layer.epsilon));

        layer.running_mean[c] = (T(1) - layer.momentum) * layer.running_mean[c] +
                                layer.momentum * static_cast<T>(mean);
        layer.running_var[c] = (T(1) - layer.momentum) * layer.running_var[c] +
                               layer.momentum * static_cast<T>(var);

        const T g = layer.gamma[c], b = layer.beta[c];
        for (int n = 0; n < s.n; ++n) {
            const T* src = input.data() + input.index(n, c, 0, 0);
            T* dst = out.data() + out.index(n, c, 0, 0);
            T* norm = cache ? cache->normalized.data() + cache->normalized.index(n, c, 0, 0)
                            : nullptr;
            for (long i = 0; i < static_cast<long>(s.h) * s.w; ++i) {
                const T x_hat = static_cast<T>((src[i] - mean) * inv_std);
                if (norm) norm[i] = x_hat;
                dst[i] = g * x_hat + b;
            }
        }
        if (cache) cache->inv_std[c] = static_cast<T>(inv_std);
    }
    return out;
}

// Inference mode is a pure per-channel affine map from the running statistics.
template <typename T>
Tensor4<T> bn_forward_infer(const BatchNormLayer<T>& layer, const Tensor4<T>& input) {
    const Shape4 s = input.shape();
    if (s.c != layer.channels())
        throw ShapeMismatch("bn expects " + std::to_string(layer.channels()) + " channels");
    Tensor4<T> out(s);
    for (int c = 0; c < s.c; ++c) {
        const T inv_std =
            static_cast<T>(1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) +
                                           static_cast<double>(layer.epsilon)));
        const T g = layer.gamma[c] * inv_std;
        const T b = layer.beta[c] - g * layer.running_mean[c];
        for (int n = 0; n < s.n; ++n) {
            const T* src = input.data() + input.index(n, c, 0, 0);
            T* dst = out.data() + out.index(n, c, 0, 0);
            for (long i = 0; i < static_cast<long>(s.h) * s.w; ++i) dst[i] = g * src[i] + b;
        }
    }
    return out;
}

template <typename T>
BnGrads<T> bn_backward(const BatchNormLayer<T>& layer, const BnCache<T>& cache,
                       const Tensor4<T>& d_output) {
    const Shape4 s = d_output.shape();
    detail::require_same_shape(s, cache.normalized.shape());
    const long count = static_cast<long>(s.n) * s.h * s.w;

    BnGrads<T> grads;
    grads.d_gamma.assign(s.c, T(0));
    grads.d_beta.assign(s.c, T(0));
    grads.d_input = Tensor4<T>(s);

    for (int c = 0; c < s.c; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const T* dy = d_output.data() + d_output.index(n, c, 0, 0);
            const T* xh = cache.normalized.data() + cache.normalized.index(n, c, 0, 0);
            for (long i = 0; i < static_cast<long>(s.h) * s.w; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        grads.d_beta[c] = static_cast<T>(sum_dy);
        grads.d_gamma[c] = static_cast<T>(sum_dy_xhat);

        // d_x = gamma * inv_std / m * (m*dy - sum(dy) - x_hat * sum(dy*x_hat))
        const double scale = static_cast<double>(layer.gamma[c]) *
                             static_cast<double>(cache.inv_std[c]) / count;
        for (int n = 0; n < s.n; ++n) {
            const T* dy = d_output.data() + d_output.index(n, c, 0, 0);
            const T* xh = cache.normalized.data() + cache.normalized.index(n, c, 0, 0);
            T* dx = grads.d_input.data() + grads.d_input.index(n, c, 0, 0);
            for (long i = 0; i < static_cast<long>(s.h) * s.w; ++i)
                dx[i] = static_cast<T>(scale * (count * static_cast<double>(dy[i]) - sum_dy -
                                                static_cast<double>(xh[i]) * sum_dy_xhat));
        }
    }
    return grads;
}

// ---- ReLU --------------------------------------------------------------------

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
    return max_with_zero(input);
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& input, const Tensor4<T>& d_output) {
    detail::require_same_shape(input.shape(), d_output.shape());
    Tensor4<T> out(input.shape());
    for (long i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? d_output[i] : T(0);
    return out;
}

}  // namespace drdn
