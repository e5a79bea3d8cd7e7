#pragma once

// Per-layer kernels shared by the inference engine (engine.cpp) and the
// trainer (train.cpp). Activations are single samples shaped [C, H, W].

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "eegattr/network.hpp"
#include "eegattr/tensor.hpp"

namespace eegattr::detail {

struct ConvGeometry {
    std::size_t in_c, in_h, in_w;
    std::size_t out_c, out_h, out_w;
    std::size_t kh, kw;
    std::size_t groups;
    std::ptrdiff_t pad_top, pad_left;
};

inline ConvGeometry conv_geometry(const ActShape& in, const ActShape& out, std::size_t kh, std::size_t kw,
                                  std::size_t groups, Padding padding) {
    ConvGeometry g{in[0], in[1], in[2], out[0], out[1], out[2], kh, kw, groups, 0, 0};
    if (padding == Padding::Same) {
        // Keras-style split: the extra pad goes after.
        g.pad_top = static_cast<std::ptrdiff_t>((kh - 1) / 2);
        g.pad_left = static_cast<std::ptrdiff_t>((kw - 1) / 2);
    }
    return g;
}

// Range of output x for which ix = x + kj - pad_left lies in [0, in_w).
inline void valid_range(std::ptrdiff_t offset, std::size_t in_extent, std::size_t out_extent, std::size_t& lo,
                        std::size_t& hi) {
    const std::ptrdiff_t l = std::max<std::ptrdiff_t>(0, -offset);
    const std::ptrdiff_t h =
        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_extent), static_cast<std::ptrdiff_t>(in_extent) - offset);
    lo = static_cast<std::size_t>(l);
    hi = static_cast<std::size_t>(std::max(l, h));
}

/// out += grouped_conv(in, weight). weight is [out_c, in_c/groups, kh, kw].
template <typename T>
void conv_forward(const ConvGeometry& g, const T* in, const float* weight, T* out) {
    const std::size_t in_per_group = g.in_c / g.groups;
    const std::size_t out_per_group = g.out_c / g.groups;
    for (std::size_t o = 0; o < g.out_c; ++o) {
        const std::size_t grp = o / out_per_group;
        T* out_plane = out + o * g.out_h * g.out_w;
        for (std::size_t ci = 0; ci < in_per_group; ++ci) {
            const std::size_t ic = grp * in_per_group + ci;
            const T* in_plane = in + ic * g.in_h * g.in_w;
            for (std::size_t ki = 0; ki < g.kh; ++ki) {
                std::size_t y0, y1;
                valid_range(static_cast<std::ptrdiff_t>(ki) - g.pad_top, g.in_h, g.out_h, y0, y1);
                for (std::size_t kj = 0; kj < g.kw; ++kj) {
                    const T wv = static_cast<T>(weight[((o * in_per_group + ci) * g.kh + ki) * g.kw + kj]);
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - g.pad_left;
                    std::size_t x0, x1;
                    valid_range(dx, g.in_w, g.out_w, x0, x1);
                    for (std::size_t y = y0; y < y1; ++y) {
                        const std::size_t iy = y + ki - static_cast<std::size_t>(g.pad_top);
                        const T* src = in_plane + iy * g.in_w;
                        T* dst = out_plane + y * g.out_w;
                        for (std::size_t x = x0; x < x1; ++x) dst[x] += wv * src[x + dx];
                    }
                }
            }
        }
    }
}

/// din += conv_transpose(dout, weight).
template <typename T>
void conv_backward_input(const ConvGeometry& g, const T* dout, const float* weight, T* din) {
    const std::size_t in_per_group = g.in_c / g.groups;
    const std::size_t out_per_group = g.out_c / g.groups;
    for (std::size_t o = 0; o < g.out_c; ++o) {
        const std::size_t grp = o / out_per_group;
        const T* dout_plane = dout + o * g.out_h * g.out_w;
        for (std::size_t ci = 0; ci < in_per_group; ++ci) {
            const std::size_t ic = grp * in_per_group + ci;
            T* din_plane = din + ic * g.in_h * g.in_w;
            for (std::size_t ki = 0; ki < g.kh; ++ki) {
                std::size_t y0, y1;
                valid_range(static_cast<std::ptrdiff_t>(ki) - g.pad_top, g.in_h, g.out_h, y0, y1);
                for (std::size_t kj = 0; kj < g.kw; ++kj) {
                    const T wv = static_cast<T>(weight[((o * in_per_group + ci) * g.kh + ki) * g.kw + kj]);
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - g.pad_left;
                    std::size_t x0, x1;
                    valid_range(dx, g.in_w, g.out_w, x0, x1);
                    for (std::size_t y = y0; y < y1; ++y) {
                        const std::size_t iy = y + ki - static_cast<std::size_t>(g.pad_top);
                        T* dst = din_plane + iy * g.in_w;
                        const T* src = dout_plane + y * g.out_w;
                        for (std::size_t x = x0; x < x1; ++x) dst[x + dx] += wv * src[x];
                    }
                }
            }
        }
    }
}

/// dweight += correlation(in, dout).
template <typename T>
void conv_backward_weight(const ConvGeometry& g, const T* in, const T* dout, float* dweight) {
    const std::size_t in_per_group = g.in_c / g.groups;
    const std::size_t out_per_group = g.out_c / g.groups;
    for (std::size_t o = 0; o < g.out_c; ++o) {
        const std::size_t grp = o / out_per_group;
        const T* dout_plane = dout + o * g.out_h * g.out_w;
        for (std::size_t ci = 0; ci < in_per_group; ++ci) {
            const std::size_t ic = grp * in_per_group + ci;
            const T* in_plane = in + ic * g.in_h * g.in_w;
            for (std::size_t ki = 0; ki < g.kh; ++ki) {
                std::size_t y0, y1;
                valid_range(static_cast<std::ptrdiff_t>(ki) - g.pad_top, g.in_h, g.out_h, y0, y1);
                for (std::size_t kj = 0; kj < g.kw; ++kj) {
                    const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kj) - g.pad_left;
                    std::size_t x0, x1;
                    valid_range(dx, g.in_w, g.out_w, x0, x1);
                    T acc = 0;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const std::size_t iy = y + ki - static_cast<std::size_t>(g.pad_top);
                        const T* src = in_plane + iy * g.in_w;
                        const T* d = dout_plane + y * g.out_w;
                        for (std::size_t x = x0; x < x1; ++x) acc += d[x] * src[x + dx];
                    }
                    dweight[((o * in_per_group + ci) * g.kh + ki) * g.kw + kj] += static_cast<float>(acc);
                }
            }
        }
    }
}

template <typename T>
void add_bias(const float* bias, std::size_t channels, std::size_t plane, T* out) {
    for (std::size_t c = 0; c < channels; ++c) {
        const T b = static_cast<T>(bias[c]);
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += b;
    }
}

template <typename T>
void bias_grad(const T* dout, std::size_t channels, std::size_t plane, float* dbias) {
    for (std::size_t c = 0; c < channels; ++c) {
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += dout[c * plane + i];
        dbias[c] += static_cast<float>(acc);
    }
}

/// Geometry of the depthwise half of a separable conv ([in] -> [in]).
inline ConvGeometry separable_depthwise_geometry(const LayerSpec& l, const ActShape& in, const ActShape& out) {
    return conv_geometry(in, {in[0], out[1], out[2]}, l.kernel_h, l.kernel_w, in[0], l.padding);
}

inline ConvGeometry separable_pointwise_geometry(const ActShape& in, const ActShape& out) {
    return conv_geometry({in[0], out[1], out[2]}, out, 1, 1, 1, Padding::Valid);
}

inline ConvGeometry layer_conv_geometry(const LayerSpec& l, const ActShape& in, const ActShape& out) {
    switch (l.kind) {
        case LayerKind::Conv2d:
            return conv_geometry(in, out, l.kernel_h, l.kernel_w, 1, l.padding);
        case LayerKind::DepthwiseConv:
            return conv_geometry(in, out, l.kernel_h, l.kernel_w, in[0], l.padding);
        case LayerKind::PointwiseConv:
            return conv_geometry(in, out, 1, 1, 1, Padding::Valid);
        default:
            return {};
    }
}

inline std::size_t plane_of(const ActShape& s) { return s[1] * s[2]; }
inline std::size_t volume_of(const ActShape& s) { return s[0] * s[1] * s[2]; }

/// Forward through every layer kind that is linear at inference time.
/// BatchNorm uses fixed mean/std. Dropout is the identity. Softmax is the identity
/// here (probabilities are computed by the caller).
template <typename T>
void linear_forward(const LayerSpec& l, const ActShape& in_s, const ActShape& out_s, const T* in, T* out,
                    const float* bn_mean, const float* bn_std) {
    const std::size_t out_n = volume_of(out_s);
    std::fill(out, out + out_n, T{0});
    switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::DepthwiseConv:
        case LayerKind::PointwiseConv: {
            conv_forward(layer_conv_geometry(l, in_s, out_s), in, l.params[0].data(), out);
            if (l.has_bias) add_bias(l.params[1].data(), out_s[0], plane_of(out_s), out);
            return;
        }
        case LayerKind::SeparableConv: {
            const auto gd = separable_depthwise_geometry(l, in_s, out_s);
            std::vector<T> mid(in_s[0] * plane_of(out_s), T{0});
            conv_forward(gd, in, l.params[0].data(), mid.data());
            conv_forward(separable_pointwise_geometry(in_s, out_s), mid.data(), l.params[1].data(), out);
            if (l.has_bias) add_bias(l.params[2].data(), out_s[0], plane_of(out_s), out);
            return;
        }
        case LayerKind::BatchNorm: {
            const std::size_t plane = plane_of(in_s);
            const float* gamma = l.params[0].data();
            const float* beta = l.params[1].data();
            for (std::size_t c = 0; c < in_s[0]; ++c) {
                const T scale = static_cast<T>(gamma[c]) / static_cast<T>(bn_std[c]);
                const T m = static_cast<T>(bn_mean[c]);
                const T b = static_cast<T>(beta[c]);
                for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = scale * (in[c * plane + i] - m) + b;
            }
            return;
        }
        case LayerKind::AvgPool: {
            const T inv = T{1} / static_cast<T>(l.pool_h * l.pool_w);
            for (std::size_t c = 0; c < out_s[0]; ++c) {
                for (std::size_t y = 0; y < out_s[1]; ++y) {
                    for (std::size_t x = 0; x < out_s[2]; ++x) {
                        T acc = 0;
                        for (std::size_t a = 0; a < l.pool_h; ++a) {
                            const T* row = in + (c * in_s[1] + y * l.pool_h + a) * in_s[2] + x * l.pool_w;
                            for (std::size_t b = 0; b < l.pool_w; ++b) acc += row[b];
                        }
                        out[(c * out_s[1] + y) * out_s[2] + x] = acc * inv;
                    }
                }
            }
            return;
        }
        case LayerKind::GlobalAvgPool: {
            const std::size_t plane = plane_of(in_s);
            const T inv = T{1} / static_cast<T>(plane);
            for (std::size_t c = 0; c < in_s[0]; ++c) {
                T acc = 0;
                for (std::size_t i = 0; i < plane; ++i) acc += in[c * plane + i];
                out[c] = acc * inv;
            }
            return;
        }
        case LayerKind::Dense: {
            const std::size_t n_in = volume_of(in_s);
            const float* w = l.params[0].data();
            for (std::size_t k = 0; k < out_s[0]; ++k) {
                T acc = l.has_bias ? static_cast<T>(l.params[1][k]) : T{0};
                for (std::size_t i = 0; i < n_in; ++i) acc += static_cast<T>(w[k * n_in + i]) * in[i];
                out[k] = acc;
            }
            return;
        }
        case LayerKind::Dropout:
        case LayerKind::Softmax:
            std::copy(in, in + out_n, out);
            return;
        case LayerKind::Elu:
        case LayerKind::Relu:
            break;
    }
}

/// Input gradient of a linear layer (transpose of linear_forward, bias ignored).
template <typename T>
void linear_backward(const LayerSpec& l, const ActShape& in_s, const ActShape& out_s, const T* dout, T* din,
                     const float* bn_std) {
    const std::size_t in_n = volume_of(in_s);
    std::fill(din, din + in_n, T{0});
    switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::DepthwiseConv:
        case LayerKind::PointwiseConv:
            conv_backward_input(layer_conv_geometry(l, in_s, out_s), dout, l.params[0].data(), din);
            return;
        case LayerKind::SeparableConv: {
            std::vector<T> dmid(in_s[0] * plane_of(out_s), T{0});
            conv_backward_input(separable_pointwise_geometry(in_s, out_s), dout, l.params[1].data(), dmid.data());
            conv_backward_input(separable_depthwise_geometry(l, in_s, out_s), dmid.data(), l.params[0].data(), din);
            return;
        }
        case LayerKind::BatchNorm: {
            const std::size_t plane = plane_of(in_s);
            const float* gamma = l.params[0].data();
            for (std::size_t c = 0; c < in_s[0]; ++c) {
                const T scale = static_cast<T>(gamma[c]) / static_cast<T>(bn_std[c]);
                for (std::size_t i = 0; i < plane; ++i) din[c * plane + i] = scale * dout[c * plane + i];
            }
            return;
        }
        case LayerKind::AvgPool: {
            const T inv = T{1} / static_cast<T>(l.pool_h * l.pool_w);
            for (std::size_t c = 0; c < out_s[0]; ++c) {
                for (std::size_t y = 0; y < out_s[1]; ++y) {
                    for (std::size_t x = 0; x < out_s[2]; ++x) {
                        const T g = dout[(c * out_s[1] + y) * out_s[2] + x] * inv;
                        for (std::size_t a = 0; a < l.pool_h; ++a) {
                            T* row = din + (c * in_s[1] + y * l.pool_h + a) * in_s[2] + x * l.pool_w;
                            for (std::size_t b = 0; b < l.pool_w; ++b) row[b] = g;
                        }
                    }
                }
            }
            return;
        }
        case LayerKind::GlobalAvgPool: {
            const std::size_t plane = plane_of(in_s);
            const T inv = T{1} / static_cast<T>(plane);
            for (std::size_t c = 0; c < in_s[0]; ++c) {
                for (std::size_t i = 0; i < plane; ++i) din[c * plane + i] = dout[c] * inv;
            }
            return;
        }
        case LayerKind::Dense: {
            const float* w = l.params[0].data();
            for (std::size_t k = 0; k < out_s[0]; ++k) {
                const T g = dout[k];
                for (std::size_t i = 0; i < in_n; ++i) din[i] += static_cast<T>(w[k * in_n + i]) * g;
            }
            return;
        }
        case LayerKind::Dropout:
        case LayerKind::Softmax:
            std::copy(dout, dout + in_n, din);
            return;
        case LayerKind::Elu:
        case LayerKind::Relu:
            break;
    }
}

template <typename T>
T activation_value(const LayerSpec& l, T z) {
    if (l.kind == LayerKind::Relu) return z > T{0} ? z : T{0};
    return z > T{0} ? z : static_cast<T>(l.alpha) * std::expm1(z);
}

template <typename T>
T activation_derivative(const LayerSpec& l, T z) {
    if (l.kind == LayerKind::Relu) return z > T{0} ? T{1} : T{0};
    return z > T{0} ? T{1} : static_cast<T>(l.alpha) * std::exp(z);
}

}  // namespace eegattr::detail
