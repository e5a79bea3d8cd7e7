#include "batch_pass.hpp"

#include <algorithm>
#include <cmath>

#include "eegattr/models.hpp"
#include "eegattr/rng.hpp"
#include "layer_ops.hpp"

namespace eegattr::detail {

namespace {

Shape to_shape(const ActShape& s) { return {s[0], s[1], s[2]}; }

std::size_t logit_layer_end(const NetworkSpec& net) {
    if (!net.layers.empty() && net.layers.back().kind == LayerKind::Softmax) return net.layers.size() - 1;
    return net.layers.size();
}

BatchNormStats batch_norm_statistics(const std::vector<Tensor>& xs, const ActShape& shape) {
    const std::size_t channels = shape[0];
    const std::size_t plane = plane_of(shape);
    const double count = static_cast<double>(plane * xs.size());
    BatchNormStats st{Tensor({channels}), Tensor({channels})};
    for (std::size_t c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (const auto& x : xs) {
            for (std::size_t i = 0; i < plane; ++i) sum += x[c * plane + i];
        }
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto& x : xs) {
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = x[c * plane + i] - mean;
                ss += d * d;
            }
        }
        st.mean[c] = static_cast<float>(mean);
        st.std[c] = std::max(static_cast<float>(std::sqrt(ss / count)), kStdFloor);
    }
    return st;
}

}  // namespace

BatchPass batch_forward(const NetworkSpec& net, std::span<const Tensor> inputs, bool training,
                        std::uint64_t dropout_seed) {
    if (inputs.empty()) throw ValidationError("batch pass over an empty batch");
    BatchPass pass;
    pass.chain = net.shape_chain();
    const std::size_t layers = net.layers.size();
    pass.acts.resize(layers + 1);
    pass.bn_stats.resize(layers);
    pass.dropout_masks.resize(layers);

    auto& first = pass.acts[0];
    first.reserve(inputs.size());
    for (const auto& x : inputs) {
        if (x.size() != net.channels * net.length) {
            throw ShapeError("network '" + net.name + "' layer 'input': expected " + std::to_string(net.channels) +
                             "x" + std::to_string(net.length) + ", got " + shape_string(x.shape()));
        }
        first.push_back(x.reshaped(to_shape(pass.chain[0])));
    }

    for (std::size_t i = 0; i < layers; ++i) {
        const auto& layer = net.layers[i];
        const auto& in_s = pass.chain[i];
        const auto& out_s = pass.chain[i + 1];
        const auto& xs = pass.acts[i];
        auto& ys = pass.acts[i + 1];
        ys.assign(xs.size(), Tensor(to_shape(out_s)));

        if (layer.kind == LayerKind::BatchNorm) {
            pass.bn_stats[i] = batch_norm_statistics(xs, in_s);
        }
        if (layer.kind == LayerKind::Dropout && training && layer.rate > 0.0f) {
            auto& masks = pass.dropout_masks[i];
            masks.resize(xs.size());
            const float keep_scale = 1.0f / (1.0f - layer.rate);
            for (std::size_t s = 0; s < xs.size(); ++s) {
                CounterRng rng(derive_seed(dropout_seed, {i, s}));
                masks[s].resize(xs[s].size());
                for (auto& m : masks[s]) m = rng.uniform() < layer.rate ? 0.0f : keep_scale;
            }
        }

        for (std::size_t s = 0; s < xs.size(); ++s) {
            const float* in = xs[s].data();
            float* out = ys[s].data();
            if (layer.is_nonlinearity()) {
                for (std::size_t k = 0; k < xs[s].size(); ++k) out[k] = activation_value(layer, in[k]);
            } else if (layer.kind == LayerKind::Softmax) {
                ys[s] = softmax(xs[s]);
            } else if (layer.kind == LayerKind::Dropout && !pass.dropout_masks[i].empty()) {
                const auto& m = pass.dropout_masks[i][s];
                for (std::size_t k = 0; k < xs[s].size(); ++k) out[k] = in[k] * m[k];
            } else {
                const auto& st = pass.bn_stats[i];
                linear_forward(layer, in_s, out_s, in, out, st.mean.empty() ? nullptr : st.mean.data(),
                               st.std.empty() ? nullptr : st.std.data());
            }
        }
    }
    return pass;
}

void batch_backward(const NetworkSpec& net, const BatchPass& pass, std::vector<std::vector<float>> dlogits,
                    std::vector<std::vector<Tensor>>& grads) {
    const std::size_t batch = dlogits.size();
    const std::size_t end = logit_layer_end(net);
    std::vector<std::vector<float>> g = std::move(dlogits);
    std::vector<std::vector<float>> next(batch);

    for (std::size_t idx = end; idx-- > 0;) {
        const auto& layer = net.layers[idx];
        const auto& in_s = pass.chain[idx];
        const auto& out_s = pass.chain[idx + 1];
        const auto& xs = pass.acts[idx];
        const std::size_t n_in = volume_of(in_s);
        const bool need_input_grad = idx > 0;
        auto& lg = grads[idx];

        switch (layer.kind) {
            case LayerKind::Elu:
            case LayerKind::Relu:
                for (std::size_t s = 0; s < batch; ++s) {
                    for (std::size_t k = 0; k < n_in; ++k) g[s][k] *= activation_derivative(layer, xs[s][k]);
                }
                continue;
            case LayerKind::Dropout:
                if (!pass.dropout_masks[idx].empty()) {
                    for (std::size_t s = 0; s < batch; ++s) {
                        for (std::size_t k = 0; k < n_in; ++k) g[s][k] *= pass.dropout_masks[idx][s][k];
                    }
                }
                continue;
            case LayerKind::BatchNorm: {
                const auto& st = pass.bn_stats[idx];
                const std::size_t plane = plane_of(in_s);
                const double count = static_cast<double>(plane * batch);
                for (std::size_t c = 0; c < in_s[0]; ++c) {
                    const double mean = st.mean[c];
                    const double sd = st.std[c];
                    const double gamma = layer.params[0][c];
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (std::size_t s = 0; s < batch; ++s) {
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double dy = g[s][c * plane + i];
                            const double xhat = (xs[s][c * plane + i] - mean) / sd;
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat;
                        }
                    }
                    lg[0][c] += static_cast<float>(sum_dy_xhat);
                    lg[1][c] += static_cast<float>(sum_dy);
                    const double mean_dxhat = gamma * sum_dy / count;
                    const double mean_dxhat_xhat = gamma * sum_dy_xhat / count;
                    for (std::size_t s = 0; s < batch; ++s) {
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double xhat = (xs[s][c * plane + i] - mean) / sd;
                            const double dxhat = gamma * g[s][c * plane + i];
                            g[s][c * plane + i] =
                                static_cast<float>((dxhat - mean_dxhat - xhat * mean_dxhat_xhat) / sd);
                        }
                    }
                }
                continue;
            }
            default:
                break;
        }

        for (std::size_t s = 0; s < batch; ++s) {
            next[s].assign(n_in, 0.0f);
            const float* in = xs[s].data();
            const float* dout = g[s].data();
            switch (layer.kind) {
                case LayerKind::Conv2d:
                case LayerKind::DepthwiseConv:
                case LayerKind::PointwiseConv: {
                    const auto geo = layer_conv_geometry(layer, in_s, out_s);
                    conv_backward_weight(geo, in, dout, lg[0].data());
                    if (layer.has_bias) bias_grad(dout, out_s[0], plane_of(out_s), lg[1].data());
                    if (need_input_grad) conv_backward_input(geo, dout, layer.params[0].data(), next[s].data());
                    break;
                }
                case LayerKind::SeparableConv: {
                    const auto gd = separable_depthwise_geometry(layer, in_s, out_s);
                    const auto gp = separable_pointwise_geometry(in_s, out_s);
                    std::vector<float> mid(in_s[0] * plane_of(out_s), 0.0f);
                    conv_forward(gd, in, layer.params[0].data(), mid.data());
                    conv_backward_weight(gp, mid.data(), dout, lg[1].data());
                    if (layer.has_bias) bias_grad(dout, out_s[0], plane_of(out_s), lg[2].data());
                    std::vector<float> dmid(mid.size(), 0.0f);
                    conv_backward_input(gp, dout, layer.params[1].data(), dmid.data());
                    conv_backward_weight(gd, in, dmid.data(), lg[0].data());
                    if (need_input_grad) conv_backward_input(gd, dmid.data(), layer.params[0].data(), next[s].data());
                    break;
                }
                case LayerKind::Dense: {
                    float* dw = lg[0].data();
                    for (std::size_t k = 0; k < out_s[0]; ++k) {
                        const float gk = dout[k];
                        for (std::size_t i = 0; i < n_in; ++i) dw[k * n_in + i] += gk * in[i];
                        if (layer.has_bias) lg[1][k] += gk;
                    }
                    if (need_input_grad) linear_backward(layer, in_s, out_s, dout, next[s].data(), nullptr);
                    break;
                }
                default:
                    linear_backward(layer, in_s, out_s, dout, next[s].data(), nullptr);
                    break;
            }
        }
        g.swap(next);
    }
}

}  // namespace eegattr::detail
