#include "eegattr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "layer_ops.hpp"

namespace eegattr {

namespace {

template <typename T>
BasicTensor<T> as_volume(const NetworkSpec& net, const BasicTensor<T>& input) {
    const bool rank2 = input.rank() == 2 && input.dim(0) == net.channels && input.dim(1) == net.length;
    const bool rank3 =
        input.rank() == 3 && input.dim(0) == 1 && input.dim(1) == net.channels && input.dim(2) == net.length;
    if (!rank2 && !rank3) {
        throw ShapeError("network '" + net.name + "' layer 'input': expected " + std::to_string(net.channels) + "x" +
                         std::to_string(net.length) + ", got " + shape_string(input.shape()));
    }
    return input.reshaped({1, net.channels, net.length});
}

Shape to_shape(const ActShape& s) { return {s[0], s[1], s[2]}; }

// Index of the last layer that contributes to the logits.
std::size_t logit_layer_end(const NetworkSpec& net) {
    if (!net.layers.empty() && net.layers.back().kind == LayerKind::Softmax) return net.layers.size() - 1;
    return net.layers.size();
}

template <typename T>
void check_finite(const NetworkSpec& net, std::size_t layer, const BasicTensor<T>& t) {
    if (!t.all_finite()) {
        throw NumericError("network '" + net.name + "': non-finite activation after layer '" + net.layers[layer].name +
                           "'");
    }
}

template <typename T>
void apply_layer(const LayerSpec& layer, const ActShape& in_s, const ActShape& out_s, const T* in, T* out,
                 const BatchNormStats* bn) {
    if (layer.is_nonlinearity()) {
        const std::size_t n = detail::volume_of(in_s);
        for (std::size_t i = 0; i < n; ++i) out[i] = detail::activation_value(layer, in[i]);
        return;
    }
    detail::linear_forward(layer, in_s, out_s, in, out, bn ? bn->mean.data() : nullptr,
                           bn ? bn->std.data() : nullptr);
}

std::vector<const BatchNormStats*> stats_per_layer(const NetworkSpec& net, const BatchStats& stats) {
    std::vector<const BatchNormStats*> per(net.layers.size(), nullptr);
    std::size_t site = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == LayerKind::BatchNorm) per[i] = &stats.sites[site++];
    }
    return per;
}

}  // namespace

void validate_rule(const BackwardRule& r) {
    if (const auto* e = std::get_if<rule::EpsilonLrp>(&r); e && !(e->epsilon > 0.0)) {
        throw ValidationError("epsilon-LRP requires epsilon > 0");
    }
    if (const auto* d = std::get_if<rule::DeepLiftRescale>(&r); d && !(d->near_zero_delta > 0.0)) {
        throw ValidationError("DeepLIFT rescale requires near_zero_delta > 0");
    }
}

void check_stats(const NetworkSpec& net, const BatchStats& stats) {
    if (stats.sites.size() != net.batch_norm_count()) {
        throw ValidationError("network '" + net.name + "' has " + std::to_string(net.batch_norm_count()) +
                              " batch-norm layers but " + std::to_string(stats.sites.size()) +
                              " statistics entries were given");
    }
    const auto chain = net.shape_chain();
    std::size_t site = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::BatchNorm) continue;
        const auto& s = stats.sites[site++];
        const std::size_t c = chain[i][0];
        if (s.mean.size() != c || s.std.size() != c) {
            throw ShapeError("layer '" + net.layers[i].name + "': batch statistics width " +
                             std::to_string(s.mean.size()) + " does not match " + std::to_string(c) + " maps");
        }
    }
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
    BasicTensor<T> p(logits.shape());
    if (logits.empty()) return p;
    const T m = *std::max_element(logits.values().begin(), logits.values().end());
    T sum = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= sum;
    return p;
}

template <typename T>
ForwardTrace<T> forward(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats) {
    check_stats(net, stats);
    const auto chain = net.shape_chain();
    const auto bn = stats_per_layer(net, stats);

    ForwardTrace<T> trace;
    trace.activations.reserve(net.layers.size() + 1);
    trace.activations.push_back(as_volume(net, input));
    if (!trace.activations.front().all_finite()) {
        throw NumericError("network '" + net.name + "': non-finite value in input");
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        BasicTensor<T> out(to_shape(chain[i + 1]));
        const auto& layer = net.layers[i];
        if (layer.kind == LayerKind::Softmax) {
            out = softmax(trace.activations[i]);
        } else {
            apply_layer(layer, chain[i], chain[i + 1], trace.activations[i].data(), out.data(), bn[i]);
        }
        check_finite(net, i, out);
        trace.activations.push_back(std::move(out));
    }
    const std::size_t end = logit_layer_end(net);
    trace.logits = trace.activations[end].reshaped({net.classes});
    trace.probabilities = softmax(trace.logits);
    return trace;
}

template <typename T>
T forward_logit(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats, std::size_t target) {
    if (target >= net.classes) throw ValidationError("target class out of range");
    check_stats(net, stats);
    const auto chain = net.shape_chain();
    const auto bn = stats_per_layer(net, stats);
    std::vector<T> a = as_volume(net, input).vec();
    std::vector<T> b;
    const std::size_t end = logit_layer_end(net);
    for (std::size_t i = 0; i < end; ++i) {
        b.assign(detail::volume_of(chain[i + 1]), T{0});
        apply_layer(net.layers[i], chain[i], chain[i + 1], a.data(), b.data(), bn[i]);
        a.swap(b);
    }
    const T v = a[target];
    if (!std::isfinite(v)) throw NumericError("network '" + net.name + "': non-finite logit");
    return v;
}

template <typename T>
BasicTensor<T> backward(const NetworkSpec& net, const ForwardTrace<T>& trace, const BatchStats& stats,
                        std::size_t target_class, const BackwardRule& r, const ForwardTrace<T>* baseline) {
    validate_rule(r);
    if (target_class >= net.classes) {
        throw ValidationError("target class " + std::to_string(target_class) + " out of range for " +
                              std::to_string(net.classes) + " classes");
    }
    if (trace.activations.size() != net.layers.size() + 1) {
        throw ValidationError("forward trace does not belong to network '" + net.name + "'");
    }
    const bool deeplift = std::holds_alternative<rule::DeepLiftRescale>(r);
    if (deeplift) {
        if (baseline == nullptr) throw ValidationError("DeepLIFT rescale requires a baseline forward trace");
        if (baseline->activations.size() != trace.activations.size()) {
            throw ValidationError("baseline trace does not belong to network '" + net.name + "'");
        }
    }
    check_stats(net, stats);
    const auto chain = net.shape_chain();
    const auto bn = stats_per_layer(net, stats);
    const std::size_t end = logit_layer_end(net);

    std::vector<T> g(detail::volume_of(chain[end]), T{0});
    g[target_class] = T{1};
    std::vector<T> next;

    for (std::size_t idx = end; idx-- > 0;) {
        const auto& layer = net.layers[idx];
        const std::size_t n_in = detail::volume_of(chain[idx]);
        if (!layer.is_nonlinearity()) {
            next.assign(n_in, T{0});
            detail::linear_backward(layer, chain[idx], chain[idx + 1], g.data(), next.data(),
                                    bn[idx] ? bn[idx]->std.data() : nullptr);
            g.swap(next);
            continue;
        }
        const T* z = trace.pre(idx).data();
        const T* fz = trace.out(idx).data();
        std::visit(
            [&](const auto& rr) {
                using R = std::decay_t<decltype(rr)>;
                for (std::size_t i = 0; i < n_in; ++i) {
                    if constexpr (std::is_same_v<R, rule::Plain>) {
                        g[i] *= detail::activation_derivative(layer, z[i]);
                    } else if constexpr (std::is_same_v<R, rule::Deconv>) {
                        g[i] = std::max(g[i], T{0});
                    } else if constexpr (std::is_same_v<R, rule::Guided>) {
                        g[i] = (z[i] > T{0} && g[i] > T{0}) ? g[i] * detail::activation_derivative(layer, z[i]) : T{0};
                    } else if constexpr (std::is_same_v<R, rule::EpsilonLrp>) {
                        const T eps = static_cast<T>(rr.epsilon);
                        const T denom = z[i] + (z[i] >= T{0} ? eps : -eps);
                        g[i] *= fz[i] / denom;
                    } else {
                        const T* z0 = baseline->pre(idx).data();
                        const T* fz0 = baseline->out(idx).data();
                        const T dz = z[i] - z0[i];
                        if (std::abs(dz) < static_cast<T>(rr.near_zero_delta)) {
                            g[i] *= detail::activation_derivative(layer, (z[i] + z0[i]) / T{2});
                        } else {
                            g[i] *= (fz[i] - fz0[i]) / dz;
                        }
                    }
                }
            },
            r);
    }
    BasicTensor<T> grad({net.channels, net.length}, std::move(g));
    if (!grad.all_finite()) throw NumericError("network '" + net.name + "': non-finite backward signal");
    return grad;
}

template <typename T>
BasicTensor<T> finite_diff_gradient(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats,
                                    std::size_t target_class, T h) {
    if (!(h > T{0})) throw ValidationError("finite difference step must be positive");
    BasicTensor<T> x = as_volume(net, input);
    BasicTensor<T> grad({net.channels, net.length});
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T orig = x[i];
        x[i] = orig + h;
        const T up = forward_logit(net, x, stats, target_class);
        x[i] = orig - h;
        const T down = forward_logit(net, x, stats, target_class);
        x[i] = orig;
        grad[i] = (up - down) / (T{2} * h);
    }
    return grad;
}

#define EEGATTR_INSTANTIATE(T)                                                                                       \
    template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                                      \
    template ForwardTrace<T> forward<T>(const NetworkSpec&, const BasicTensor<T>&, const BatchStats&);             \
    template T forward_logit<T>(const NetworkSpec&, const BasicTensor<T>&, const BatchStats&, std::size_t);         \
    template BasicTensor<T> backward<T>(const NetworkSpec&, const ForwardTrace<T>&, const BatchStats&, std::size_t, \
                                        const BackwardRule&, const ForwardTrace<T>*);                               \
    template BasicTensor<T> finite_diff_gradient<T>(const NetworkSpec&, const BasicTensor<T>&, const BatchStats&,   \
                                                    std::size_t, T);

EEGATTR_INSTANTIATE(float)
EEGATTR_INSTANTIATE(double)

#undef EEGATTR_INSTANTIATE

}  // namespace eegattr
