#include "eegattr/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "layer_ops.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

void require_input(std::size_t channels, std::size_t length, std::size_t classes) {
    if (channels < 1) throw ValidationError("network needs at least one input channel");
    if (length < 1) throw ValidationError("network needs a positive input length");
    if (classes < 1) throw ValidationError("network needs at least one class");
}

std::size_t hyper_size(const std::map<std::string, std::string>& hyper, const std::string& key) {
    const auto it = hyper.find(key);
    if (it == hyper.end()) throw FormatError("missing hyperparameter '" + key + "'");
    std::size_t v = 0;
    const auto* b = it->second.data();
    const auto [ptr, ec] = std::from_chars(b, b + it->second.size(), v);
    if (ec != std::errc() || ptr != b + it->second.size()) {
        throw FormatError("hyperparameter '" + key + "' is not an unsigned integer: '" + it->second + "'");
    }
    return v;
}

float hyper_float(const std::map<std::string, std::string>& hyper, const std::string& key) {
    const auto it = hyper.find(key);
    if (it == hyper.end()) throw FormatError("missing hyperparameter '" + key + "'");
    try {
        return std::stof(it->second);
    } catch (const std::exception&) {
        throw FormatError("hyperparameter '" + key + "' is not a number: '" + it->second + "'");
    }
}

// fan_in of the weight tensor [out, in, kh, kw] or [out, in].
std::size_t fan_in(const Shape& s) {
    std::size_t f = 1;
    for (std::size_t i = 1; i < s.size(); ++i) f *= s[i];
    return f;
}

}  // namespace

std::size_t eegnet_min_length(const EegNetOptions& opt) {
    return std::max({opt.temporal_kernel, opt.pool1 * opt.pool2, std::size_t{1}});
}

NetworkSpec build_eegnet(std::size_t channels, std::size_t length, std::size_t classes, const EegNetOptions& opt,
                         std::uint64_t seed) {
    require_input(channels, length, classes);
    if (opt.f1 == 0 || opt.depth == 0 || opt.temporal_kernel == 0 || opt.separable_kernel == 0 || opt.pool1 == 0 ||
        opt.pool2 == 0) {
        throw ValidationError("EEGNet options must be positive");
    }
    if (opt.dropout < 0.0f || opt.dropout >= 1.0f) throw ValidationError("EEGNet dropout must lie in [0, 1)");
    const std::size_t min_t = eegnet_min_length(opt);
    if (length < min_t) {
        throw ValidationError("EEGNet input length " + std::to_string(length) + " is too short: the temporal kernel (" +
                              std::to_string(opt.temporal_kernel) + ") and pooling chain (" +
                              std::to_string(opt.pool1) + "x" + std::to_string(opt.pool2) +
                              ") need T >= " + std::to_string(min_t));
    }
    const std::size_t f2 = opt.f1 * opt.depth;

    NetworkSpec net;
    net.name = "eegnet";
    net.channels = channels;
    net.length = length;
    net.classes = classes;
    net.layers = {
        LayerSpec::conv2d("temporal_conv", opt.f1, 1, opt.temporal_kernel, Padding::Same, false),
        LayerSpec::batch_norm("bn_temporal"),
        LayerSpec::elu("elu_temporal"),
        LayerSpec::depthwise("spatial_conv", opt.depth, channels, 1, Padding::Valid, false),
        LayerSpec::batch_norm("bn_spatial"),
        LayerSpec::elu("elu_spatial"),
        LayerSpec::avg_pool("pool1", 1, opt.pool1),
        LayerSpec::dropout("dropout1", opt.dropout),
        LayerSpec::separable("separable_conv", f2, 1, opt.separable_kernel, Padding::Same, false),
        LayerSpec::batch_norm("bn_separable"),
        LayerSpec::elu("elu_separable"),
        LayerSpec::avg_pool("pool2", 1, opt.pool2),
        LayerSpec::dropout("dropout2", opt.dropout),
        LayerSpec::dense("classifier", classes),
        LayerSpec::softmax("softmax"),
    };
    net.hyper = {
        {"channels", std::to_string(channels)},
        {"length", std::to_string(length)},
        {"classes", std::to_string(classes)},
        {"f1", std::to_string(opt.f1)},
        {"depth", std::to_string(opt.depth)},
        {"temporal_kernel", std::to_string(opt.temporal_kernel)},
        {"separable_kernel", std::to_string(opt.separable_kernel)},
        {"pool1", std::to_string(opt.pool1)},
        {"pool2", std::to_string(opt.pool2)},
        {"dropout", std::to_string(opt.dropout)},
    };
    initialize_parameters(net, seed);
    return net;
}

NetworkSpec build_interpretable_cnn(std::size_t channels, std::size_t length, std::size_t classes,
                                    const InterpretableCnnOptions& opt, std::uint64_t seed) {
    require_input(channels, length, classes);
    if (opt.kernels == 0 || opt.temporal_kernel == 0 || opt.depth == 0) {
        throw ValidationError("InterpretableCNN options must be positive");
    }
    if (length < opt.temporal_kernel) {
        throw ValidationError("InterpretableCNN input length " + std::to_string(length) +
                              " is shorter than the temporal kernel; need T >= " +
                              std::to_string(opt.temporal_kernel));
    }
    NetworkSpec net;
    net.name = "interpretable_cnn";
    net.channels = channels;
    net.length = length;
    net.classes = classes;
    net.layers = {
        LayerSpec::conv2d("temporal_conv", opt.kernels, 1, opt.temporal_kernel, Padding::Valid, true),
        LayerSpec::depthwise("spatial_conv", opt.depth, channels, 1, Padding::Valid, true),
        LayerSpec::relu("relu"),
        LayerSpec::batch_norm("bn"),
        LayerSpec::global_avg_pool("gap"),
        LayerSpec::dense("classifier", classes),
        LayerSpec::softmax("softmax"),
    };
    net.hyper = {
        {"channels", std::to_string(channels)},
        {"length", std::to_string(length)},
        {"classes", std::to_string(classes)},
        {"kernels", std::to_string(opt.kernels)},
        {"temporal_kernel", std::to_string(opt.temporal_kernel)},
        {"depth", std::to_string(opt.depth)},
    };
    initialize_parameters(net, seed);
    return net;
}

NetworkSpec build_from_hyper(const std::string& architecture, const std::map<std::string, std::string>& hyper) {
    const std::size_t n = hyper_size(hyper, "channels");
    const std::size_t t = hyper_size(hyper, "length");
    const std::size_t k = hyper_size(hyper, "classes");
    if (architecture == "eegnet") {
        EegNetOptions opt;
        opt.f1 = hyper_size(hyper, "f1");
        opt.depth = hyper_size(hyper, "depth");
        opt.temporal_kernel = hyper_size(hyper, "temporal_kernel");
        opt.separable_kernel = hyper_size(hyper, "separable_kernel");
        opt.pool1 = hyper_size(hyper, "pool1");
        opt.pool2 = hyper_size(hyper, "pool2");
        opt.dropout = hyper_float(hyper, "dropout");
        return build_eegnet(n, t, k, opt);
    }
    if (architecture == "interpretable_cnn") {
        InterpretableCnnOptions opt;
        opt.kernels = hyper_size(hyper, "kernels");
        opt.temporal_kernel = hyper_size(hyper, "temporal_kernel");
        opt.depth = hyper_size(hyper, "depth");
        return build_interpretable_cnn(n, t, k, opt);
    }
    throw FormatError("unknown architecture '" + architecture + "'");
}

void initialize_parameters(NetworkSpec& net, std::uint64_t seed) {
    const auto chain = net.shape_chain();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        const auto shapes = layer.expected_param_shapes(chain[i]);
        layer.params.clear();
        if (layer.kind == LayerKind::BatchNorm) {
            layer.params.emplace_back(shapes[0], 1.0f);
            layer.params.emplace_back(shapes[1], 0.0f);
            continue;
        }
        CounterRng rng(derive_seed(seed, {i}));
        // Biases share the bound of the last weight tensor of the layer.
        double bound = 0.0;
        const auto names = layer.param_names();
        for (std::size_t p = 0; p < shapes.size(); ++p) {
            Tensor t(shapes[p]);
            if (names[p] != "bias") bound = 1.0 / std::sqrt(static_cast<double>(fan_in(shapes[p])));
            for (auto& v : t.values()) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
            layer.params.push_back(std::move(t));
        }
    }
    net.validate();
}

BatchStats identity_stats(const NetworkSpec& net) {
    BatchStats stats;
    const auto chain = net.shape_chain();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::BatchNorm) continue;
        stats.sites.push_back({Tensor({chain[i][0]}, 0.0f), Tensor({chain[i][0]}, 1.0f)});
    }
    return stats;
}

BatchStats compute_batch_stats(const NetworkSpec& net, std::span<const Tensor> batch) {
    if (batch.empty()) throw ValidationError("compute_batch_stats: empty batch");
    const auto chain = net.shape_chain();
    for (const auto& x : batch) {
        if (x.size() != net.channels * net.length) {
            throw ShapeError("network '" + net.name + "' layer 'input': expected " + std::to_string(net.channels) +
                             "x" + std::to_string(net.length) + ", got " + shape_string(x.shape()));
        }
    }
    // Streams the batch once per site so memory stays at one sample; the
    // sites are resolved in order because later ones depend on earlier ones.
    BatchStats stats;
    std::vector<std::size_t> site_layers;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind == LayerKind::BatchNorm) site_layers.push_back(i);
    }
    auto run_to = [&](const Tensor& x, std::size_t stop) {
        std::vector<float> a(x.values().begin(), x.values().end());
        std::vector<float> b;
        std::size_t site = 0;
        for (std::size_t i = 0; i < stop; ++i) {
            const auto& layer = net.layers[i];
            b.assign(detail::volume_of(chain[i + 1]), 0.0f);
            if (layer.is_nonlinearity()) {
                for (std::size_t k = 0; k < a.size(); ++k) b[k] = detail::activation_value(layer, a[k]);
            } else {
                const BatchNormStats* bn = layer.kind == LayerKind::BatchNorm ? &stats.sites[site++] : nullptr;
                detail::linear_forward(layer, chain[i], chain[i + 1], a.data(), b.data(),
                                       bn ? bn->mean.data() : nullptr, bn ? bn->std.data() : nullptr);
            }
            a.swap(b);
        }
        return a;
    };
    for (const std::size_t layer : site_layers) {
        const std::size_t channels = chain[layer][0];
        const std::size_t plane = detail::plane_of(chain[layer]);
        const double count = static_cast<double>(plane * batch.size());
        std::vector<double> sum(channels, 0.0), ss(channels, 0.0);
        for (const auto& x : batch) {
            const auto a = run_to(x, layer);
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t i = 0; i < plane; ++i) sum[c] += a[c * plane + i];
            }
        }
        for (auto& v : sum) v /= count;
        for (const auto& x : batch) {
            const auto a = run_to(x, layer);
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = a[c * plane + i] - sum[c];
                    ss[c] += d * d;
                }
            }
        }
        BatchNormStats st{Tensor({channels}), Tensor({channels})};
        for (std::size_t c = 0; c < channels; ++c) {
            st.mean[c] = static_cast<float>(sum[c]);
            st.std[c] = std::max(static_cast<float>(std::sqrt(ss[c] / count)), kStdFloor);
        }
        stats.sites.push_back(std::move(st));
    }
    return stats;
}

std::size_t argmax(std::span<const float> probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return best;
}

Prediction predict(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats) {
    auto trace = forward(net, sample, stats);
    Prediction p;
    p.label = argmax(trace.probabilities.values());
    p.probabilities = std::move(trace.probabilities);
    return p;
}

}  // namespace eegattr
