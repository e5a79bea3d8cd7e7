#include "eegattr/attribution.hpp"

#include <cmath>
#include <type_traits>

#include "eegattr/models.hpp"
#include "eegattr/rng.hpp"

namespace eegattr {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Tensor flat_input(const NetworkSpec& net, const Tensor& sample) {
    if (sample.size() != net.channels * net.length) {
        throw ShapeError("attribute: sample shape " + shape_string(sample.shape()) + " does not match network input " +
                         std::to_string(net.channels) + "x" + std::to_string(net.length));
    }
    return sample.reshaped({net.channels, net.length});
}

Tensor resolve_baseline(const NetworkSpec& net, const MethodSpec& spec) {
    if (spec.baseline.empty()) return Tensor({net.channels, net.length}, 0.0f);
    return flat_input(net, spec.baseline);
}

}  // namespace

std::string MethodSpec::name() const {
    return std::visit(overloaded{
                          [](const method::Saliency&) { return std::string("saliency"); },
                          [](const method::Deconvolution&) { return std::string("deconvolution"); },
                          [](const method::GuidedBackprop&) { return std::string("guided_backprop"); },
                          [](const method::GradTimesInput&) { return std::string("grad_x_input"); },
                          [](const method::IntegratedGradients&) { return std::string("integrated_gradients"); },
                          [](const method::EpsilonLrp&) { return std::string("epsilon_lrp"); },
                          [](const method::DeepLiftRescale&) { return std::string("deeplift"); },
                      },
                      variant);
}

void MethodSpec::validate() const {
    if (const auto* ig = std::get_if<method::IntegratedGradients>(&variant); ig && ig->steps < 1) {
        throw ValidationError("integrated gradients needs steps >= 1");
    }
    if (const auto* e = std::get_if<method::EpsilonLrp>(&variant); e && !(e->epsilon > 0.0)) {
        throw ValidationError("epsilon-LRP needs epsilon > 0");
    }
    if (const auto* d = std::get_if<method::DeepLiftRescale>(&variant); d && !(d->near_zero_delta > 0.0)) {
        throw ValidationError("DeepLIFT needs near_zero_delta > 0");
    }
    if (!baseline.empty() && !baseline.all_finite()) throw ValidationError("attribution baseline is not finite");
}

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {"saliency",    "deconvolution",        "guided_backprop",
                                                   "grad_x_input", "integrated_gradients", "epsilon_lrp",
                                                   "deeplift"};
    return names;
}

MethodSpec method_from_name(std::string_view name) {
    if (name == "saliency") return {method::Saliency{}, {}};
    if (name == "deconvolution") return {method::Deconvolution{}, {}};
    if (name == "guided_backprop") return {method::GuidedBackprop{}, {}};
    if (name == "grad_x_input") return {method::GradTimesInput{}, {}};
    if (name == "integrated_gradients") return {method::IntegratedGradients{}, {}};
    if (name == "epsilon_lrp") return {method::EpsilonLrp{}, {}};
    if (name == "deeplift") return {method::DeepLiftRescale{}, {}};
    std::string all;
    for (const auto& n : method_names()) all += (all.empty() ? "" : ", ") + n;
    throw ValidationError("unknown method '" + std::string(name) + "'; expected one of: " + all);
}

namespace {

ContributionMap attribute_impl(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                               const MethodSpec& spec, std::optional<std::size_t> target_class) {
    const Tensor x = flat_input(net, sample);
    const auto trace = forward(net, x, stats);
    const std::size_t target = target_class.value_or(argmax(trace.probabilities.values()));
    if (target >= net.classes) {
        throw ValidationError("attribute: target class " + std::to_string(target) + " out of range");
    }

    auto times = [](Tensor a, const Tensor& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
        return a;
    };

    Tensor values = std::visit(
        overloaded{
            [&](const method::Saliency&) {
                Tensor g = backward(net, trace, stats, target, rule::Plain{});
                for (auto& v : g.values()) v = std::abs(v);
                return g;
            },
            [&](const method::Deconvolution&) { return backward(net, trace, stats, target, rule::Deconv{}); },
            [&](const method::GuidedBackprop&) { return backward(net, trace, stats, target, rule::Guided{}); },
            [&](const method::GradTimesInput&) {
                return times(backward(net, trace, stats, target, rule::Plain{}), x);
            },
            [&](const method::IntegratedGradients& ig) {
                const Tensor base = resolve_baseline(net, spec);
                std::vector<double> sum(x.size(), 0.0);
                Tensor point(x.shape());
                // midpoint of each of the `steps` equal sub-intervals of the path
                for (std::size_t k = 0; k < ig.steps; ++k) {
                    const float a = static_cast<float>((static_cast<double>(k) + 0.5) / static_cast<double>(ig.steps));
                    for (std::size_t i = 0; i < x.size(); ++i) point[i] = base[i] + a * (x[i] - base[i]);
                    const auto t = forward(net, point, stats);
                    const Tensor g = backward(net, t, stats, target, rule::Plain{});
                    for (std::size_t i = 0; i < x.size(); ++i) sum[i] += g[i];
                }
                Tensor out(x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) {
                    out[i] = static_cast<float>((static_cast<double>(x[i]) - base[i]) * sum[i] /
                                                static_cast<double>(ig.steps));
                }
                return out;
            },
            [&](const method::EpsilonLrp& e) {
                return times(backward(net, trace, stats, target, rule::EpsilonLrp{e.epsilon}), x);
            },
            [&](const method::DeepLiftRescale& d) {
                const Tensor base = resolve_baseline(net, spec);
                const auto base_trace = forward(net, base, stats);
                Tensor m = backward(net, trace, stats, target, rule::DeepLiftRescale{d.near_zero_delta}, &base_trace);
                for (std::size_t i = 0; i < m.size(); ++i) m[i] *= x[i] - base[i];
                return m;
            },
        },
        spec.variant);

    if (!values.all_finite()) {
        throw NumericError("produced a non-finite map");
    }
    return {std::move(values), spec.name(), target};
}

}  // namespace

ContributionMap attribute(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                          const MethodSpec& spec, std::optional<std::size_t> target_class) {
    spec.validate();
    try {
        return attribute_impl(net, sample, stats, spec, target_class);
    } catch (const NumericError& e) {
        throw NumericError("attribute: method '" + spec.name() + "': " + e.what());
    }
}

ChannelContributionMap channel_contribution(const ContributionMap& map) {
    if (map.values.rank() != 2) {
        throw ShapeError("channel_contribution: expected an N x T map, got " + shape_string(map.values.shape()));
    }
    const std::size_t n = map.values.dim(0);
    const std::size_t t = map.values.dim(1);
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < t; ++j) acc += map.values.at(i, j);
        out[i] = static_cast<float>(acc / static_cast<double>(t));
    }
    return {std::move(out), map.method, map.target_class};
}

ContributionMap random_baseline_map(std::size_t channels, std::size_t length, std::uint64_t seed) {
    CounterRng rng(derive_seed(seed, {channels, length}));
    Tensor values({channels, length});
    for (auto& v : values.values()) v = static_cast<float>(rng.normal());
    return {std::move(values), "random", 0};
}

}  // namespace eegattr
