#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eegattr/engine.hpp"

namespace eegattr {

namespace method {
struct Saliency {};
struct Deconvolution {};
struct GuidedBackprop {};
struct GradTimesInput {};
/// Path integral approximated by the midpoint rule over `steps` gradient evaluations.
struct IntegratedGradients {
    std::size_t steps = 100;
};
struct EpsilonLrp {
    double epsilon = 1e-4;
};
struct DeepLiftRescale {
    double near_zero_delta = 1e-6;
};
}  // namespace method

using MethodVariant = std::variant<method::Saliency, method::Deconvolution, method::GuidedBackprop,
                                   method::GradTimesInput, method::IntegratedGradients, method::EpsilonLrp,
                                   method::DeepLiftRescale>;

/// Attribution method plus its reference input. An empty baseline means
/// all zeros (only IG and DeepLIFT read it).
struct MethodSpec {
    MethodVariant variant;
    Tensor baseline;

    /// Stable identifier: saliency, deconvolution, guided_backprop,
    /// grad_x_input, integrated_gradients, epsilon_lrp, deeplift.
    std::string name() const;
    void validate() const;
};

/// All seven method identifiers, in the order used for reports.
const std::vector<std::string>& method_names();

/// Default-parameter MethodSpec for an identifier; throws ValidationError
/// listing the closed set on an unknown name.
MethodSpec method_from_name(std::string_view name);

/// S_c: one score per sampling point.
struct ContributionMap {
    Tensor values;  // N x T
    std::string method;
    std::size_t target_class = 0;
};

/// Temporal mean of a ContributionMap.
struct ChannelContributionMap {
    Tensor values;  // N
    std::string method;
    std::size_t target_class = 0;
};

/// Contribution map of `sample` for `target_class` (default: the predicted
/// class). Batch-norm layers run as fixed affine maps with `stats` for every
/// forward pass involved, including the IG path and the DeepLIFT baseline.
ContributionMap attribute(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats,
                          const MethodSpec& method, std::optional<std::size_t> target_class = std::nullopt);

ChannelContributionMap channel_contribution(const ContributionMap& map);

/// i.i.d. standard normal scores, a pure function of (N, T, seed).
ContributionMap random_baseline_map(std::size_t channels, std::size_t length, std::uint64_t seed);

}  // namespace eegattr
