#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "eegattr/network.hpp"
#include "eegattr/tensor.hpp"

namespace eegattr {

/// Mean and standard deviation of one batch-norm site, per feature map.
struct BatchNormStats {
    Tensor mean;
    Tensor std;
};

/// Fixed statistics for every batch-norm layer of a network, in layer order.
struct BatchStats {
    std::vector<BatchNormStats> sites;
};

/// How a backward pass treats the nonlinearity layers. Every other layer is
/// back-propagated as its exact (linear) Jacobian transpose.
namespace rule {
struct Plain {};
/// max(g, 0): the upstream signal is rectified, f' is ignored.
struct Deconv {};
/// g * f'(z) * [z > 0] * [g > 0].
struct Guided {};
/// g * f(z) / (z + eps * sign(z)), sign(0) = +1.
struct EpsilonLrp {
    double epsilon = 1e-4;
};
/// g * (f(z) - f(z0)) / (z - z0), with f'((z + z0) / 2) when |z - z0| < near_zero_delta.
struct DeepLiftRescale {
    double near_zero_delta = 1e-6;
};
}  // namespace rule

using BackwardRule = std::variant<rule::Plain, rule::Deconv, rule::Guided, rule::EpsilonLrp, rule::DeepLiftRescale>;

/// Throws ValidationError when epsilon / near_zero_delta is not positive.
void validate_rule(const BackwardRule& r);

/// Activations recorded by a forward pass. activations[i] is the input of
/// layer i (its pre-activation when the layer is a nonlinearity) and
/// activations[i + 1] its output.
template <typename T>
struct ForwardTrace {
    std::vector<BasicTensor<T>> activations;
    BasicTensor<T> logits;
    BasicTensor<T> probabilities;

    const BasicTensor<T>& pre(std::size_t layer) const { return activations[layer]; }
    const BasicTensor<T>& out(std::size_t layer) const { return activations[layer + 1]; }
};

/// Softmax with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

/// Layer-wise forward pass. `input` is N x T (or 1 x N x T). Batch-norm
/// layers use `stats`; dropout is the identity.
template <typename T>
ForwardTrace<T> forward(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats);

/// Only the target logit; cheaper than a full trace for perturbation loops.
template <typename T>
T forward_logit(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats, std::size_t target);

/// d logit_target / d input (N x T) under `rule`. The seed is 1 at the
/// pre-softmax target logit. `baseline` is required for DeepLiftRescale.
template <typename T>
BasicTensor<T> backward(const NetworkSpec& net, const ForwardTrace<T>& trace, const BatchStats& stats,
                        std::size_t target_class, const BackwardRule& rule,
                        const ForwardTrace<T>* baseline = nullptr);

/// Central differences of the target logit, one input coordinate at a time.
template <typename T>
BasicTensor<T> finite_diff_gradient(const NetworkSpec& net, const BasicTensor<T>& input, const BatchStats& stats,
                                    std::size_t target_class, T h);

/// Checks that `stats` has one entry per batch-norm layer with matching widths.
void check_stats(const NetworkSpec& net, const BatchStats& stats);

}  // namespace eegattr
