#pragma once

// Batched forward/backward used by training and by batch-statistics
// computation. Batch norm normalises with the current batch's statistics.

#include <cstdint>
#include <span>
#include <vector>

#include "eegattr/engine.hpp"
#include "eegattr/network.hpp"

namespace eegattr::detail {

struct BatchPass {
    std::vector<ActShape> chain;
    /// acts[layer][sample]: input of layer `layer` (acts[L] are the outputs).
    std::vector<std::vector<Tensor>> acts;
    /// Per batch-norm layer index: the statistics used on this batch.
    std::vector<BatchNormStats> bn_stats;
    /// Per dropout layer index: per-sample multiplicative masks (0 or 1/(1-p)).
    std::vector<std::vector<std::vector<float>>> dropout_masks;
};

/// training=false: dropout is the identity.
BatchPass batch_forward(const NetworkSpec& net, std::span<const Tensor> inputs, bool training,
                        std::uint64_t dropout_seed);

/// Back-propagates per-sample logit gradients through a training pass and
/// accumulates parameter gradients into `grads` (same layout as the layer
/// params, zero-initialised by the caller).
void batch_backward(const NetworkSpec& net, const BatchPass& pass, std::vector<std::vector<float>> dlogits,
                    std::vector<std::vector<Tensor>>& grads);

}  // namespace eegattr::detail
