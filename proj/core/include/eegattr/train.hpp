#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eegattr/network.hpp"

namespace eegattr {

/// Adam + class-weighted cross-entropy. Defaults are Adam's published
/// defaults with batch size 50.
struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 50;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// One positive weight per class; empty means all ones.
    std::vector<double> class_weights;
    std::uint64_t seed = 0;

    void validate(std::size_t classes) const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    NetworkSpec net;
    std::vector<EpochStats> history;
};

/// Mini-batch training. Batch norm normalises with each mini-batch's own
/// statistics; dropout masks derive from (seed, epoch, batch, layer, sample).
/// The loss of a batch is sum(w[y] * ce) / sum(w[y]).
TrainResult train(const NetworkSpec& net, std::span<const Tensor> samples, std::span<const std::size_t> labels,
                  const TrainConfig& config);

/// Weighted cross-entropy of one batch at the current parameters (training
/// mode without dropout). Exposed for tests.
double batch_loss(const NetworkSpec& net, std::span<const Tensor> samples, std::span<const std::size_t> labels,
                  std::span<const double> class_weights);

}  // namespace eegattr
