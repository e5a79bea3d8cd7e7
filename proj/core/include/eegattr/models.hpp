#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eegattr/engine.hpp"
#include "eegattr/network.hpp"

namespace eegattr {

/// EEGNet-F1,D. Defaults are EEGNet-8,2 at 128 Hz.
struct EegNetOptions {
    std::size_t f1 = 8;
    std::size_t depth = 2;
    std::size_t temporal_kernel = 64;
    std::size_t separable_kernel = 16;
    std::size_t pool1 = 4;
    std::size_t pool2 = 8;
    float dropout = 0.25f;
};

struct InterpretableCnnOptions {
    std::size_t kernels = 16;
    std::size_t temporal_kernel = 64;
    std::size_t depth = 2;
};

/// Smallest input length the EEGNet pooling chain accepts.
std::size_t eegnet_min_length(const EegNetOptions& opt);

NetworkSpec build_eegnet(std::size_t channels, std::size_t length, std::size_t classes,
                         const EegNetOptions& opt = {}, std::uint64_t seed = 0);

NetworkSpec build_interpretable_cnn(std::size_t channels, std::size_t length, std::size_t classes,
                                    const InterpretableCnnOptions& opt = {}, std::uint64_t seed = 0);

/// Rebuild a network from its architecture name and builder hyperparameters
/// (as stored in NetworkSpec::hyper). Parameters are freshly initialised.
NetworkSpec build_from_hyper(const std::string& architecture, const std::map<std::string, std::string>& hyper);

/// Allocate and fill every parameter tensor: fan-in scaled uniform weights
/// and biases, batch-norm gamma = 1 and beta = 0.
void initialize_parameters(NetworkSpec& net, std::uint64_t seed);

/// Identity statistics (mean 0, std 1) for every batch-norm site.
BatchStats identity_stats(const NetworkSpec& net);

/// Population mean/std of every batch-norm input over `batch`, computed
/// layer by layer with earlier sites normalised by their own batch
/// statistics. std is floored at kStdFloor.
BatchStats compute_batch_stats(const NetworkSpec& net, std::span<const Tensor> batch);

inline constexpr float kStdFloor = 1e-5f;

struct Prediction {
    std::size_t label = 0;
    Tensor probabilities;
};

/// Index of the largest probability; ties go to the lowest index.
std::size_t argmax(std::span<const float> probabilities);

Prediction predict(const NetworkSpec& net, const Tensor& sample, const BatchStats& stats);

}  // namespace eegattr
