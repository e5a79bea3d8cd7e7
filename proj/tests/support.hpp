#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegattr/engine.hpp"
#include "eegattr/models.hpp"
#include "eegattr/network.hpp"
#include "eegattr/rng.hpp"

namespace testing {

using namespace eegattr;

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
    CounterRng rng(seed);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<float>(scale * rng.normal());
    return t;
}

/// Random parameters of plausible scale, including non-trivial batch-norm
/// affine terms, so every code path sees generic values.
inline void randomize(NetworkSpec& net, std::uint64_t seed, double scale = 0.5) {
    CounterRng rng(seed);
    for (auto& layer : net.layers) {
        const auto names = layer.param_names();
        for (std::size_t p = 0; p < layer.params.size(); ++p) {
            for (auto& v : layer.params[p].values()) {
                if (names[p] == "gamma") {
                    v = static_cast<float>(0.5 + rng.uniform());
                } else {
                    v = static_cast<float>(scale * rng.normal());
                }
            }
        }
    }
}

/// Fills parameter tensors with the expected shapes (zeros).
inline void allocate(NetworkSpec& net) {
    auto chain = net.shape_chain();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& layer = net.layers[i];
        layer.params.clear();
        for (auto& s : layer.expected_param_shapes(chain[i])) layer.params.emplace_back(s, 0.0f);
    }
}

inline NetworkSpec make_net(std::string name, std::size_t n, std::size_t t, std::size_t k,
                            std::vector<LayerSpec> layers) {
    NetworkSpec net;
    net.name = std::move(name);
    net.channels = n;
    net.length = t;
    net.classes = k;
    net.layers = std::move(layers);
    allocate(net);
    return net;
}

/// Non-degenerate batch statistics for every batch-norm site.
inline BatchStats random_stats(const NetworkSpec& net, std::uint64_t seed) {
    BatchStats stats;
    CounterRng rng(seed);
    const auto chain = net.shape_chain();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::BatchNorm) continue;
        const std::size_t c = chain[i][0];
        BatchNormStats s{Tensor({c}), Tensor({c})};
        for (std::size_t j = 0; j < c; ++j) {
            s.mean[j] = static_cast<float>(0.2 * rng.normal());
            s.std[j] = static_cast<float>(0.5 + rng.uniform());
        }
        stats.sites.push_back(std::move(s));
    }
    return stats;
}

/// max |a - b| / max(max |b|, floor)
inline double relative_error(const Tensor64& a, const Tensor64& b, double floor = 1e-12) {
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        ref = std::max(ref, std::abs(b[i]));
    }
    return diff / std::max(ref, floor);
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("eegattr_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
