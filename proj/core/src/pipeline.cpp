#include "eegattr/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace eegattr {

NormalizeResult normalize(const Tensor& map) {
    NormalizeResult out{Tensor(map.shape(), 0.0f), false};
    if (map.empty()) return out;
    double sum = 0.0;
    for (float v : map.values()) sum += v;
    const double mean = sum / static_cast<double>(map.size());
    double ss = 0.0;
    for (float v : map.values()) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(map.size()));
    if (!(sd > 0.0)) {
        out.zero_variance = true;
        return out;
    }
    for (std::size_t i = 0; i < map.size(); ++i) out.values[i] = static_cast<float>((map[i] - mean) / sd);
    return out;
}

Tensor apply_threshold(const Tensor& map, double threshold, double floor) {
    Tensor out = map;
    for (auto& v : out.values()) v = static_cast<float>(std::max(static_cast<double>(v) - threshold, floor));
    return out;
}

Tensor smooth(const Tensor& map, std::size_t window) {
    if (map.rank() < 1 || map.rank() > 2) throw ShapeError("smooth: expected a 1-D or 2-D map");
    const std::size_t t = map.shape().back();
    const std::size_t rows = map.size() / std::max<std::size_t>(t, 1);
    if (window < 1 || window % 2 == 0) {
        throw ValidationError("smooth: window must be odd and positive, got " + std::to_string(window));
    }
    if (window > t) {
        throw ValidationError("smooth: window " + std::to_string(window) + " exceeds length " + std::to_string(t));
    }
    const std::size_t half = window / 2;
    Tensor out(map.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = map.data() + r * t;
        float* dst = out.data() + r * t;
        for (std::size_t j = 0; j < t; ++j) {
            const std::size_t lo = j >= half ? j - half : 0;
            const std::size_t hi = std::min(t, j + half + 1);
            double acc = 0.0;
            for (std::size_t k = lo; k < hi; ++k) acc += row[k];
            dst[j] = static_cast<float>(acc / static_cast<double>(hi - lo));
        }
    }
    return out;
}

std::size_t ProcessedMaps::highlighted_count() const {
    return static_cast<std::size_t>(std::count(highlighted_points.begin(), highlighted_points.end(), true));
}

ProcessedMaps process(const Tensor& sample_map, const Tensor& channel_map, const PipelineConfig& config) {
    if (sample_map.rank() != 2) throw ShapeError("process: sample map must be N x T");
    if (channel_map.size() != sample_map.dim(0)) {
        throw ShapeError("process: channel map has " + std::to_string(channel_map.size()) + " entries for " +
                         std::to_string(sample_map.dim(0)) + " channels");
    }
    ProcessedMaps out;
    auto ns = normalize(sample_map);
    out.sample_zero_variance = ns.zero_variance;
    out.sample = smooth(apply_threshold(ns.values, config.sample_threshold, config.colormap_floor),
                        config.smoothing_window);
    auto nc = normalize(channel_map.reshaped({channel_map.size()}));
    out.channel_zero_variance = nc.zero_variance;
    out.channel = apply_threshold(nc.values, config.channel_threshold, config.colormap_floor);

    out.highlighted_points.resize(out.sample.size());
    for (std::size_t i = 0; i < out.sample.size(); ++i) out.highlighted_points[i] = out.sample[i] > 0.0f;
    for (std::size_t i = 0; i < out.channel.size(); ++i) {
        if (out.channel[i] > 0.0f) out.highlighted_channels.push_back(i);
    }
    return out;
}

}  // namespace eegattr
