#pragma once

#include <cstddef>
#include <vector>

#include "eegattr/tensor.hpp"

namespace eegattr {

/// Display processing of contribution maps. Values below the colormap floor
/// are clamped to it after thresholding.
struct PipelineConfig {
    double sample_threshold = 2.0;
    double channel_threshold = 1.0;
    std::size_t smoothing_window = 5;
    double colormap_floor = -1.0;
    double colormap_ceiling = 1.0;
};

struct NormalizeResult {
    Tensor values;
    /// Input had zero variance; values are all zero.
    bool zero_variance = false;
};

/// (v - mean) / std over all entries, population std.
NormalizeResult normalize(const Tensor& map);

/// v <- max(v - t, floor).
Tensor apply_threshold(const Tensor& map, double threshold, double floor = -1.0);

/// Centered moving average along time (last axis) of every row. The window
/// shrinks at the edges. `window` must be odd and no longer than the row.
Tensor smooth(const Tensor& map, std::size_t window);

struct ProcessedMaps {
    Tensor sample;   // N x T
    Tensor channel;  // N
    /// Row-major N x T; true where the processed sample value is > 0.
    std::vector<bool> highlighted_points;
    /// Channel indices whose processed value is > 0, ascending.
    std::vector<std::size_t> highlighted_channels;
    bool sample_zero_variance = false;
    bool channel_zero_variance = false;

    std::size_t highlighted_count() const;
};

/// Sample map: normalize -> threshold -> smooth. Channel map: normalize -> threshold.
ProcessedMaps process(const Tensor& sample_map, const Tensor& channel_map, const PipelineConfig& config);

}  // namespace eegattr
