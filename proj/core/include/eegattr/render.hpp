#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eegattr/layout.hpp"
#include "eegattr/pipeline.hpp"

namespace eegattr {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Diverging colormap stops at -1, 0 and +1.
inline constexpr Rgb kColdColor{0x21, 0x66, 0xAC};
inline constexpr Rgb kNeutralColor{0xDD, 0xDD, 0xDD};
inline constexpr Rgb kHotColor{0xB2, 0x18, 0x2B};

/// Piecewise-linear between the three stops; inputs are clamped to [-1, 1].
Rgb colormap(double value);
std::string hex(Rgb color);

struct SampleViewInfo {
    std::string title;  // header line, e.g. subject/sample/label/probabilities
    std::vector<std::string> channel_names;
};

/// Stacked traces, one <g class="trace"> per channel. The segment from t to
/// t+1 takes the color of the processed sample value at t.
std::string render_sample_view(const Tensor& sample, const ProcessedMaps& processed, const SampleViewInfo& info);

inline constexpr std::size_t kTopomapGrid = 64;

/// Inverse-distance-weighted (power 2) value at (x, y). Returns the node value
/// exactly when (x, y) coincides with an electrode.
double idw_interpolate(const ElectrodeLayout& layout, const std::vector<double>& values, double x, double y);

/// kTopomapGrid x kTopomapGrid cell-centre values over [-1, 1]^2, row 0 at
/// the top (+y); cells outside the unit circle are NaN. Throws
/// ValidationError on size mismatch or duplicate coordinates.
std::vector<double> topomap_grid(const ElectrodeLayout& layout, const std::vector<double>& values);

std::string render_topomap(const Tensor& channel_map, const ElectrodeLayout& layout, const std::string& title = "");

}  // namespace eegattr
