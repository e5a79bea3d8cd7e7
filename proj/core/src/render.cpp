#include "eegattr/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "eegattr/error.hpp"

namespace eegattr {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s = buf;
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::uint8_t lerp(std::uint8_t a, std::uint8_t b, double t) {
    return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * t));
}

Rgb mix(Rgb a, Rgb b, double t) { return {lerp(a.r, b.r, t), lerp(a.g, b.g, t), lerp(a.b, b.b, t)}; }

void check_coordinates(const ElectrodeLayout& layout) {
    for (std::size_t i = 0; i < layout.size(); ++i) {
        for (std::size_t j = i + 1; j < layout.size(); ++j) {
            const auto& a = layout.electrodes[i];
            const auto& b = layout.electrodes[j];
            if (a.x == b.x && a.y == b.y) {
                throw ValidationError("topomap: electrodes " + a.name + " and " + b.name + " share coordinates");
            }
        }
    }
}

}  // namespace

Rgb colormap(double value) {
    if (std::isnan(value)) return kNeutralColor;
    const double v = std::clamp(value, -1.0, 1.0);
    return v < 0.0 ? mix(kNeutralColor, kColdColor, -v) : mix(kNeutralColor, kHotColor, v);
}

std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
    return buf;
}

std::string render_sample_view(const Tensor& sample, const ProcessedMaps& processed, const SampleViewInfo& info) {
    if (sample.rank() != 2) throw ShapeError("render_sample_view: sample must be N x T");
    const std::size_t n = sample.dim(0);
    const std::size_t t = sample.dim(1);
    if (processed.sample.size() != n * t) {
        throw ShapeError("render_sample_view: processed map shape " + shape_string(processed.sample.shape()) +
                         " differs from sample shape " + shape_string(sample.shape()));
    }
    if (info.channel_names.size() != n) {
        throw ValidationError("render_sample_view: " + std::to_string(info.channel_names.size()) +
                              " channel names for " + std::to_string(n) + " channels");
    }

    constexpr double kLeft = 60.0, kTop = 40.0, kRow = 28.0, kPlotWidth = 900.0;
    const double width = kLeft + kPlotWidth + 20.0;
    const double height = kTop + kRow * static_cast<double>(n) + 20.0;
    double peak = 0.0;
    for (float v : sample.values()) peak = std::max(peak, static_cast<double>(std::abs(v)));
    const double yscale = peak > 0.0 ? (kRow * 0.45) / peak : 0.0;
    const double dx = t > 1 ? kPlotWidth / static_cast<double>(t - 1) : 0.0;

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#FFFFFF\"/>\n";
    svg += "<text class=\"header\" x=\"" + num(kLeft) + "\" y=\"24.00\" font-family=\"sans-serif\" font-size=\"14\">" +
           escape(info.title) + "</text>\n";
    for (std::size_t c = 0; c < n; ++c) {
        const double base = kTop + kRow * (static_cast<double>(c) + 0.5);
        svg += "<g class=\"trace\" data-channel=\"" + escape(info.channel_names[c]) + "\">\n";
        svg += "<text x=\"" + num(kLeft - 6.0) + "\" y=\"" + num(base + 4.0) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               escape(info.channel_names[c]) + "</text>\n";
        auto point = [&](std::size_t j) {
            return num(kLeft + dx * static_cast<double>(j)) + "," + num(base - yscale * sample.at(c, j));
        };
        if (t == 1) {
            svg += "<circle cx=\"" + num(kLeft) + "\" cy=\"" + num(base - yscale * sample.at(c, 0)) +
                   "\" r=\"1.5\" fill=\"" + hex(colormap(processed.sample.at(c, 0))) + "\"/>\n";
        }
        // Runs of equal color become one polyline.
        std::size_t j = 0;
        while (j + 1 < t) {
            const std::string color = hex(colormap(processed.sample.at(c, j)));
            std::string pts = point(j);
            std::size_t k = j;
            while (k + 1 < t && hex(colormap(processed.sample.at(c, k))) == color) {
                pts += " " + point(k + 1);
                ++k;
            }
            svg += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
            j = k;
        }
        svg += "</g>\n";
    }
    svg += "</svg>\n";
    return svg;
}

double idw_interpolate(const ElectrodeLayout& layout, const std::vector<double>& values, double x, double y) {
    if (values.size() != layout.size()) {
        throw ValidationError("topomap: " + std::to_string(values.size()) + " values for " +
                              std::to_string(layout.size()) + " electrodes");
    }
    double num_acc = 0.0, den = 0.0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const double ex = x - layout.electrodes[i].x;
        const double ey = y - layout.electrodes[i].y;
        const double d2 = ex * ex + ey * ey;
        if (d2 == 0.0) return values[i];
        num_acc += values[i] / d2;
        den += 1.0 / d2;
    }
    return num_acc / den;
}

std::vector<double> topomap_grid(const ElectrodeLayout& layout, const std::vector<double>& values) {
    check_coordinates(layout);
    std::vector<double> grid(kTopomapGrid * kTopomapGrid, std::numeric_limits<double>::quiet_NaN());
    const double cell = 2.0 / static_cast<double>(kTopomapGrid);
    for (std::size_t r = 0; r < kTopomapGrid; ++r) {
        const double y = 1.0 - cell * (static_cast<double>(r) + 0.5);
        for (std::size_t c = 0; c < kTopomapGrid; ++c) {
            const double x = -1.0 + cell * (static_cast<double>(c) + 0.5);
            if (x * x + y * y > 1.0) continue;
            grid[r * kTopomapGrid + c] = idw_interpolate(layout, values, x, y);
        }
    }
    return grid;
}

std::string render_topomap(const Tensor& channel_map, const ElectrodeLayout& layout, const std::string& title) {
    if (channel_map.size() != layout.size()) {
        throw ValidationError("render_topomap: channel map has " + std::to_string(channel_map.size()) +
                              " entries for " + std::to_string(layout.size()) + " electrodes");
    }
    std::vector<double> values(channel_map.values().begin(), channel_map.values().end());
    const auto grid = topomap_grid(layout, values);

    constexpr double kSize = 320.0, kMargin = 30.0;
    const double radius = kSize / 2.0;
    const double cx = kMargin + radius;
    const double cy = kMargin + radius + 10.0;
    const double cell = kSize / static_cast<double>(kTopomapGrid);
    const double total = kSize + 2.0 * kMargin;

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(total) + "\" height=\"" + num(total + 10.0) +
           "\" viewBox=\"0 0 " + num(total) + " " + num(total + 10.0) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#FFFFFF\"/>\n";
    if (!title.empty()) {
        svg += "<text class=\"header\" x=\"" + num(cx) +
               "\" y=\"18.00\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape(title) +
               "</text>\n";
    }
    svg += "<g class=\"field\">\n";
    for (std::size_t r = 0; r < kTopomapGrid; ++r) {
        for (std::size_t c = 0; c < kTopomapGrid; ++c) {
            const double v = grid[r * kTopomapGrid + c];
            if (std::isnan(v)) continue;
            svg += "<rect x=\"" + num(cx - radius + cell * static_cast<double>(c)) + "\" y=\"" +
                   num(cy - radius + cell * static_cast<double>(r)) + "\" width=\"" + num(cell + 0.05) +
                   "\" height=\"" + num(cell + 0.05) + "\" fill=\"" + hex(colormap(v)) + "\"/>\n";
        }
    }
    svg += "</g>\n";
    svg += "<circle class=\"head\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(radius) +
           "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
    svg += "<polyline class=\"nose\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\" points=\"" +
           num(cx - 10.0) + "," + num(cy - radius + 1.0) + " " + num(cx) + "," + num(cy - radius - 10.0) + " " +
           num(cx + 10.0) + "," + num(cy - radius + 1.0) + "\"/>\n";
    for (const auto& e : layout.electrodes) {
        const double ex = cx + e.x * radius;
        const double ey = cy - e.y * radius;
        svg += "<g class=\"electrode\"><circle cx=\"" + num(ex) + "\" cy=\"" + num(ey) +
               "\" r=\"2.50\" fill=\"#000000\"/><text x=\"" + num(ex) + "\" y=\"" + num(ey - 4.0) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"8\">" + escape(e.name) +
               "</text></g>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace eegattr
