#include "eegattr/layout.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "eegattr/error.hpp"

namespace eegattr {

namespace {

constexpr std::string_view kDefaultLayout = R"(
# 30-channel 10-20 montage, azimuthal projection onto the unit disc.
# NAME x y  (+x right ear, +y nose)
FP1 -0.2527 0.7776
FP2 0.2527 0.7776
F7 -0.6615 0.4806
F3 -0.3353 0.4141
FZ 0.0000 0.4096
F4 0.3353 0.4141
F8 0.6615 0.4806
FT7 -0.7776 0.2527
FC3 -0.3927 0.2088
FCZ 0.0000 0.2048
FC4 0.3927 0.2088
FT8 0.7776 0.2527
T3 -0.8176 0.0000
C3 -0.4096 0.0000
CZ 0.0000 0.0000
C4 0.4096 0.0000
T4 0.8176 0.0000
TP7 -0.7776 -0.2527
CP3 -0.3927 -0.2088
CPZ 0.0000 -0.2048
CP4 0.3927 -0.2088
TP8 0.7776 -0.2527
T5 -0.6615 -0.4806
P3 -0.3353 -0.4141
PZ 0.0000 -0.4096
P4 0.3353 -0.4141
T6 0.6615 -0.4806
O1 -0.2527 -0.7776
OZ 0.0000 -0.8176
O2 0.2527 -0.7776
)";

}  // namespace

std::size_t ElectrodeLayout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < electrodes.size(); ++i) {
        if (electrodes[i].name == name) return i;
    }
    throw ValidationError("layout has no electrode named '" + std::string(name) + "'");
}

ElectrodeLayout ElectrodeLayout::subset(const std::vector<std::string>& names) const {
    ElectrodeLayout out;
    for (const auto& n : names) out.electrodes.push_back(electrodes[index_of(n)]);
    return out;
}

std::vector<std::string> ElectrodeLayout::names() const {
    std::vector<std::string> out;
    for (const auto& e : electrodes) out.push_back(e.name);
    return out;
}

ElectrodeLayout parse_layout(std::string_view text, const std::string& source) {
    ElectrodeLayout layout;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string name;
        if (!(fields >> name)) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        double x = 0.0, y = 0.0;
        std::string extra;
        if (!(fields >> x >> y) || (fields >> extra)) {
            throw FormatError(where + ": expected 'NAME x y'");
        }
        if (!std::isfinite(x) || !std::isfinite(y) || x * x + y * y > 1.0) {
            throw CoordinateError(where + ": electrode " + name + " lies outside the unit disc");
        }
        for (const auto& e : layout.electrodes) {
            if (e.name == name) throw FormatError(where + ": duplicate electrode " + name);
        }
        layout.electrodes.push_back({name, x, y});
    }
    if (layout.electrodes.empty()) throw FormatError(source + ": no electrodes");
    return layout;
}

ElectrodeLayout load_layout(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open layout file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_layout(buf.str(), path.string());
}

std::string_view default_layout_text() { return kDefaultLayout.substr(1); }

const ElectrodeLayout& default_layout() {
    static const ElectrodeLayout layout = parse_layout(default_layout_text(), "<default layout>");
    return layout;
}

}  // namespace eegattr
