#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace eegattr {

struct Electrode {
    std::string name;
    double x = 0.0;
    double y = 0.0;  // +y points toward the nose
};

/// Scalp positions projected onto the unit disc.
struct ElectrodeLayout {
    std::vector<Electrode> electrodes;

    std::size_t size() const { return electrodes.size(); }
    /// Throws ValidationError if absent.
    std::size_t index_of(std::string_view name) const;
    /// Electrodes for `names`, in that order.
    ElectrodeLayout subset(const std::vector<std::string>& names) const;
    std::vector<std::string> names() const;
};

/// Lines of `NAME x y`; '#' starts a comment. Malformed lines and duplicate
/// names raise FormatError, coordinates outside the unit disc CoordinateError.
ElectrodeLayout parse_layout(std::string_view text, const std::string& source = "<layout>");
ElectrodeLayout load_layout(const std::filesystem::path& path);

/// The bundled 30-channel 10-20 montage.
const ElectrodeLayout& default_layout();
std::string_view default_layout_text();

}  // namespace eegattr
