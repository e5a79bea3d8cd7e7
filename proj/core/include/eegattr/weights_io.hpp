#pragma once

#include <filesystem>

#include "eegattr/network.hpp"

namespace eegattr {

/// Writes the weight file: a one-line JSON manifest (format version,
/// architecture, hyperparameters, layer list, per-tensor name/shape/offset,
/// CRC-32 of the blob) followed by the little-endian float32 blob.
void save_weights(const NetworkSpec& net, const std::filesystem::path& path);

/// Inverse of save_weights. Throws ChecksumError, VersionError or
/// ShapeMismatchError for the respective corruption; FormatError otherwise.
NetworkSpec load_weights(const std::filesystem::path& path);

}  // namespace eegattr
