#pragma once

// Manifest + blob container shared by the weight and dataset files:
//
//   <magic>\n
//   <manifest: one line of JSON>\n
//   <blob: little-endian float32 values>
//
// The manifest records "version", "blob_bytes" and "blob_crc32" (CRC-32 of
// the blob bytes).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace eegattr::detail {

inline constexpr int kFormatVersion = 1;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

/// Appends floats as little-endian bytes.
void append_floats(std::vector<std::uint8_t>& blob, std::span<const float> values);

/// Reads `count` little-endian floats starting at byte `offset`.
std::vector<float> read_floats(std::span<const std::uint8_t> blob, std::size_t offset, std::size_t count);

/// Fills blob_bytes, blob_crc32 and version, then writes the file.
void write_container(const std::filesystem::path& path, const std::string& magic, nlohmann::ordered_json manifest,
                     const std::vector<std::uint8_t>& blob);

struct Container {
    nlohmann::json manifest;
    std::vector<std::uint8_t> blob;
};

/// Validates magic (FormatError), version (VersionError) and the blob size and
/// CRC (ChecksumError).
Container read_container(const std::filesystem::path& path, const std::string& magic);

}  // namespace eegattr::detail
