#include "container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "eegattr/error.hpp"

namespace eegattr::detail {

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void append_floats(std::vector<std::uint8_t>& blob, std::span<const float> values) {
    const std::size_t start = blob.size();
    blob.resize(start + values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
        std::uint8_t* dst = blob.data() + start + 4 * i;
        for (int b = 0; b < 4; ++b) dst[b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
}

std::vector<float> read_floats(std::span<const std::uint8_t> blob, std::size_t offset, std::size_t count) {
    if (offset + count * 4 > blob.size()) {
        throw FormatError("tensor range [" + std::to_string(offset) + ", +" + std::to_string(count * 4) +
                          ") lies outside the " + std::to_string(blob.size()) + "-byte blob");
    }
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t* src = blob.data() + offset + 4 * i;
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[b]) << (8 * b);
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

void write_container(const std::filesystem::path& path, const std::string& magic, nlohmann::ordered_json manifest,
                     const std::vector<std::uint8_t>& blob) {
    manifest["blob_bytes"] = blob.size();
    manifest["blob_crc32"] = crc32_of(blob);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out << magic << '\n' << manifest.dump() << '\n';
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path, const std::string& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line != magic) {
        throw FormatError("'" + path.string() + "': malformed header, expected '" + magic + "'");
    }
    std::string manifest_line;
    if (!std::getline(in, manifest_line)) throw FormatError("'" + path.string() + "': missing manifest");
    Container c;
    try {
        c.manifest = nlohmann::json::parse(manifest_line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + path.string() + "': malformed manifest: " + e.what());
    }
    if (!c.manifest.is_object() || !c.manifest.contains("version") || !c.manifest["version"].is_number_integer()) {
        throw FormatError("'" + path.string() + "': manifest has no integer 'version'");
    }
    if (c.manifest["version"].get<int>() != kFormatVersion) {
        throw VersionError("'" + path.string() + "': format version " + c.manifest["version"].dump() +
                           " is not supported (expected " + std::to_string(kFormatVersion) + ")");
    }
    c.blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    std::uint64_t expected_bytes = 0;
    std::uint32_t expected_crc = 0;
    try {
        expected_bytes = c.manifest.at("blob_bytes").get<std::uint64_t>();
        expected_crc = c.manifest.at("blob_crc32").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + path.string() + "': manifest field 'blob_bytes'/'blob_crc32': " + e.what());
    }
    if (c.blob.size() != expected_bytes) {
        throw ChecksumError("'" + path.string() + "': blob has " + std::to_string(c.blob.size()) +
                            " bytes, manifest declares " + std::to_string(expected_bytes) + " (truncated?)");
    }
    if (crc32_of(c.blob) != expected_crc) {
        throw ChecksumError("'" + path.string() + "': blob CRC-32 mismatch");
    }
    return c;
}

}  // namespace eegattr::detail
