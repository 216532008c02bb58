#pragma once

#include "circa/json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace circa {

/// Native model container.
///
/// Layout: 8-byte magic "CIRCAMF1", uint32 little-endian header length,
/// canonical JSON header, then `payload_count` little-endian float32 values.
/// The header carries `type`, `format_version`, free-form `meta`,
/// `payload_count` and `payload_sha256` (over the raw payload bytes).
struct ModelFile {
    std::string type;
    int format_version = 1;
    Json meta;
    std::vector<float> payload;
    std::string payload_sha256;
};

std::vector<std::uint8_t> encode_model_file(const std::string& type, const Json& meta,
                                            std::span<const float> payload);
ModelFile decode_model_file(std::span<const std::uint8_t> bytes);

void save_model_file(const std::filesystem::path& path, const std::string& type,
                     const Json& meta, std::span<const float> payload);

/// Loads and verifies the checksum; throws CorruptModel on mismatch or when
/// `expected_type` is non-empty and differs from the stored type.
ModelFile load_model_file(const std::filesystem::path& path, const std::string& expected_type = {});

/// Reads only the header (no payload verification) for health reporting.
ModelFile peek_model_header(const std::filesystem::path& path);

/// Stores each double as three float32 terms (hi, mid, lo) whose sum is the
/// original value exactly for finite values within float range.
void pack_f64(std::vector<float>& out, std::span<const double> values);
inline void pack_f64(std::vector<float>& out, double value) { pack_f64(out, std::span<const double>(&value, 1)); }

/// Reads `count` packed doubles starting at float offset `pos`, advancing it.
/// Throws CorruptModel when the payload is too short.
std::vector<double> unpack_f64(std::span<const float> payload, std::size_t& pos, std::size_t count);

}  // namespace circa
