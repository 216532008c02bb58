#include "circa/model_io.hpp"

#include "circa/checksum.hpp"
#include "circa/error.hpp"
#include "circa/io.hpp"

#include <bit>
#include <cstring>

namespace circa {
namespace {

constexpr char kMagic[8] = {'C', 'I', 'R', 'C', 'A', 'M', 'F', '1'};

std::vector<std::uint8_t> payload_bytes(std::span<const float> payload) {
    std::vector<std::uint8_t> out(payload.size() * 4);
    for (std::size_t i = 0; i < payload.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(payload[i]);
        for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return out;
}

struct Parsed {
    Json header;
    std::size_t payload_offset = 0;
};

Parsed parse_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw Error(ErrorCode::CorruptModel, "missing model file magic");
    }
    std::uint32_t len = 0;
    for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(bytes[8 + b]) << (8 * b);
    if (bytes.size() < 12 + static_cast<std::size_t>(len)) {
        throw Error(ErrorCode::CorruptModel, "truncated model header");
    }
    Parsed parsed;
    try {
        parsed.header = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("bad model header: ") + e.what());
    }
    parsed.payload_offset = 12 + len;
    return parsed;
}

ModelFile from_header(const Json& header) {
    ModelFile file;
    try {
        file.type = header.at("type").get<std::string>();
        file.format_version = header.at("format_version").get<int>();
        file.meta = header.value("meta", Json::object());
        file.payload_sha256 = header.at("payload_sha256").get<std::string>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("incomplete model header: ") + e.what());
    }
    return file;
}

}  // namespace

std::vector<std::uint8_t> encode_model_file(const std::string& type, const Json& meta,
                                            std::span<const float> payload) {
    const auto body = payload_bytes(payload);
    Json header = {{"type", type},
                   {"format_version", 1},
                   {"meta", meta},
                   {"payload_count", payload.size()},
                   {"payload_sha256", sha256_hex(body)}};
    const std::string text = canonical_dump(header);
    std::vector<std::uint8_t> out(kMagic, kMagic + 8);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

ModelFile decode_model_file(std::span<const std::uint8_t> bytes) {
    const Parsed parsed = parse_header(bytes);
    ModelFile file = from_header(parsed.header);
    const auto count = parsed.header.value("payload_count", std::size_t{0});
    if (bytes.size() != parsed.payload_offset + count * 4) {
        throw Error(ErrorCode::CorruptModel, "payload length does not match header");
    }
    const auto body = bytes.subspan(parsed.payload_offset);
    if (sha256_hex(body) != file.payload_sha256) {
        throw Error(ErrorCode::CorruptModel, "payload checksum mismatch");
    }
    file.payload.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(body[i * 4 + b]) << (8 * b);
        file.payload[i] = std::bit_cast<float>(bits);
    }
    return file;
}

void save_model_file(const std::filesystem::path& path, const std::string& type, const Json& meta,
                     std::span<const float> payload) {
    write_file_bytes(path, encode_model_file(type, meta, payload));
}

ModelFile load_model_file(const std::filesystem::path& path, const std::string& expected_type) {
    ModelFile file = decode_model_file(read_file_bytes(path));
    if (!expected_type.empty() && file.type != expected_type) {
        throw Error(ErrorCode::CorruptModel,
                    path.string() + " holds a '" + file.type + "' model, expected '" + expected_type + "'");
    }
    return file;
}

ModelFile peek_model_header(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return from_header(parse_header(bytes).header);
}

}  // namespace circa

namespace circa {

void pack_f64(std::vector<float>& out, std::span<const double> values) {
    for (double x : values) {
        const auto hi = static_cast<float>(x);
        const double r1 = x - static_cast<double>(hi);
        const auto mid = static_cast<float>(r1);
        out.push_back(hi);
        out.push_back(mid);
        out.push_back(static_cast<float>(r1 - static_cast<double>(mid)));
    }
}

std::vector<double> unpack_f64(std::span<const float> payload, std::size_t& pos, std::size_t count) {
    if (pos + 3 * count > payload.size()) throw Error(ErrorCode::CorruptModel, "model payload too short");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i, pos += 3) {
        out[i] = static_cast<double>(payload[pos]) + static_cast<double>(payload[pos + 1]) +
                 static_cast<double>(payload[pos + 2]);
    }
    return out;
}

}  // namespace circa
