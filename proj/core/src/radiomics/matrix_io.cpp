#include "circa/radiomics/matrix_io.hpp"

#include "circa/checksum.hpp"
#include "circa/error.hpp"
#include "circa/io.hpp"
#include "circa/json.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace circa::radiomics {
namespace {

constexpr char kColumnMagic[8] = {'C', 'I', 'R', 'C', 'A', 'C', 'S', '1'};

void check_shape(const FeatureMatrix& m) {
    if (m.ids.size() != m.rows.size()) throw Error(ErrorCode::ShapeMismatch, "id and row counts differ");
    for (const auto& r : m.rows) {
        if (r.size() != m.columns.size()) throw Error(ErrorCode::ShapeMismatch, "row width differs from column count");
    }
}

void check_cell(const std::string& s) {
    if (s.find_first_of(",\"\r\n") != std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "CSV cell contains a delimiter: " + s);
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
    check_shape(m);
    std::string out = "id";
    for (const auto& c : m.columns) {
        check_cell(c);
        out += ',' + c;
    }
    out += '\n';
    char buf[32];
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        check_cell(m.ids[r]);
        out += m.ids[r];
        for (double v : m.rows[r]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += ',';
            out += buf;
        }
        out += '\n';
    }
    write_file_text(path, out);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file_text(path));
    std::string line;
    FeatureMatrix m;
    if (!std::getline(in, line)) throw Error(ErrorCode::CorruptStream, "empty feature CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_csv(line);
    if (header.empty() || header.front() != "id") throw Error(ErrorCode::CorruptStream, "feature CSV must start with an id column");
    m.columns.assign(header.begin() + 1, header.end());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::CorruptStream, "feature CSV line " + std::to_string(line_no) + " has wrong width");
        }
        m.ids.push_back(cells.front());
        std::vector<double> row;
        row.reserve(m.columns.size());
        for (std::size_t i = 1; i < cells.size(); ++i) {
            char* end = nullptr;
            const double v = std::strtod(cells[i].c_str(), &end);
            if (cells[i].empty() || *end != '\0') {
                throw Error(ErrorCode::CorruptStream, "bad number on feature CSV line " + std::to_string(line_no));
            }
            row.push_back(v);
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

void write_feature_columns(const std::filesystem::path& path, const FeatureMatrix& m) {
    check_shape(m);
    std::vector<std::uint8_t> body;
    body.reserve(m.rows.size() * m.columns.size() * 8);
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        for (const auto& r : m.rows) {
            std::uint64_t bits = 0;
            std::memcpy(&bits, &r[c], 8);
            for (int b = 0; b < 8; ++b) body.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
        }
    }
    const Json schema{{"columns", m.columns}, {"ids", m.ids},           {"rows", m.rows.size()},
                      {"dtype", "float64"},   {"layout", "column_major"}, {"sha256", sha256_hex(body)}};
    const std::string text = canonical_dump(schema);
    std::vector<std::uint8_t> out(kColumnMagic, kColumnMagic + 8);
    const auto len = static_cast<std::uint32_t>(text.size());
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), body.begin(), body.end());
    write_file_bytes(path, out);
}

FeatureMatrix read_feature_columns(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kColumnMagic, 8) != 0) {
        throw Error(ErrorCode::CorruptStream, "not a feature column store: " + path.string());
    }
    std::uint32_t len = 0;
    for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(bytes[8 + static_cast<std::size_t>(b)]) << (8 * b);
    if (bytes.size() < 12 + static_cast<std::size_t>(len)) throw Error(ErrorCode::CorruptStream, "truncated column store header");
    FeatureMatrix m;
    std::span<const std::uint8_t> body;
    try {
        const Json schema = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + len);
        m.columns = schema.at("columns").get<std::vector<std::string>>();
        m.ids = schema.at("ids").get<std::vector<std::string>>();
        if (schema.at("rows").get<std::size_t>() != m.ids.size() || schema.at("dtype") != "float64" ||
            schema.at("layout") != "column_major") {
            throw Error(ErrorCode::CorruptStream, "unsupported column store schema");
        }
        body = std::span<const std::uint8_t>(bytes).subspan(12 + len);
        if (body.size() != m.ids.size() * m.columns.size() * 8) throw Error(ErrorCode::CorruptStream, "column store size mismatch");
        if (sha256_hex(body) != schema.at("sha256").get<std::string>()) {
            throw Error(ErrorCode::CorruptStream, "column store checksum mismatch");
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptStream, std::string("malformed column store schema: ") + e.what());
    }
    m.rows.assign(m.ids.size(), std::vector<double>(m.columns.size()));
    std::size_t pos = 0;
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
        for (auto& r : m.rows) {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(body[pos++]) << (8 * b);
            std::memcpy(&r[c], &bits, 8);
        }
    }
    return m;
}

FeatureMatrix select_columns(const FeatureMatrix& m, const std::vector<std::size_t>& columns) {
    FeatureMatrix out;
    out.ids = m.ids;
    for (std::size_t c : columns) {
        if (c >= m.columns.size()) throw Error(ErrorCode::DimensionMismatch, "column index out of range");
        out.columns.push_back(m.columns[c]);
    }
    for (const auto& r : m.rows) {
        std::vector<double> row;
        row.reserve(columns.size());
        for (std::size_t c : columns) row.push_back(r[c]);
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace circa::radiomics
