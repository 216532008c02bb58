#include "circa/pipeline/manifest.hpp"

#include "circa/error.hpp"
#include "circa/io.hpp"

#include <set>
#include <sstream>

namespace circa::pipeline {

Json CaseEntry::to_json() const {
    Json j{{"id", id}, {"dataset", dataset}, {"file", file}, {"synthetic", synthetic}};
    j["label"] = label ? Json(std::string(to_string(*label))) : Json(nullptr);
    if (subtype) j["subtype"] = *subtype;
    if (coords) j["coords"] = Json::array({(*coords)[0], (*coords)[1]});
    return j;
}

CaseEntry CaseEntry::from_json(const Json& j) {
    if (!j.is_object()) throw Error(ErrorCode::CorruptStream, "manifest entry is not an object");
    CaseEntry e;
    try {
        e.id = j.at("id").get<std::string>();
        e.dataset = j.value("dataset", std::string{});
        e.file = j.value("file", std::string{});
        e.synthetic = j.value("synthetic", false);
        if (j.contains("label") && !j["label"].is_null()) {
            const auto text = j["label"].get<std::string>();
            e.label = parse_class_label(text);
            if (!e.label) throw Error(ErrorCode::CorruptStream, "unknown label '" + text + "' for case " + e.id);
        }
        if (j.contains("subtype") && !j["subtype"].is_null()) e.subtype = j["subtype"].get<std::string>();
        if (j.contains("coords") && !j["coords"].is_null()) {
            const auto& c = j["coords"];
            if (!c.is_array() || c.size() != 2) throw Error(ErrorCode::CorruptStream, "coords must be [x, y]");
            e.coords = std::array<double, 2>{c[0].get<double>(), c[1].get<double>()};
        }
    } catch (const Json::exception& ex) {
        throw Error(ErrorCode::CorruptStream, std::string("manifest entry: ") + ex.what());
    }
    return e;
}

void DatasetManifest::validate() const {
    std::set<std::string_view> seen;
    for (const auto& c : cases) {
        if (c.id.empty()) throw Error(ErrorCode::InvalidArgument, "manifest case with empty id");
        if (c.dataset.empty()) throw Error(ErrorCode::InvalidArgument, "case " + c.id + " has no dataset tag");
        if (!seen.insert(c.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate case id " + c.id);
        if (c.subtype) {
            if (!c.label) throw Error(ErrorCode::InvalidArgument, "case " + c.id + " has a subtype but no label");
            const auto& s = *c.subtype;
            if (s.size() != 2 || s[0] != subtype_prefix(*c.label) || s[1] < '1' || s[1] > '3')
                throw Error(ErrorCode::InvalidArgument, "case " + c.id + " has subtype " + s + " inconsistent with its label");
        }
    }
}

const CaseEntry* DatasetManifest::find(std::string_view id) const {
    for (const auto& c : cases)
        if (c.id == id) return &c;
    return nullptr;
}

std::filesystem::path DatasetManifest::resolve(const CaseEntry& entry) const {
    std::filesystem::path p(entry.file);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

DatasetManifest parse_manifest(std::string_view text) {
    DatasetManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& ex) {
            throw Error(ErrorCode::CorruptStream, "manifest line " + std::to_string(line_no) + ": " + ex.what());
        }
        if (!header) {
            if (!j.is_object() || !j.contains("manifest_schema"))
                throw Error(ErrorCode::CorruptStream, "manifest header missing");
            if (j["manifest_schema"] != kManifestSchema)
                throw Error(ErrorCode::CorruptStream, "unsupported manifest schema " + j["manifest_schema"].dump());
            header = true;
            continue;
        }
        m.cases.push_back(CaseEntry::from_json(j));
    }
    if (!header) throw Error(ErrorCode::CorruptStream, "empty manifest");
    m.validate();
    return m;
}

std::string format_manifest(const DatasetManifest& manifest) {
    std::string out = Json{{"manifest_schema", kManifestSchema}}.dump() + "\n";
    for (const auto& c : manifest.cases) out += c.to_json().dump() + "\n";
    return out;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    auto m = parse_manifest(read_file_text(path));
    m.base_dir = path.parent_path();
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    manifest.validate();
    write_file_text(path, format_manifest(manifest));
}

}  // namespace circa::pipeline
