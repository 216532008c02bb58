#pragma once

#include "circa/classes.hpp"
#include "circa/json.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace circa::pipeline {

inline constexpr int kManifestSchema = 1;

struct CaseEntry {
    std::string id;
    std::string dataset;
    std::optional<ClassLabel> label;  ///< absent for unlabeled cases
    std::string file;                 ///< relative paths resolve against the manifest directory
    std::optional<std::string> subtype;
    std::optional<std::array<double, 2>> coords;
    bool synthetic = false;

    Json to_json() const;
    static CaseEntry from_json(const Json& j);
};

struct DatasetManifest {
    std::vector<CaseEntry> cases;
    std::filesystem::path base_dir;

    /// Unique ids, non-empty id and dataset tag, subtype prefix agrees with
    /// the label. Throws InvalidArgument.
    void validate() const;

    const CaseEntry* find(std::string_view id) const;
    std::filesystem::path resolve(const CaseEntry& entry) const;
};

/// JSON lines: a header object {"manifest_schema": 1} then one case per line.
/// Blank lines are skipped. Throws CorruptStream on malformed lines.
DatasetManifest parse_manifest(std::string_view text);
std::string format_manifest(const DatasetManifest& manifest);

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace circa::pipeline
