#pragma once

#include "circa/classes.hpp"
#include "circa/json.hpp"
#include "circa/pipeline/manifest.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace circa::service {

inline constexpr std::string_view kAnonymous = "anonymous";

struct CaseRecord {
    std::string id;             ///< UUID v4
    std::string submitted_at;   ///< UTC, ISO 8601 with milliseconds
    std::string image_sha256;   ///< blob key of the uploaded bytes
    std::string image_format;
    std::string submitter;      ///< "anonymous" or "user:<token fingerprint>"
    std::optional<ClassLabel> verified_label;
    std::string notes;
    Json result;                                  ///< PipelineResult JSON with timings
    std::map<std::string, std::string> artifacts;  ///< kind -> blob key

    Json to_json() const;
    /// Throws CorruptStream.
    static CaseRecord from_json(const Json& j);
};

/// Content-addressed blobs under <root>/blobs plus an append-only JSON-lines
/// index. One writer at a time; readers see the records committed so far.
class CaseStore {
public:
    /// Creates the layout if needed and replays the index. Throws Io or
    /// CorruptStream.
    explicit CaseStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Stores the bytes (idempotent) and returns their sha256.
    std::string put_blob(std::span<const std::uint8_t> bytes);
    std::optional<std::vector<std::uint8_t>> get_blob(const std::string& key) const;
    std::filesystem::path blob_path(const std::string& key) const;

    /// Throws InvalidArgument for a duplicate id or a verified label on an
    /// anonymous record.
    void append(const CaseRecord& record);

    std::optional<CaseRecord> find(const std::string& id) const;
    /// Canonical JSON exactly as committed.
    std::optional<std::string> find_json(const std::string& id) const;
    std::vector<CaseRecord> records() const;
    std::size_t size() const;

    /// Verified records as a manifest (dataset "verified", files pointing at blobs).
    pipeline::DatasetManifest verified_manifest() const;

    std::string new_case_id();

private:
    std::filesystem::path root_;
    mutable std::shared_mutex mutex_;
    std::mutex write_mutex_;
    std::vector<CaseRecord> records_;
    std::vector<std::string> record_json_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::mutex id_mutex_;
    std::mt19937_64 id_engine_;
};

std::string utc_timestamp();

}  // namespace circa::service
