#include "circa/service/store.hpp"

#include "circa/checksum.hpp"
#include "circa/error.hpp"
#include "circa/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

namespace circa::service {
namespace fs = std::filesystem;

Json CaseRecord::to_json() const {
    Json j{{"id", id},
           {"submitted_at", submitted_at},
           {"image", {{"sha256", image_sha256}, {"format", image_format}}},
           {"submitter", submitter},
           {"verified_label", verified_label ? Json(std::string(circa::to_string(*verified_label))) : Json(nullptr)},
           {"notes", notes},
           {"result", result},
           {"artifacts", artifacts}};
    return j;
}

CaseRecord CaseRecord::from_json(const Json& j) {
    try {
        CaseRecord r;
        r.id = j.at("id").get<std::string>();
        r.submitted_at = j.at("submitted_at").get<std::string>();
        r.image_sha256 = j.at("image").at("sha256").get<std::string>();
        r.image_format = j.at("image").at("format").get<std::string>();
        r.submitter = j.at("submitter").get<std::string>();
        if (!j.at("verified_label").is_null()) {
            r.verified_label = parse_class_label(j.at("verified_label").get<std::string>());
            if (!r.verified_label) throw Error(ErrorCode::CorruptStream, "bad verified label in case record");
        }
        r.notes = j.at("notes").get<std::string>();
        r.result = j.at("result");
        r.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptStream, std::string("case record: ") + e.what());
    }
}

CaseStore::CaseStore(fs::path root) : root_(std::move(root)), id_engine_(std::random_device{}()) {
    std::error_code ec;
    fs::create_directories(root_ / "blobs", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + (root_ / "blobs").string() + ": " + ec.message());
    const auto index = root_ / "index.jsonl";
    if (!fs::exists(index)) return;
    std::istringstream in(read_file_text(index));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::CorruptStream, "case index: " + std::string(e.what()));
        }
        auto rec = CaseRecord::from_json(j);
        by_id_[rec.id] = records_.size();
        records_.push_back(std::move(rec));
        record_json_.push_back(line);
    }
}

fs::path CaseStore::blob_path(const std::string& key) const {
    return root_ / "blobs" / key.substr(0, 2) / key;
}

std::string CaseStore::put_blob(std::span<const std::uint8_t> bytes) {
    const auto key = sha256_hex(bytes);
    const auto path = blob_path(key);
    std::lock_guard lock(write_mutex_);
    if (fs::exists(path)) return key;
    fs::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    write_file_bytes(tmp, bytes);
    fs::rename(tmp, path);
    return key;
}

std::optional<std::vector<std::uint8_t>> CaseStore::get_blob(const std::string& key) const {
    if (key.size() != 64 || key.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
    const auto path = blob_path(key);
    if (!fs::exists(path)) return std::nullopt;
    return read_file_bytes(path);
}

void CaseStore::append(const CaseRecord& record) {
    if (record.verified_label && record.submitter == kAnonymous) {
        throw Error(ErrorCode::InvalidArgument, "anonymous submissions cannot carry a verified label");
    }
    const auto line = canonical_dump(record.to_json());
    std::lock_guard writer(write_mutex_);
    {
        std::shared_lock read(mutex_);
        if (by_id_.count(record.id)) throw Error(ErrorCode::InvalidArgument, "duplicate case id " + record.id);
    }
    {
        std::ofstream out(root_ / "index.jsonl", std::ios::app | std::ios::binary);
        out << line << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "cannot append to the case index");
    }
    std::unique_lock write(mutex_);
    by_id_[record.id] = records_.size();
    records_.push_back(record);
    record_json_.push_back(line);
}

std::optional<CaseRecord> CaseStore::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return records_[it->second];
}

std::optional<std::string> CaseStore::find_json(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return record_json_[it->second];
}

std::vector<CaseRecord> CaseStore::records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

std::size_t CaseStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

pipeline::DatasetManifest CaseStore::verified_manifest() const {
    pipeline::DatasetManifest m;
    m.base_dir = root_;
    for (const auto& r : records()) {
        if (!r.verified_label) continue;
        pipeline::CaseEntry e;
        e.id = r.id;
        e.dataset = "verified";
        e.label = r.verified_label;
        e.file = (fs::path("blobs") / r.image_sha256.substr(0, 2) / r.image_sha256).generic_string();
        m.cases.push_back(std::move(e));
    }
    return m;
}

std::string CaseStore::new_case_id() {
    std::uint64_t hi, lo;
    {
        std::lock_guard lock(id_mutex_);
        hi = id_engine_();
        lo = id_engine_();
    }
    hi = (hi & 0xffffffffffff0fffULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3fffffffffffffffULL) | 0x8000000000000000ULL;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%08x-%04x-%04x-%04x-%012llx", static_cast<unsigned>(hi >> 32),
                  static_cast<unsigned>((hi >> 16) & 0xffff), static_cast<unsigned>(hi & 0xffff),
                  static_cast<unsigned>(lo >> 48), static_cast<unsigned long long>(lo & 0xffffffffffffULL));
    return buf;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace circa::service
