#include "circa/service/service.hpp"

#include "circa/checksum.hpp"
#include "circa/imaging/codec.hpp"
#include "circa/version.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <cctype>

namespace circa::service {
namespace {

constexpr std::array<std::string_view, 3> kArtifactKinds{"mask", "roi", "saliency"};

const std::array<std::string_view, 5> kAcceptedTypes{"image/png", "image/jpeg", "application/dicom",
                                                    "application/octet-stream", ""};

std::string base_type(std::string_view content_type) {
    const auto semi = content_type.find(';');
    std::string t(content_type.substr(0, semi));
    while (!t.empty() && t.back() == ' ') t.pop_back();
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return t;
}

ApiResponse json_response(int status, const Json& body) { return {status, "application/json", canonical_dump(body)}; }

std::string case_link(const std::string& id) { return std::string(kApiPrefix) + "/cases/" + id; }

Json links_for(const CaseRecord& r) {
    Json links{{"case", case_link(r.id)}};
    for (const auto& [kind, key] : r.artifacts) links[kind] = case_link(r.id) + "/artifacts/" + kind;
    return links;
}

Json timings_json(const pipeline::PipelineResult& r) {
    Json t = Json::array();
    for (const auto& s : r.timings) t.push_back(Json{{"stage", s.stage}, {"ms", s.milliseconds}});
    return t;
}

std::vector<std::uint8_t> mask_png(const segmentation::BinaryMask& m) {
    return imaging::encode_png_1bit(m.width(), m.height(), m.bits());
}

bool constant_time_equal(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
    return diff == 0;
}

}  // namespace

ServiceConfig ServiceConfig::from_settings(const Json& settings, const std::filesystem::path& base_dir) {
    ServiceConfig c;
    try {
        const auto& s = settings.at("service");
        c.host = s.at("host").get<std::string>();
        c.port = s.at("port").get<int>();
        c.workers = s.at("workers").get<int>();
        c.max_upload_bytes = s.at("max_upload_bytes").get<std::size_t>();
        c.data_dir = s.at("data_dir").get<std::string>();
        c.tokens = s.at("tokens").get<std::vector<std::string>>();
        c.static_dir = s.at("static_dir").get<std::string>();
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("service settings: ") + e.what());
    }
    if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::InvalidConfig, "service.port must be in [0, 65535]");
    if (c.workers < 1) throw Error(ErrorCode::InvalidConfig, "service.workers must be >= 1");
    if (c.max_upload_bytes == 0) throw Error(ErrorCode::InvalidConfig, "service.max_upload_bytes must be > 0");
    for (const auto& t : c.tokens)
        if (t.empty()) throw Error(ErrorCode::InvalidConfig, "service.tokens must not contain empty tokens");
    if (!base_dir.empty()) {
        if (c.data_dir.is_relative()) c.data_dir = base_dir / c.data_dir;
        if (!c.static_dir.empty() && c.static_dir.is_relative()) c.static_dir = base_dir / c.static_dir;
    }
    return c;
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::UnsupportedFormat:
        case ErrorCode::CorruptStream:
        case ErrorCode::NonImageDicom:
            return 400;
        case ErrorCode::BackendUnavailable:
            return 503;
        default:
            return 500;
    }
}

ApiResponse api_error(int status, std::string_view code, std::string_view message, std::string_view stage) {
    return json_response(status, Json{{"error", {{"code", code}, {"message", message}, {"stage", stage}}}});
}

Service::Service(ServiceConfig config, std::shared_ptr<const pipeline::Engine> engine)
    : config_(std::move(config)), engine_(std::move(engine)), store_(config_.data_dir) {
    if (!engine_) throw Error(ErrorCode::InvalidArgument, "service needs an engine");
}

std::optional<std::string> Service::authenticate(std::string_view authorization) const {
    constexpr std::string_view scheme = "Bearer ";
    if (authorization.size() <= scheme.size() || authorization.substr(0, scheme.size()) != scheme) return std::nullopt;
    const auto token = authorization.substr(scheme.size());
    bool ok = false;
    for (const auto& t : config_.tokens) ok |= constant_time_equal(t, token);
    if (!ok) return std::nullopt;
    return "user:" + sha256_hex(token).substr(0, 12);
}

std::pair<ApiResponse, std::optional<CaseRecord>> Service::run_case(const Upload& upload, const std::string& submitter,
                                                                   std::optional<ClassLabel> label, std::string notes) {
    if (upload.bytes.size() > config_.max_upload_bytes) {
        return {api_error(413, "PayloadTooLarge", "upload exceeds " + std::to_string(config_.max_upload_bytes) + " bytes"), {}};
    }
    const auto type = base_type(upload.content_type);
    if (std::find(kAcceptedTypes.begin(), kAcceptedTypes.end(), type) == kAcceptedTypes.end()) {
        return {api_error(400, "UnsupportedFormat", "content type " + type + " is not accepted", "upload"), {}};
    }
    if (upload.bytes.empty()) return {api_error(400, "InvalidArgument", "empty image upload", "upload"), {}};
    auto hint = imaging::ImageFormat::Auto;
    if (!upload.format.empty()) {
        const auto parsed = imaging::parse_image_format(upload.format);
        if (!parsed) return {api_error(400, "InvalidArgument", "unknown format hint " + upload.format, "upload"), {}};
        hint = *parsed;
    } else if (type == "image/png") {
        hint = imaging::ImageFormat::Png;
    } else if (type == "image/jpeg") {
        hint = imaging::ImageFormat::Jpeg;
    } else if (type == "application/dicom") {
        hint = imaging::ImageFormat::Dicom;
    }

    pipeline::PipelineResult result;
    try {
        result = engine_->process_case(upload.bytes, hint);
    } catch (const Error& e) {
        return {api_error(http_status(e.code()), to_string(e.code()), e.what(), e.stage()), {}};
    } catch (const std::exception& e) {
        return {api_error(500, "Internal", e.what()), {}};
    }

    CaseRecord rec;
    rec.id = store_.new_case_id();
    rec.submitted_at = utc_timestamp();
    rec.image_sha256 = store_.put_blob(upload.bytes);
    rec.image_format = result.input_format;
    rec.submitter = submitter;
    rec.verified_label = label;
    rec.notes = std::move(notes);
    rec.result = result.to_json(true);
    const auto& a = result.artifacts;
    if (a.mask) rec.artifacts["mask"] = store_.put_blob(mask_png(*a.mask));
    if (a.roi) rec.artifacts["roi"] = store_.put_blob(imaging::encode_png(a.roi->intensity));
    if (a.saliency) rec.artifacts["saliency"] = store_.put_blob(imaging::encode_png(*a.saliency));
    store_.append(rec);

    Json body{{"case_id", rec.id},
              {"submitted_at", rec.submitted_at},
              {"result", result.to_json(false)},
              {"timings", timings_json(result)},
              {"links", links_for(rec)}};
    if (label) body["verified_label"] = std::string(to_string(*label));
    return {json_response(label ? 201 : 200, body), rec};
}

ApiResponse Service::predict(const Upload& upload) {
    return run_case(upload, std::string(kAnonymous), std::nullopt, {}).first;
}

ApiResponse Service::submit_verified(std::string_view authorization, const Upload& upload, std::string_view label,
                                     std::string_view notes) {
    const auto who = authenticate(authorization);
    if (!who) return api_error(401, "Unauthorized", "a valid bearer token is required");
    const auto parsed = parse_class_label(label);
    if (!parsed) {
        return api_error(400, "InvalidLabel", "label must be normal, pneumonia or covid, got '" + std::string(label) + "'",
                         "upload");
    }
    return run_case(upload, *who, parsed, std::string(notes)).first;
}

ApiResponse Service::get_case(const std::string& id) const {
    const auto json = store_.find_json(id);
    if (!json) return api_error(404, "NotFound", "unknown case " + id);
    return {200, "application/json", *json};
}

ApiResponse Service::get_artifact(const std::string& id, const std::string& kind) const {
    if (std::find(kArtifactKinds.begin(), kArtifactKinds.end(), kind) == kArtifactKinds.end()) {
        return api_error(404, "NotFound", "unknown artifact kind " + kind);
    }
    const auto rec = store_.find(id);
    if (!rec) return api_error(404, "NotFound", "unknown case " + id);
    const auto it = rec->artifacts.find(kind);
    if (it == rec->artifacts.end()) return api_error(404, "NotFound", "case " + id + " has no " + kind + " artifact");
    const auto blob = store_.get_blob(it->second);
    if (!blob) return api_error(500, "Io", "artifact blob missing from storage");
    return {200, "image/png", std::string(blob->begin(), blob->end())};
}

ApiResponse Service::health() const {
    Json backends = Json::array();
    Json artifacts = Json::array();
    Json degraded = Json::array();
    for (const auto& b : engine_->backend_status()) {
        backends.push_back(b.to_json());
        if ((b.configured || b.required) && !b.available) degraded.push_back(std::string(models::to_string(b.role)));
    }
    for (const auto& a : engine_->artifact_status()) {
        artifacts.push_back(a.to_json());
        if ((a.configured || a.required) && !a.loaded) degraded.push_back(a.name);
    }
    return json_response(200, Json{{"status", degraded.empty() ? "ok" : "degraded"},
                                   {"version", std::string(circa::version())},
                                   {"backends", backends},
                                   {"artifacts", artifacts},
                                   {"degraded", degraded},
                                   {"cases", store_.size()}});
}

ApiResponse Service::export_verified(std::string_view authorization) const {
    if (!authenticate(authorization)) return api_error(401, "Unauthorized", "a valid bearer token is required");
    return {200, "application/x-ndjson", pipeline::format_manifest(store_.verified_manifest())};
}

ApiResponse Service::subtype_model() const {
    const auto& gmm = engine_->models().gmm;
    if (!gmm) return api_error(503, "BackendUnavailable", "no subtype model loaded", "subtype");
    Json classes = Json::object();
    for (auto c : kAllClasses) {
        Json comps = Json::array();
        int k = 0;
        for (const auto& g : (*gmm)[c].components) {
            comps.push_back(Json{{"subtype", std::string(1, subtype_prefix(c)) + std::to_string(++k)},
                                 {"weight", g.weight},
                                 {"mean", g.mean},
                                 {"cov", g.cov}});
        }
        classes[std::string(to_string(c))] = comps;
    }
    return json_response(200, Json{{"classes", classes}});
}

// ---------------------------------------------------------------- HTTP

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    if (r.status == 401) res.set_header("WWW-Authenticate", "Bearer");
    res.set_content(r.body, r.content_type);
}

std::optional<Upload> read_upload(const httplib::Request& req, httplib::Response& res) {
    Upload up;
    if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) {
            send(res, api_error(400, "InvalidArgument", "multipart field 'image' is required", "upload"));
            return std::nullopt;
        }
        const auto file = req.get_file_value("image");
        up.bytes.assign(file.content.begin(), file.content.end());
        up.content_type = file.content_type;
        if (req.has_file("format")) up.format = req.get_file_value("format").content;
    } else {
        up.bytes.assign(req.body.begin(), req.body.end());
        up.content_type = req.get_header_value("Content-Type");
        if (req.has_param("format")) up.format = req.get_param_value("format");
    }
    return up;
}

std::string field(const httplib::Request& req, const std::string& name) {
    if (req.has_file(name)) return req.get_file_value(name).content;
    if (req.has_param(name)) return req.get_param_value(name);
    return {};
}

}  // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    const auto workers = static_cast<std::size_t>(service_.config().workers);
    s.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
    s.set_payload_max_length(service_.config().max_upload_bytes);
    const std::string api(kApiPrefix);

    s.Post(api + "/predict", [this](const httplib::Request& req, httplib::Response& res) {
        if (auto up = read_upload(req, res)) send(res, service_.predict(*up));
    });
    s.Post(api + "/verified", [this](const httplib::Request& req, httplib::Response& res) {
        const auto auth = req.get_header_value("Authorization");
        if (!service_.authenticate(auth)) return send(res, api_error(401, "Unauthorized", "a valid bearer token is required"));
        if (auto up = read_upload(req, res)) send(res, service_.submit_verified(auth, *up, field(req, "label"), field(req, "notes")));
    });
    s.Get(api + "/verified", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.export_verified(req.get_header_value("Authorization")));
    });
    s.Get(api + R"(/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.get_case(req.matches[1]));
    });
    s.Get(api + R"(/cases/([^/]+)/artifacts/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, service_.get_artifact(req.matches[1], req.matches[2]));
    });
    s.Get(api + "/health", [this](const httplib::Request&, httplib::Response& res) { send(res, service_.health()); });
    s.Get(api + "/models/subtypes", [this](const httplib::Request&, httplib::Response& res) {
        send(res, service_.subtype_model());
    });
    if (!service_.config().static_dir.empty()) {
        if (!s.set_mount_point("/", service_.config().static_dir.string())) {
            throw Error(ErrorCode::InvalidConfig, "static_dir is not a directory: " + service_.config().static_dir.string());
        }
    }
    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        switch (res.status) {
            case 413: send(res, api_error(413, "PayloadTooLarge", "request body exceeds the upload limit")); break;
            case 404: send(res, api_error(404, "NotFound", "no such resource")); break;
            case 400: send(res, api_error(400, "BadRequest", "malformed request")); break;
            default: send(res, api_error(res.status, "HttpError", "request failed")); break;
        }
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            send(res, api_error(http_status(e.code()), to_string(e.code()), e.what(), e.stage()));
        } catch (const std::exception& e) {
            send(res, api_error(500, "Internal", e.what()));
        }
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind() {
    const auto& c = service_.config();
    if (c.port == 0) {
        port_ = server_->bind_to_any_port(c.host);
    } else {
        port_ = server_->bind_to_port(c.host, c.port) ? c.port : -1;
    }
    if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + c.host + ":" + std::to_string(c.port));
}

int HttpServer::start() {
    bind();
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpServer::run() {
    bind();
    server_->listen_after_bind();
}

void HttpServer::stop() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace circa::service
