#pragma once

#include "circa/error.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/service/store.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace circa::service {

inline constexpr std::string_view kApiPrefix = "/api/v1";

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    int workers = 8;
    std::size_t max_upload_bytes = 64u << 20;
    std::filesystem::path data_dir = "circa-data";
    std::vector<std::string> tokens;
    std::filesystem::path static_dir;

    /// Reads the "service" section; relative paths resolve against base_dir.
    static ServiceConfig from_settings(const Json& settings, const std::filesystem::path& base_dir = {});
};

struct Upload {
    std::vector<std::uint8_t> bytes;
    std::string content_type;  ///< as declared by the client; may be empty
    std::string format;        ///< optional hint: png, jpeg or dicom
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// HTTP status for an error code: 400 for client input, 404, 503 for
/// unavailable backends, 500 otherwise.
int http_status(ErrorCode code);

/// Canonical ApiError body {"error": {"code", "message", "stage"}}.
ApiResponse api_error(int status, std::string_view code, std::string_view message, std::string_view stage = {});

/// Transport-independent request handlers.
class Service {
public:
    Service(ServiceConfig config, std::shared_ptr<const pipeline::Engine> engine);

    const ServiceConfig& config() const noexcept { return config_; }
    const pipeline::Engine& engine() const noexcept { return *engine_; }
    CaseStore& store() noexcept { return store_; }

    ApiResponse predict(const Upload& upload);
    ApiResponse submit_verified(std::string_view authorization, const Upload& upload, std::string_view label,
                                std::string_view notes);
    ApiResponse get_case(const std::string& id) const;
    ApiResponse get_artifact(const std::string& id, const std::string& kind) const;
    ApiResponse health() const;
    /// Verified records as a JSON-lines manifest; needs a token.
    ApiResponse export_verified(std::string_view authorization) const;
    /// Per-class mixture components for plotting subtypes.
    ApiResponse subtype_model() const;

    /// Token fingerprint for a valid "Bearer <token>" header.
    std::optional<std::string> authenticate(std::string_view authorization) const;

private:
    std::pair<ApiResponse, std::optional<CaseRecord>> run_case(const Upload& upload, const std::string& submitter,
                                                               std::optional<ClassLabel> label, std::string notes);

    ServiceConfig config_;
    std::shared_ptr<const pipeline::Engine> engine_;
    CaseStore store_;
};

/// httplib front end; serves the static bundle at / when configured.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and serves on a background
    /// thread. Returns the bound port. Throws Io.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    int port() const noexcept { return port_; }

private:
    void bind();

    Service& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

}  // namespace circa::service
