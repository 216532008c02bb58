#include "test_support.hpp"

#include "circa/checksum.hpp"
#include "circa/imaging/codec.hpp"
#include "circa/io.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/service/service.hpp"

#include <httplib.h>

#include <chrono>
#include <regex>
#include <thread>

using namespace circa;
using namespace circa::service;

namespace {

std::filesystem::path fixtures() { return test::source_dir() / "fixtures"; }

pipeline::PipelineConfig mock_config(const Json& overrides = Json::object()) {
    return pipeline::load_pipeline_config(fixtures() / "mock.yaml", pipeline::map_environment({}), overrides);
}

std::string fixture_bytes() {
    const auto b = read_file_bytes(fixtures() / "fixture.png");
    return {b.begin(), b.end()};
}

std::string golden() {
    auto g = read_file_text(fixtures() / "fixture_result.json");
    if (!g.empty() && g.back() == '\n') g.pop_back();
    return g;
}

std::string black_png() {
    const auto b = imaging::encode_png(imaging::RasterImage(600, 600, 0.0));
    return {b.begin(), b.end()};
}

/// Service on an ephemeral port with its own data directory.
struct Harness {
    explicit Harness(const std::string& name, ServiceConfig cfg = {},
                     std::shared_ptr<const pipeline::Engine> engine = nullptr) {
        cfg.data_dir = test::scratch_dir(name);
        cfg.port = 0;
        if (cfg.tokens.empty()) cfg.tokens = {"secret-token"};
        if (!engine) engine = std::make_shared<const pipeline::Engine>(mock_config());
        service = std::make_unique<Service>(cfg, engine);
        server = std::make_unique<HttpServer>(*service);
        port = server->start();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }

    httplib::Result upload(const std::string& path, const std::string& bytes, const std::string& type,
                           httplib::Headers headers = {}, httplib::MultipartFormDataItems extra = {}) const {
        extra.push_back({"image", bytes, "upload.bin", type});
        return client().Post(path, headers, extra);
    }

    std::unique_ptr<Service> service;
    std::unique_ptr<HttpServer> server;
    int port = 0;
};

Json body(const httplib::Result& r) { return Json::parse(r->body); }

const httplib::Headers kAuth{{"Authorization", "Bearer secret-token"}};

}  // namespace

TEST(Service, PredictReturnsGoldenResult) {
    Harness h("svc_predict");
    const auto r = h.upload("/api/v1/predict", fixture_bytes(), "image/png");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Content-Type"), "application/json");
    const auto j = body(r);
    EXPECT_EQ(canonical_dump(j["result"]), golden());
    EXPECT_TRUE(std::regex_match(j["case_id"].get<std::string>(),
                                 std::regex("[0-9a-f]{8}-[0-9a-f]{4}-4[0-9a-f]{3}-[89ab][0-9a-f]{3}-[0-9a-f]{12}")));
    const auto id = j["case_id"].get<std::string>();
    EXPECT_EQ(j["links"]["mask"], "/api/v1/cases/" + id + "/artifacts/mask");
    EXPECT_EQ(j["links"]["roi"], "/api/v1/cases/" + id + "/artifacts/roi");
    EXPECT_FALSE(j["links"].contains("saliency"));
    EXPECT_FALSE(j["timings"].empty());
    EXPECT_EQ(r->body, canonical_dump(j));

    const auto again = body(h.upload("/api/v1/predict", fixture_bytes(), "image/png"));
    EXPECT_EQ(canonical_dump(again["result"]), canonical_dump(j["result"]));
    EXPECT_NE(again["case_id"], j["case_id"]);
}

TEST(Service, RawBodyUploadIsAccepted) {
    Harness h("svc_raw");
    const auto r = h.client().Post("/api/v1/predict", fixture_bytes(), "image/png");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(canonical_dump(body(r)["result"]), golden());
}

TEST(Service, BadUploadsAre400) {
    Harness h("svc_400");
    const auto text = h.upload("/api/v1/predict", "just some text", "text/plain");
    ASSERT_TRUE(text);
    EXPECT_EQ(text->status, 400);
    EXPECT_EQ(body(text)["error"]["code"], "UnsupportedFormat");

    const auto garbage = h.upload("/api/v1/predict", "just some text", "application/octet-stream");
    EXPECT_EQ(garbage->status, 400);
    EXPECT_EQ(body(garbage)["error"]["code"], "UnsupportedFormat");
    EXPECT_EQ(body(garbage)["error"]["stage"], "decode");

    auto png = fixture_bytes();
    png.resize(png.size() / 2);
    const auto truncated = h.upload("/api/v1/predict", png, "image/png");
    EXPECT_EQ(truncated->status, 400);
    EXPECT_EQ(body(truncated)["error"]["code"], "CorruptStream");

    const auto missing = h.client().Post("/api/v1/predict", httplib::MultipartFormDataItems{{"other", "x", "", ""}});
    EXPECT_EQ(missing->status, 400);
    EXPECT_EQ(h.service->store().size(), 0u);
}

TEST(Service, RejectionIsBusinessOutcome) {
    Harness h("svc_reject");
    const auto r = h.upload("/api/v1/predict", black_png(), "image/png");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto j = body(r);
    EXPECT_EQ(j["result"]["status"], "rejected");
    EXPECT_EQ(j["result"]["rejection"]["reason"], "NoLungFound");
    EXPECT_FALSE(j["result"].contains("classification"));
    EXPECT_EQ(h.service->engine().classifier_backend()->calls(), 0u);
}

TEST(Service, OversizeIs413) {
    ServiceConfig cfg;
    cfg.max_upload_bytes = 4096;
    Harness h("svc_413", cfg);
    const auto r = h.upload("/api/v1/predict", fixture_bytes(), "image/png");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 413);
    EXPECT_EQ(body(r)["error"]["code"], "PayloadTooLarge");
    Upload up{std::vector<std::uint8_t>(5000, 0), "image/png", ""};
    EXPECT_EQ(h.service->predict(up).status, 413);
}

TEST(Service, VerifiedSubmissionFlow) {
    Harness h("svc_verified");
    httplib::MultipartFormDataItems covid{{"label", "covid", "", ""}, {"notes", "PCR confirmed", "", ""}};

    const auto none = h.upload("/api/v1/verified", fixture_bytes(), "image/png", {}, covid);
    ASSERT_TRUE(none);
    EXPECT_EQ(none->status, 401);
    EXPECT_EQ(none->get_header_value("WWW-Authenticate"), "Bearer");
    EXPECT_EQ(body(none)["error"]["code"], "Unauthorized");
    const auto wrong = h.upload("/api/v1/verified", fixture_bytes(), "image/png", {{"Authorization", "Bearer nope"}}, covid);
    EXPECT_EQ(wrong->status, 401);

    const auto flu = h.upload("/api/v1/verified", fixture_bytes(), "image/png", kAuth, {{"label", "influenza", "", ""}});
    EXPECT_EQ(flu->status, 400);
    EXPECT_EQ(body(flu)["error"]["code"], "InvalidLabel");
    EXPECT_EQ(h.service->store().size(), 0u);

    const auto ok = h.upload("/api/v1/verified", fixture_bytes(), "image/png", kAuth, covid);
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 201);
    const auto id = body(ok)["case_id"].get<std::string>();
    EXPECT_EQ(canonical_dump(body(ok)["result"]), golden());

    const auto record = body(h.client().Get("/api/v1/cases/" + id));
    EXPECT_EQ(record["verified_label"], "covid");
    EXPECT_EQ(record["notes"], "PCR confirmed");
    EXPECT_TRUE(record["submitter"].get<std::string>().starts_with("user:"));

    EXPECT_EQ(h.client().Get("/api/v1/verified")->status, 401);
    const auto exported = h.client().Get("/api/v1/verified", kAuth);
    ASSERT_EQ(exported->status, 200);
    auto manifest = pipeline::parse_manifest(exported->body);
    ASSERT_EQ(manifest.cases.size(), 1u);
    EXPECT_EQ(manifest.cases[0].id, id);
    EXPECT_EQ(manifest.cases[0].label, ClassLabel::Covid);
    manifest.base_dir = h.service->store().root();
    EXPECT_EQ(read_file_bytes(manifest.resolve(manifest.cases[0])), read_file_bytes(fixtures() / "fixture.png"));
}

TEST(Service, CaseRetrievalIsStable) {
    Harness h("svc_get");
    const auto id = body(h.upload("/api/v1/predict", fixture_bytes(), "image/png"))["case_id"].get<std::string>();
    const auto a = h.client().Get("/api/v1/cases/" + id);
    const auto b = h.client().Get("/api/v1/cases/" + id);
    ASSERT_EQ(a->status, 200);
    EXPECT_EQ(a->body, b->body);
    const auto rec = Json::parse(a->body);
    EXPECT_EQ(rec["submitter"], "anonymous");
    EXPECT_TRUE(rec["verified_label"].is_null());
    EXPECT_EQ(rec["image"]["sha256"], sha256_file(fixtures() / "fixture.png"));

    EXPECT_EQ(h.client().Get("/api/v1/cases/not-a-case")->status, 404);
    EXPECT_EQ(body(h.client().Get("/api/v1/cases/not-a-case"))["error"]["code"], "NotFound");
    EXPECT_EQ(h.client().Get("/api/v1/cases/not-a-case/artifacts/mask")->status, 404);
    EXPECT_EQ(h.client().Get("/api/v1/cases/" + id + "/artifacts/saliency")->status, 404);
    EXPECT_EQ(h.client().Get("/api/v1/cases/" + id + "/artifacts/xray")->status, 404);
    EXPECT_EQ(h.client().Get("/api/v1/nowhere")->status, 404);

    // A new service over the same directory replays the index.
    Service reopened(h.service->config(), std::make_shared<const pipeline::Engine>(mock_config()));
    EXPECT_EQ(reopened.get_case(id).body, a->body);
}

TEST(Service, MaskArtifactRoundTripsExactly) {
    Harness h("svc_mask");
    const auto id = body(h.upload("/api/v1/predict", fixture_bytes(), "image/png"))["case_id"].get<std::string>();
    const auto r = h.client().Get("/api/v1/cases/" + id + "/artifacts/mask");
    ASSERT_EQ(r->status, 200);
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    const std::vector<std::uint8_t> png(r->body.begin(), r->body.end());
    const auto decoded = imaging::decode_image(png);

    const auto expected = h.service->engine().process_case(read_file_bytes(fixtures() / "fixture.png"));
    const auto& mask = *expected.artifacts.mask;
    ASSERT_EQ(decoded.width(), mask.width());
    ASSERT_EQ(decoded.height(), mask.height());
    std::vector<std::uint8_t> bits;
    for (int y = 0; y < decoded.height(); ++y)
        for (int x = 0; x < decoded.width(); ++x) bits.push_back(decoded.at(x, y) > 0.5 ? 1 : 0);
    EXPECT_EQ(segmentation::BinaryMask(mask.width(), mask.height(), bits), mask);

    const auto again = h.client().Get("/api/v1/cases/" + id + "/artifacts/mask");
    EXPECT_EQ(again->body, r->body);
    EXPECT_EQ(h.client().Get("/api/v1/cases/" + id + "/artifacts/roi")->status, 200);
}

TEST(Service, HealthReportsBackendsAndChecksums) {
    Harness h("svc_health");
    const auto r = h.client().Get("/api/v1/health");
    ASSERT_EQ(r->status, 200);
    const auto j = body(r);
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["backends"].size(), 4u);
    EXPECT_TRUE(j["degraded"].empty());
    EXPECT_FALSE(j["version"].get<std::string>().empty());
    int checked = 0;
    for (const auto& a : j["artifacts"]) {
        if (!a["loaded"].get<bool>()) continue;
        const std::filesystem::path path = a["path"].get<std::string>();
        const auto bytes = read_file_bytes(path);
        std::string expected;
        if (path.extension() == ".cmf") {
            const std::uint32_t len = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | static_cast<std::uint32_t>(bytes[11]) << 24;
            expected = sha256_hex(std::span(bytes).subspan(12 + len));
        } else {
            expected = sha256_hex(bytes);
        }
        EXPECT_EQ(a["checksum"], expected) << path;
        ++checked;
    }
    EXPECT_EQ(checked, 10);

    const auto sub = h.client().Get("/api/v1/models/subtypes");
    ASSERT_EQ(sub->status, 200);
    EXPECT_EQ(body(sub)["classes"]["covid"].size(), 3u);
}

TEST(Service, MissingClassifierIsDegraded) {
    auto engine = std::make_shared<const pipeline::Engine>(mock_config(
        Json{{"backends", {{"image_classifier", {{"provider", "onnx"}, {"path", "/nonexistent/classifier.onnx"}}}}}}));
    Harness h("svc_degraded", {}, engine);
    const auto j = body(h.client().Get("/api/v1/health"));
    EXPECT_EQ(j["status"], "degraded");
    EXPECT_EQ(j["degraded"], Json::array({"image_classifier"}));
    const auto r = h.upload("/api/v1/predict", fixture_bytes(), "image/png");
    EXPECT_EQ(r->status, 503);
    EXPECT_EQ(body(r)["error"]["code"], "BackendUnavailable");
    EXPECT_EQ(body(r)["error"]["stage"], "image_classifier");
}

TEST(Service, ServesStaticBundle) {
    const auto dir = test::scratch_dir("svc_static_bundle");
    write_file_text(dir / "index.html", "<!doctype html><title>circa</title>");
    ServiceConfig cfg;
    cfg.static_dir = dir;
    Harness h("svc_static", cfg);
    const auto r = h.client().Get("/index.html");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(r->body, "<!doctype html><title>circa</title>");
}

namespace {

/// Segmentation stub that sleeps and records how many calls overlap.
class SlowSegmentation : public models::ModelBackend {
public:
    SlowSegmentation() : inner_(models::make_mock_segmentation()) {}
    const models::BackendDescriptor& descriptor() const override { return inner_->descriptor(); }
    int max_active() const { return max_active_.load(); }

protected:
    models::Tensor run(const models::Tensor& input) override {
        const int now = ++active_;
        int seen = max_active_.load();
        while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(150));
        --active_;
        return models::run_inference(*inner_, input);
    }

private:
    std::unique_ptr<models::ModelBackend> inner_;
    std::atomic<int> active_{0};
    std::atomic<int> max_active_{0};
};

}  // namespace

TEST(Service, HandlersRunConcurrently) {
    auto seg = std::make_shared<SlowSegmentation>();
    auto engine = std::make_shared<const pipeline::Engine>(mock_config(), seg, models::make_mock_classifier(), nullptr,
                                                           models::make_mock_feature_extractor());
    ServiceConfig cfg;
    cfg.workers = 8;
    Harness h("svc_concurrent", cfg, engine);
    const auto img = black_png();
    std::vector<int> status(8, 0);
    {
        std::vector<std::jthread> pool;
        for (int i = 0; i < 8; ++i)
            pool.emplace_back([&, i] { status[static_cast<std::size_t>(i)] = h.upload("/api/v1/predict", img, "image/png")->status; });
    }
    for (int s : status) EXPECT_EQ(s, 200);
    EXPECT_GE(seg->max_active(), 4);
    EXPECT_EQ(h.service->store().size(), 8u);
}

TEST(Service, ConfigFromSettings) {
    auto s = pipeline::load_settings(std::nullopt, pipeline::map_environment({{"CIRCA_SERVICE_TOKENS", "a,b"},
                                                                             {"CIRCA_SERVICE_WORKERS", "3"}}));
    const auto cfg = ServiceConfig::from_settings(s, "/srv");
    EXPECT_EQ(cfg.workers, 3);
    EXPECT_EQ(cfg.tokens, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(cfg.max_upload_bytes, 64u << 20);
    EXPECT_EQ(cfg.data_dir, std::filesystem::path("/srv/circa-data"));
    s["service"]["workers"] = 0;
    EXPECT_CIRCA_ERROR(ServiceConfig::from_settings(s), ErrorCode::InvalidConfig);
}
