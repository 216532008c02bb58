#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/training.hpp"

#include "circa/checksum.hpp"
#include "circa/error.hpp"
#include "circa/imaging/intensity.hpp"
#include "circa/imaging/patches.hpp"
#include "circa/imaging/resample.hpp"
#include "circa/io.hpp"
#include "circa/model_io.hpp"
#include "circa/models/decision.hpp"
#include "circa/pipeline/saliency.hpp"
#include "circa/radiomics/case_features.hpp"
#include "circa/radiomics/selection.hpp"
#include "circa/segmentation/postprocess.hpp"
#include "circa/segmentation/trisection.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <type_traits>

namespace circa::pipeline {
namespace {

const std::set<std::string_view> kRequiredArtifacts{"dense", "tree", "embedding_index", "gmm"};

constexpr int kModelSize = models::kModelInputSize;
constexpr int kMaxSrPasses = 4;

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

    template <typename F>
    auto run(const char* stage, F&& f) -> decltype(f()) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(stage, start);
            } else {
                auto value = f();
                record(stage, start);
                return value;
            }
        } catch (const Error& e) {
            throw e.with_stage(stage);
        }
    }

private:
    void record(const char* stage, std::chrono::steady_clock::time_point start) {
        const auto end = std::chrono::steady_clock::now();
        out_.push_back({stage, std::chrono::duration<double, std::milli>(end - start).count()});
    }

    std::vector<StageTiming>& out_;
};

[[noreturn]] void missing(const char* what, const std::vector<ArtifactStatus>& statuses) {
    std::string detail = "not configured";
    for (const auto& s : statuses)
        if (s.name == what && s.configured) detail = s.error.empty() ? "not loaded" : s.error;
    throw Error(ErrorCode::BackendUnavailable, std::string("model artifact '") + what + "' unavailable: " + detail);
}

template <typename T>
const T& need(const std::optional<T>& v, const char* what, const std::vector<ArtifactStatus>& statuses) {
    if (!v) missing(what, statuses);
    return *v;
}

models::ModelBackend& need_backend(const std::shared_ptr<models::ModelBackend>& b, models::BackendRole role) {
    if (!b)
        throw Error(ErrorCode::BackendUnavailable, std::string("no ") + std::string(models::to_string(role)) + " backend available");
    return *b;
}

std::shared_ptr<models::ModelBackend> try_backend(const std::optional<models::BackendSpec>& spec, models::BackendRole role,
                                                  std::vector<BackendStatus>& errors) {
    if (!spec) return nullptr;
    try {
        return models::make_backend(*spec);
    } catch (const Error& e) {
        BackendStatus s;
        s.role = role;
        s.configured = true;
        s.error = e.what();
        errors.push_back(s);
        return nullptr;
    }
}

}  // namespace

Json ArtifactStatus::to_json() const {
    Json j{{"name", name}, {"path", path}, {"configured", configured}, {"required", required}, {"loaded", loaded}};
    if (loaded) {
        j["type"] = type;
        j["format_version"] = format_version;
        j["checksum"] = checksum;
    }
    if (!error.empty()) j["error"] = error;
    return j;
}

Json BackendStatus::to_json() const {
    Json j{{"role", std::string(models::to_string(role))}, {"configured", configured}, {"required", required}, {"available", available}};
    if (descriptor) j["descriptor"] = descriptor->to_json();
    if (!error.empty()) j["error"] = error;
    return j;
}

models::Tensor to_tensor(const imaging::RasterImage& img) {
    models::Tensor t;
    t.shape = {1, 1, img.height(), img.width()};
    t.data.reserve(img.size());
    for (double v : img.pixels()) t.data.push_back(static_cast<float>(v));
    return t;
}

imaging::RasterImage from_tensor(const models::Tensor& t) {
    if (t.shape.size() != 4 || t.shape[0] != 1 || t.shape[1] != 1)
        throw Error(ErrorCode::ShapeMismatch, "expected a 1x1xHxW tensor, got " + models::shape_to_string(t.shape));
    std::vector<double> px(t.data.begin(), t.data.end());
    return imaging::RasterImage(static_cast<int>(t.shape[3]), static_cast<int>(t.shape[2]), std::move(px));
}

ClassProbabilities probabilities_from_tensor(const models::Tensor& t, const std::string& who) {
    if (t.data.size() != 3) throw Error(ErrorCode::InferenceFailure, who + ": expected 3 class probabilities");
    double sum = 0.0;
    for (float v : t.data) {
        if (!(v >= 0.0f)) throw Error(ErrorCode::InferenceFailure, who + ": negative or non-finite probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-3) throw Error(ErrorCode::InferenceFailure, who + ": probabilities do not sum to 1");
    ClassProbabilities p;
    for (std::size_t i = 0; i < 3; ++i) p.p[i] = static_cast<double>(t.data[i]) / sum;
    return p;
}

Engine::Engine(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
    segmentation_ = try_backend(config_.segmentation, models::BackendRole::Segmentation, backend_errors_);
    classifier_ = try_backend(config_.image_classifier, models::BackendRole::ImageClassifier, backend_errors_);
    super_resolution_ = try_backend(config_.super_resolution, models::BackendRole::SuperResolution, backend_errors_);
    features_ = try_backend(config_.feature_extractor, models::BackendRole::FeatureExtractor, backend_errors_);
    load_artifacts();
}

Engine::Engine(PipelineConfig config, std::shared_ptr<models::ModelBackend> segmentation,
               std::shared_ptr<models::ModelBackend> image_classifier,
               std::shared_ptr<models::ModelBackend> super_resolution,
               std::shared_ptr<models::ModelBackend> feature_extractor)
    : config_(std::move(config)),
      segmentation_(std::move(segmentation)),
      classifier_(std::move(image_classifier)),
      super_resolution_(std::move(super_resolution)),
      features_(std::move(feature_extractor)) {
    config_.validate();
    load_artifacts();
}

void Engine::load_artifacts() {
    quality_threshold_ = config_.quality_threshold;
    auto attempt = [this](const char* name, const std::filesystem::path& path, auto&& loader) {
        ArtifactStatus s;
        s.name = name;
        s.path = path.string();
        s.configured = !path.empty();
        s.required = kRequiredArtifacts.count(name) > 0;
        if (s.configured) {
            try {
                loader(path);
                s.loaded = true;
                if (path.extension() == ".cmf") {
                    const auto header = peek_model_header(path);
                    s.type = header.type;
                    s.format_version = header.format_version;
                    s.checksum = header.payload_sha256;
                } else {
                    s.type = "json";
                    s.format_version = 1;
                    s.checksum = sha256_file(path);
                }
            } catch (const Error& e) {
                s.error = e.what();
            } catch (const std::exception& e) {
                s.error = e.what();
            }
        }
        artifacts_.push_back(std::move(s));
    };
    const auto& m = config_.models;
    attempt("train_stats", m.train_stats, [this](const auto& p) { models_.train_stats = segmentation::load_train_stats(p); });
    attempt("radiomics_selection", m.radiomics_selection, [this](const auto& p) {
        Json doc;
        try {
            doc = Json::parse(read_file_text(p));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::CorruptModel, std::string("selection report: ") + e.what());
        }
        models_.radiomics_selection = radiomics::selection_report_from_json(doc).selected;
    });
    attempt("radiomics_scaler", m.radiomics_scaler, [this](const auto& p) { models_.radiomics_scaler = radiomics::load_scaler(p); });
    attempt("dense", m.dense, [this](const auto& p) { models_.dense = models::load_dense(p); });
    attempt("tree", m.tree, [this](const auto& p) { models_.tree = models::load_tree(p); });
    attempt("feature_scaler", m.feature_scaler, [this](const auto& p) { models_.feature_scaler = radiomics::load_scaler(p); });
    attempt("pca", m.pca, [this](const auto& p) { models_.pca = models::load_pca(p); });
    attempt("embedding_index", m.embedding_index, [this](const auto& p) { models_.embedding_index = models::load_embedding_index(p); });
    attempt("gmm", m.gmm, [this](const auto& p) { models_.gmm = models::load_gmm(p); });
    attempt("quality_report", config_.quality_report, [this](const auto& p) {
        Json doc;
        try {
            doc = Json::parse(read_file_text(p));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, std::string("quality report: ") + e.what());
        }
        if (!doc.contains("threshold") || !doc["threshold"].is_number())
            throw Error(ErrorCode::InvalidConfig, "quality report has no numeric threshold");
        quality_threshold_ = doc["threshold"].get<double>();
    });
}

std::vector<BackendStatus> Engine::backend_status() const {
    std::vector<BackendStatus> out;
    const std::array<std::pair<models::BackendRole, const std::shared_ptr<models::ModelBackend>*>, 4> roles{{
        {models::BackendRole::Segmentation, &segmentation_},
        {models::BackendRole::ImageClassifier, &classifier_},
        {models::BackendRole::SuperResolution, &super_resolution_},
        {models::BackendRole::FeatureExtractor, &features_},
    }};
    for (const auto& [role, backend] : roles) {
        BackendStatus s;
        s.role = role;
        for (const auto& e : backend_errors_)
            if (e.role == role) s = e;
        s.required = role != models::BackendRole::SuperResolution;
        if (*backend) {
            s.configured = true;
            s.available = true;
            s.descriptor = (*backend)->descriptor();
        }
        out.push_back(s);
    }
    return out;
}

bool Engine::healthy() const {
    for (const auto& b : backend_status())
        if ((b.configured || b.required) && !b.available) return false;
    for (const auto& a : artifacts_)
        if ((a.configured || a.required) && !a.loaded) return false;
    return true;
}

SegmentationOutcome Engine::segment_case(std::span<const std::uint8_t> bytes, imaging::ImageFormat hint) const {
    SegmentationOutcome out;
    auto& r = out.result;
    StageClock clock(r.timings);

    auto img = clock.run("decode", [&] {
        auto decoded = imaging::decode_image(bytes, hint);
        const auto fmt = imaging::sniff_format(bytes);
        r.input_format = std::string(imaging::to_string(fmt ? *fmt : hint));
        return decoded;
    });
    r.input_width = img.width();
    r.input_height = img.height();

    img = clock.run("standardize", [&] { return imaging::standardize_intensity(img, config_.low_quantile, config_.high_quantile); });
    if (config_.contrast) img = clock.run("contrast", [&] { return imaging::enhance_contrast(img, config_.clahe); });

    if (std::min(img.width(), img.height()) < config_.sr_trigger) {
        img = clock.run("super_resolution", [&] {
            auto current = img;
            if (super_resolution_) {
                const int scale = std::max(1, super_resolution_->descriptor().spatial_scale);
                for (int pass = 0; pass < kMaxSrPasses && std::min(current.width(), current.height()) < config_.sr_trigger; ++pass) {
                    auto grid = imaging::tile_patches(current, config_.sr_patch);
                    for (auto& patch : grid.patches) patch = from_tensor(models::run_inference(*super_resolution_, to_tensor(patch)));
                    current = imaging::assemble_patches(grid, scale);
                    imaging::clamp_unit(current);
                    if (scale == 1) break;
                }
                r.super_resolution = true;
            } else {
                const double f = static_cast<double>(config_.sr_trigger) / std::min(current.width(), current.height());
                const int w = static_cast<int>(std::lround(current.width() * f));
                const int h = static_cast<int>(std::lround(current.height() * f));
                current = imaging::resize(current, w, h, imaging::ResizeMode::Exact, imaging::ResampleKernel::Bicubic).image;
                imaging::clamp_unit(current);
                r.super_resolution_fallback = true;
            }
            return current;
        });
    }

    const auto fitted = clock.run("resize", [&] {
        return imaging::resize(img, kModelSize, kModelSize, imaging::ResizeMode::FitPad);
    });

    const auto prob = clock.run("segmentation", [&] {
        auto& seg = need_backend(segmentation_, models::BackendRole::Segmentation);
        return from_tensor(models::run_inference(seg, to_tensor(fitted.image)));
    });

    std::optional<segmentation::BinaryMask> mask = clock.run("postprocess", [&]() -> std::optional<segmentation::BinaryMask> {
        segmentation::PostprocessParams params;
        params.threshold = config_.segmentation_threshold;
        params.disc_radius = config_.disc_radius;
        try {
            return segmentation::postprocess_mask(prob, params);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoLungFound) throw;
            return std::nullopt;
        }
    });
    if (!mask) {
        r.rejection = Rejection{RejectionReason::NoLungFound, "no lung region found in the segmentation output", Json::object()};
        return out;
    }
    r.artifacts.mask = *mask;

    clock.run("quality", [&] {
        r.mask_metrics = segmentation::mask_metrics(*mask);
        r.quality = segmentation::quality_score(*r.mask_metrics);
    });

    clock.run("size_gate", [&] {
        const auto box = *mask->bbox();
        r.size_gate.evaluated = true;
        r.size_gate.min_dimension = config_.min_lung_dimension;
        r.size_gate.width = static_cast<int>(std::lround(box.width() / fitted.scale_x));
        r.size_gate.height = static_cast<int>(std::lround(box.height() / fitted.scale_y));
        r.size_gate.passed = r.size_gate.width >= config_.min_lung_dimension && r.size_gate.height >= config_.min_lung_dimension;
    });
    if (!r.size_gate.passed) {
        r.rejection = Rejection{RejectionReason::TooSmall,
                                "lung region " + std::to_string(r.size_gate.width) + "x" + std::to_string(r.size_gate.height) +
                                    " px is below the " + std::to_string(config_.min_lung_dimension) + " px minimum",
                                Json{{"width", r.size_gate.width},
                                     {"height", r.size_gate.height},
                                     {"min_dimension", config_.min_lung_dimension}}};
    }
    out.model_input = fitted.image;
    return out;
}

CaseFeatures Engine::extract_features(std::span<const std::uint8_t> bytes, imaging::ImageFormat hint) const {
    auto outcome = segment_case(bytes, hint);
    CaseFeatures cf;
    cf.result = std::move(outcome.result);
    auto& r = cf.result;
    if (r.rejection) return cf;
    StageClock clock(r.timings);

    clock.run("quality_gate", [&] {
        auto& g = r.quality_gate;
        g.evaluated = true;
        g.enabled = config_.quality_gate;
        g.score = r.quality->value;
        g.threshold = quality_threshold_;
        g.passed = !g.enabled || !(g.score < g.threshold);
    });
    if (!r.quality_gate.passed) {
        r.rejection = Rejection{RejectionReason::LowQuality, "segmentation quality score is below the acceptance threshold",
                                Json{{"score", r.quality_gate.score}, {"threshold", r.quality_gate.threshold}}};
        return cf;
    }

    auto roi = clock.run("roi", [&] {
        segmentation::RoiParams params;
        params.low_q = config_.roi_low_quantile;
        params.high_q = config_.roi_high_quantile;
        params.min_gap = config_.min_gap;
        params.size = kModelSize;
        return segmentation::build_roi(*outcome.model_input, *r.artifacts.mask,
                                       models_.train_stats ? &*models_.train_stats : nullptr, params);
    });
    const auto roi_tensor = to_tensor(roi.pixels);

    cf.image_probabilities = clock.run("image_classifier", [&] {
        auto& cls = need_backend(classifier_, models::BackendRole::ImageClassifier);
        return probabilities_from_tensor(models::run_inference(cls, roi_tensor), "image classifier");
    });

    auto features = clock.run("radiomics", [&] {
        return radiomics::extract_case_features(roi.intensity, segmentation::lung_trisection(roi.mask), config_.bin_width);
    });
    for (auto& w : features.warnings) r.warnings.push_back("radiomics " + w);
    cf.radiomics = std::move(features.values);

    cf.deep_features = clock.run("feature_extractor", [&] {
        auto& fx = need_backend(features_, models::BackendRole::FeatureExtractor);
        const auto out = models::run_inference(fx, roi_tensor);
        return std::vector<double>(out.data.begin(), out.data.end());
    });
    r.artifacts.roi = std::move(roi);
    return cf;
}

PipelineResult Engine::process_case(std::span<const std::uint8_t> bytes, imaging::ImageFormat hint) const {
    auto cf = extract_features(bytes, hint);
    PipelineResult r = std::move(cf.result);
    if (r.rejection) return r;
    StageClock clock(r.timings);
    const auto image_probs = *cf.image_probabilities;

    const auto radiomics_probs = clock.run("radiomics_classifier", [&] {
        const auto& dense = need(models_.dense, "dense", artifacts_);
        return radiomics_branch(dense, models_.radiomics_selection,
                                models_.radiomics_scaler ? &*models_.radiomics_scaler : nullptr, cf.radiomics);
    });

    clock.run("aggregation", [&] {
        const auto& tree = need(models_.tree, "tree", artifacts_);
        std::array<double, 6> six{};
        for (std::size_t i = 0; i < 3; ++i) {
            six[i] = image_probs.p[i];
            six[3 + i] = radiomics_probs.p[i];
        }
        r.image_branch = image_probs;
        r.radiomics_branch = radiomics_probs;
        r.probabilities = models::tree_predict(tree, six);
        r.decided = models::decide_class(*r.probabilities);
    });

    const auto point = clock.run("embedding", [&] {
        auto f = cf.deep_features;
        if (models_.feature_scaler) f = radiomics::apply_scaler(*models_.feature_scaler, f);
        if (models_.pca) f = models::pca_transform(*models_.pca, f);
        const auto& index = need(models_.embedding_index, "embedding_index", artifacts_);
        return models::knn_embed(f, index, config_.knn_k).point;
    });
    r.embedding = point;

    clock.run("subtype", [&] {
        const auto& gmm = need(models_.gmm, "gmm", artifacts_);
        r.subtype = models::gmm_predict_subtype(gmm, point, *r.decided);
    });

    if (config_.saliency) {
        clock.run("saliency", [&] {
            const auto map = occlusion_saliency(r.artifacts.roi->pixels, classifier_.get(), config_.saliency_patch,
                                                config_.saliency_stride, *r.decided);
            r.artifacts.saliency = map.display(r.artifacts.roi->pixels.width(), r.artifacts.roi->pixels.height());
        });
    }
    return r;
}

}  // namespace circa::pipeline
