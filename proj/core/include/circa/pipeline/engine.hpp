#pragma once

#include "circa/imaging/codec.hpp"
#include "circa/models/backend.hpp"
#include "circa/models/dense.hpp"
#include "circa/models/gmm.hpp"
#include "circa/models/knn_embed.hpp"
#include "circa/models/pca.hpp"
#include "circa/models/tree.hpp"
#include "circa/pipeline/config.hpp"
#include "circa/pipeline/result.hpp"
#include "circa/radiomics/scaler.hpp"
#include "circa/segmentation/roi.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace circa::pipeline {

/// Load state of one model artifact, reported by health checks.
struct ArtifactStatus {
    std::string name;
    std::string path;
    bool configured = false;
    bool required = false;  ///< process_case cannot finish without it
    bool loaded = false;
    std::string type;
    int format_version = 0;
    std::string checksum;  ///< payload sha256 stored in the container header
    std::string error;

    Json to_json() const;
};

struct BackendStatus {
    models::BackendRole role = models::BackendRole::Segmentation;
    bool configured = false;
    bool required = false;  ///< every role but super-resolution
    bool available = false;
    std::optional<models::BackendDescriptor> descriptor;
    std::string error;

    Json to_json() const;
};

/// Everything process_case needs. Loaded models are immutable, so one engine
/// serves concurrent cases.
struct LoadedModels {
    std::optional<segmentation::TrainStats> train_stats;
    std::vector<std::size_t> radiomics_selection;
    std::optional<radiomics::FeatureScaler> radiomics_scaler;
    std::optional<models::DenseNetParams> dense;
    std::optional<models::DecisionTreeModel> tree;
    std::optional<radiomics::FeatureScaler> feature_scaler;
    std::optional<models::PcaModel> pca;
    std::optional<models::EmbeddingIndex> embedding_index;
    std::optional<models::GmmModel2D> gmm;
};

/// Result of the stages shared by prediction and corpus cleaning: decode
/// through the size and quality measurements.
struct SegmentationOutcome {
    PipelineResult result;
    std::optional<imaging::RasterImage> model_input;  ///< 512 x 512 contrast-enhanced image
};

/// Model-independent per-case inputs of the trainable stages.
struct CaseFeatures {
    PipelineResult result;                  ///< gates, mask, ROI and timings so far
    std::vector<double> radiomics;          ///< 261 values, catalog order
    std::optional<ClassProbabilities> image_probabilities;
    std::vector<double> deep_features;      ///< raw feature-extractor output

    bool accepted() const noexcept { return result.accepted(); }
};

class Engine {
public:
    /// Creates backends and loads artifacts. Missing or broken pieces are
    /// recorded as degraded status; they only fail the cases that need them.
    explicit Engine(PipelineConfig config);

    /// Uses the given backends instead of building them from the config.
    Engine(PipelineConfig config, std::shared_ptr<models::ModelBackend> segmentation,
           std::shared_ptr<models::ModelBackend> image_classifier,
           std::shared_ptr<models::ModelBackend> super_resolution,
           std::shared_ptr<models::ModelBackend> feature_extractor);

    const PipelineConfig& config() const noexcept { return config_; }
    const LoadedModels& models() const noexcept { return models_; }
    double quality_threshold() const noexcept { return quality_threshold_; }

    models::ModelBackend* segmentation_backend() const noexcept { return segmentation_.get(); }
    models::ModelBackend* classifier_backend() const noexcept { return classifier_.get(); }
    models::ModelBackend* super_resolution_backend() const noexcept { return super_resolution_.get(); }
    models::ModelBackend* feature_backend() const noexcept { return features_.get(); }

    std::vector<BackendStatus> backend_status() const;
    const std::vector<ArtifactStatus>& artifact_status() const noexcept { return artifacts_; }
    /// True when every configured or required backend and artifact is usable.
    bool healthy() const;

    /// Full single-case flow. Gate rejections come back as a result with
    /// `rejection` set; other failures throw circa::Error tagged with the stage.
    PipelineResult process_case(std::span<const std::uint8_t> image_bytes,
                                imaging::ImageFormat hint = imaging::ImageFormat::Auto) const;

    /// Decode, preprocess, segment, post-process and measure the mask. The
    /// size gate is applied; the quality gate is not.
    SegmentationOutcome segment_case(std::span<const std::uint8_t> image_bytes,
                                     imaging::ImageFormat hint = imaging::ImageFormat::Auto) const;

    /// Runs through both gates, the ROI, the image classifier, radiomics and
    /// the feature extractor; no trained artifact is needed except the
    /// optional train statistics. Rejections return early with empty features.
    CaseFeatures extract_features(std::span<const std::uint8_t> image_bytes,
                                  imaging::ImageFormat hint = imaging::ImageFormat::Auto) const;

private:
    void load_artifacts();

    PipelineConfig config_;
    LoadedModels models_;
    std::vector<ArtifactStatus> artifacts_;
    std::vector<BackendStatus> backend_errors_;
    double quality_threshold_ = 0.0;
    std::shared_ptr<models::ModelBackend> segmentation_;
    std::shared_ptr<models::ModelBackend> classifier_;
    std::shared_ptr<models::ModelBackend> super_resolution_;
    std::shared_ptr<models::ModelBackend> features_;
};

/// ROI-frame raster to a 1 x 1 x H x W tensor.
models::Tensor to_tensor(const imaging::RasterImage& img);
imaging::RasterImage from_tensor(const models::Tensor& t);
ClassProbabilities probabilities_from_tensor(const models::Tensor& t, const std::string& who);

}  // namespace circa::pipeline
