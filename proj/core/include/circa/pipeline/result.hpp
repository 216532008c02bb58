#pragma once

#include "circa/classes.hpp"
#include "circa/imaging/raster.hpp"
#include "circa/json.hpp"
#include "circa/models/gmm.hpp"
#include "circa/segmentation/mask.hpp"
#include "circa/segmentation/quality.hpp"
#include "circa/segmentation/roi.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace circa::pipeline {

enum class RejectionReason { NoLungFound, TooSmall, LowQuality };

std::string_view to_string(RejectionReason reason);

struct Rejection {
    RejectionReason reason = RejectionReason::NoLungFound;
    std::string message;
    Json details = Json::object();
};

struct SizeGate {
    bool evaluated = false;
    bool passed = false;
    int width = 0;   ///< lung bounding box at working resolution
    int height = 0;
    int min_dimension = 0;
};

struct QualityGate {
    bool evaluated = false;
    bool passed = false;
    bool enabled = true;
    double score = 0.0;
    double threshold = 0.0;
};

struct StageTiming {
    std::string stage;
    double milliseconds = 0.0;
};

/// Rasters produced along the way; not part of the JSON result.
struct CaseArtifacts {
    std::optional<segmentation::BinaryMask> mask;  ///< 512 x 512 model frame
    std::optional<segmentation::RoiImage> roi;
    std::optional<imaging::RasterImage> saliency;  ///< display heatmap in the ROI frame, [0,1]
};

struct PipelineResult {
    int input_width = 0;
    int input_height = 0;
    std::string input_format;
    bool super_resolution = false;
    bool super_resolution_fallback = false;  ///< bicubic upscale used for lack of an SR backend

    SizeGate size_gate;
    QualityGate quality_gate;
    std::optional<segmentation::MaskMetrics> mask_metrics;
    std::optional<segmentation::QualityScore> quality;
    std::optional<Rejection> rejection;

    std::optional<ClassProbabilities> image_branch;
    std::optional<ClassProbabilities> radiomics_branch;
    std::optional<ClassProbabilities> probabilities;
    std::optional<ClassLabel> decided;
    std::optional<models::SubtypeAssignment> subtype;
    std::optional<std::array<double, 2>> embedding;

    std::vector<std::string> warnings;
    std::vector<StageTiming> timings;
    CaseArtifacts artifacts;

    bool accepted() const noexcept { return !rejection.has_value(); }

    /// Timings are the only run-dependent part; golden comparisons drop them.
    Json to_json(bool include_timings = true) const;
};

Json probabilities_json(const ClassProbabilities& p);

}  // namespace circa::pipeline
