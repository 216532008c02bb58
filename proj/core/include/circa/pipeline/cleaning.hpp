#pragma once

#include "circa/json.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/manifest.hpp"
#include "circa/segmentation/outlier.hpp"

#include <optional>
#include <string>
#include <vector>

namespace circa::pipeline {

struct CaseRejection {
    std::string id;
    std::string reason;  ///< NoLungFound, TooSmall, LowQuality or Error
    std::optional<double> score;
    std::string message;
    Json details = Json::object();
};

struct CleaningReport {
    std::size_t input_cases = 0;
    std::size_t kept_cases = 0;
    /// Adjusted-boxplot fence over the scores of size-accepted cases; absent
    /// with fewer than four such cases, in which case nothing is rejected
    /// for quality.
    std::optional<segmentation::AdjustedBoxplot> fence;
    std::optional<double> threshold;
    std::vector<CaseRejection> rejections;  ///< manifest order
    std::vector<std::pair<std::string, double>> scores;

    Json to_json() const;
};

struct CleaningResult {
    DatasetManifest cleaned;
    CleaningReport report;
};

/// Segments and scores every case, derives the corpus quality threshold and
/// drops too-small, unsegmentable, low-quality and unreadable cases. Per-case
/// failures are recorded, never thrown. `jobs` workers share the engine;
/// the outcome does not depend on the worker count.
CleaningResult clean_dataset(const DatasetManifest& manifest, const Engine& engine, int jobs = 1);

}  // namespace circa::pipeline
