#pragma once

#include "circa/imaging/intensity.hpp"
#include "circa/json.hpp"
#include "circa/models/backend.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace circa::pipeline {

/// Environment lookup; returns nullopt for unset variables.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_environment();
EnvLookup map_environment(std::map<std::string, std::string> vars);

/// Full settings document with every key at its default value. The same
/// document holds the pipeline and the service sections.
Json default_settings();

/// Layers, lowest first: defaults, CIRCA_* environment variables, the config
/// file (YAML or JSON), then `overrides`. The variable for a key path is
/// CIRCA_ followed by the upper-cased path joined with '_', e.g.
/// CIRCA_GATES_QUALITY_THRESHOLD. Unknown keys in the file or overrides
/// throw InvalidConfig.
Json load_settings(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                   const Json& overrides = Json::object());

/// Parses YAML (or JSON, a YAML subset) into JSON. Throws InvalidConfig.
Json parse_settings_text(const std::string& text);

/// Deep merge; objects merge recursively, anything else replaces.
void merge_settings(Json& base, const Json& patch, bool strict, const std::string& path = {});

struct ModelPaths {
    std::filesystem::path train_stats;
    std::filesystem::path radiomics_selection;
    std::filesystem::path radiomics_scaler;
    std::filesystem::path dense;
    std::filesystem::path tree;
    std::filesystem::path feature_scaler;
    std::filesystem::path pca;
    std::filesystem::path embedding_index;
    std::filesystem::path gmm;
};

struct PipelineConfig {
    double low_quantile = imaging::kDefaultLowQuantile;
    double high_quantile = imaging::kDefaultHighQuantile;
    bool contrast = true;
    imaging::ClaheParams clahe;
    int sr_trigger = 512;  ///< inputs with min(width, height) below this go through super-resolution
    int sr_patch = 256;

    double segmentation_threshold = 0.5;
    int disc_radius = 2;

    int min_lung_dimension = 300;
    bool quality_gate = true;
    double quality_threshold = 0.5;
    std::filesystem::path quality_report;  ///< cleaning report whose threshold overrides quality_threshold

    double roi_low_quantile = 0.0005;
    double roi_high_quantile = 0.9995;
    int min_gap = 8;

    double bin_width = 0.05;
    int knn_k = 10;

    bool saliency = false;
    int saliency_patch = 64;
    int saliency_stride = 32;

    std::uint64_t seed = 0;

    std::optional<models::BackendSpec> segmentation;
    std::optional<models::BackendSpec> image_classifier;
    std::optional<models::BackendSpec> super_resolution;
    std::optional<models::BackendSpec> feature_extractor;

    ModelPaths models;

    /// Throws InvalidConfig for out-of-range values.
    void validate() const;

    /// Relative paths resolve against `base_dir`.
    static PipelineConfig from_settings(const Json& settings, const std::filesystem::path& base_dir = {});
    Json to_json() const;
};

/// Convenience: load_settings + from_settings with paths relative to the file.
PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env,
                                    const Json& overrides = Json::object());

}  // namespace circa::pipeline
