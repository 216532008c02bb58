#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace circa::radiomics {

inline constexpr double kZeroVarianceTolerance = 1e-12;

/// Per-column z-scoring with zero-variance columns dropped.
struct FeatureScaler {
    std::vector<double> mean;  ///< per input column
    std::vector<double> std;   ///< per input column (population)
    std::vector<std::size_t> retained;

    std::size_t input_width() const noexcept { return mean.size(); }
    std::size_t output_width() const noexcept { return retained.size(); }
};

FeatureScaler fit_scaler(const std::vector<std::vector<double>>& rows);

/// z-scores of the retained columns. Throws ShapeMismatch on width mismatch.
std::vector<double> apply_scaler(const FeatureScaler& scaler, std::span<const double> row);

void save_scaler(const std::filesystem::path& path, const FeatureScaler& scaler);
FeatureScaler load_scaler(const std::filesystem::path& path);

}  // namespace circa::radiomics
