#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace circa::models {

struct PcaModel {
    std::vector<double> mean;
    std::vector<std::vector<double>> axes;      ///< retained axes, each of input width, unit norm
    std::vector<double> explained_variance;     ///< per retained axis, non-increasing
    std::vector<double> explained_ratio;        ///< per retained axis
    double total_variance = 0.0;

    std::size_t input_width() const noexcept { return mean.size(); }
    std::size_t n_components() const noexcept { return axes.size(); }
};

/// Eigen-decomposition of the sample covariance (n - 1 denominator). Keeps
/// the fewest axes whose cumulative explained ratio reaches var_fraction.
/// Each axis is sign-normalized so its largest-magnitude entry is positive.
/// Throws TooFewSamples for fewer than two rows and DegenerateMatrix when all
/// rows are equal.
PcaModel pca_fit(const std::vector<std::vector<double>>& rows, double var_fraction = 0.90);

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x);

void save_pca(const std::filesystem::path& path, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace circa::models
