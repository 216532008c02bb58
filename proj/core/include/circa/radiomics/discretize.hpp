#pragma once

#include <span>
#include <vector>

namespace circa::radiomics {

inline constexpr double kDefaultBinWidth = 0.05;
inline constexpr double kAugmentBinWidth = 0.01;

struct Discretized {
    std::vector<int> levels;  ///< 1-based gray level per input value
    int n_levels = 0;         ///< floor((max - min) / bin_width) + 1
    double min_value = 0.0;
};

/// level(p) = floor((p - min) / bin_width) + 1. A 1e-9 tolerance absorbs
/// binary floating-point error at exact bin edges. Constant input gives a
/// single level.
Discretized discretize(std::span<const double> values, double bin_width);

}  // namespace circa::radiomics
