#pragma once

#include <array>
#include <span>

namespace circa::radiomics {

/// 19 first-order statistics in catalog order. Energy terms use the raw
/// values; entropy and uniformity use the discretized histogram (log2,
/// 0 log 0 = 0). Percentiles interpolate linearly. Variance is the
/// population variance; skewness and kurtosis (non-excess) of a constant
/// region are 0. Throws EmptySegment.
std::array<double, 19> first_order_features(std::span<const double> values, double bin_width,
                                            double pixel_area = 1.0);

}  // namespace circa::radiomics
