#pragma once

#include "circa/json.hpp"
#include "circa/segmentation/mask.hpp"

#include <array>

namespace circa::segmentation {

struct MaskMetrics {
    double eccentricity = 0.0;     ///< [0,1]
    double orientation_deg = 0.0;  ///< [-90,90], major axis vs. x-axis
    double area_fraction = 0.0;    ///< [0,1]
    double solidity = 0.0;         ///< [0,1]
};

struct QualityScore {
    double value = 0.0;
    std::array<double, 4> components{};  ///< eccentricity, orientation term, area, solidity
};

/// Shape metrics of the whole foreground from central second moments of the
/// pixel centres. Throws EmptyMask.
MaskMetrics mask_metrics(const BinaryMask& mask);

/// Mean of (eccentricity, 1 - |orientation|/90, area_fraction, solidity).
QualityScore quality_score(const MaskMetrics& metrics);

inline constexpr int kMinLungDimension = 300;

struct SizeCheck {
    bool accepted = false;
    int width = 0;   ///< foreground bounding-box width (0 for empty masks)
    int height = 0;
};

/// Rejects when the foreground bounding box is narrower or shorter than
/// `min_dimension`; empty masks are rejected.
SizeCheck too_small_check(const BinaryMask& mask, int min_dimension = kMinLungDimension);

Json to_json(const MaskMetrics& metrics);
Json to_json(const QualityScore& score);

}  // namespace circa::segmentation
