#pragma once

#include "circa/classes.hpp"
#include "circa/imaging/raster.hpp"

#include <cstdint>

namespace circa::synthetic {

struct ChestParams {
    int width = 640;
    int height = 576;
    ClassLabel label = ClassLabel::Normal;
    double severity = 1.0;  ///< scales the class-specific opacities
    std::uint64_t seed = 1;
};

/// Deterministic chest-like raster in [0,1]: body, spine, two dark lung
/// fields with rib texture, and class-dependent opacities (lower-lobe
/// consolidation for pneumonia, bilateral peripheral haze for covid).
imaging::RasterImage make_chest(const ChestParams& params);

}  // namespace circa::synthetic
