#pragma once

#include "circa/imaging/raster.hpp"
#include "circa/radiomics/texture.hpp"
#include "circa/segmentation/trisection.hpp"

#include <string>
#include <vector>

namespace circa::radiomics {

struct FeatureVector {
    std::vector<double> values;  ///< catalog order, length 261
    double bin_width = 0.0;
    std::vector<std::string> warnings;  ///< e.g. "UL: empty segment", "ML: glcm degenerate"
};

/// Radiomic features for each lung band of the [0,1] ROI intensities.
/// Empty segments and degenerate texture families yield zero blocks plus a
/// warning rather than an error.
FeatureVector extract_case_features(const imaging::RasterImage& intensity, const segmentation::Trisection& bands,
                                    double bin_width);

/// Level image of `intensity` restricted to `mask`, discretized on the masked pixels.
LevelImage level_image(const imaging::RasterImage& intensity, const segmentation::BinaryMask& mask, double bin_width);

}  // namespace circa::radiomics
