#pragma once

#include "circa/imaging/raster.hpp"
#include "circa/segmentation/mask.hpp"

namespace circa::segmentation {

struct PostprocessParams {
    double threshold = 0.5;
    int disc_radius = 2;
    int keep_components = 2;
};

/// Probability map to lung mask: binarize, keep the largest components,
/// open then close with a disc, then replace each surviving component by its
/// filled convex hull. Hulls that touch are merged into the hull of their
/// union so the result always consists of convex, separated components.
/// Throws NoLungFound when nothing is left.
BinaryMask postprocess_mask(const imaging::RasterImage& prob_map, const PostprocessParams& params = {});

inline BinaryMask postprocess_mask(const imaging::RasterImage& prob_map, double threshold) {
    PostprocessParams params;
    params.threshold = threshold;
    return postprocess_mask(prob_map, params);
}

}  // namespace circa::segmentation
