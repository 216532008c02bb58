#pragma once

#include "circa/classes.hpp"
#include "circa/imaging/raster.hpp"
#include "circa/models/backend.hpp"

namespace circa::pipeline {

struct SaliencyMap {
    int patch = 0;
    int stride = 0;
    double baseline = 0.0;  ///< target probability on the unoccluded input
    ClassLabel target = ClassLabel::Normal;
    /// One cell per patch position (columns x rows): baseline minus the
    /// target probability with that patch zeroed. May be negative.
    imaging::RasterImage drops{1, 1};

    /// Per pixel mean drop of the patches covering it, negatives cut to 0
    /// and scaled so the maximum is 1 (all zero when nothing drops).
    imaging::RasterImage display(int width, int height) const;
};

/// Patch positions start at 0 and advance by `stride` while the patch fits;
/// a patch at least as large as the image gives a single position.
/// Throws BackendUnavailable when `classifier` is null.
SaliencyMap occlusion_saliency(const imaging::RasterImage& input, models::ModelBackend* classifier, int patch,
                               int stride, ClassLabel target);

}  // namespace circa::pipeline
