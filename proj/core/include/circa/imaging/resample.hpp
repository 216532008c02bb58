#pragma once

#include "circa/imaging/raster.hpp"

namespace circa::imaging {

enum class ResizeMode { Exact, FitPad };
enum class ResampleKernel { Bilinear, Bicubic };

struct Padding {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    bool operator==(const Padding&) const = default;
};

struct ResizeResult {
    RasterImage image;
    Padding padding;
    int content_width = 0;
    int content_height = 0;
    double scale_x = 1.0;
    double scale_y = 1.0;
};

/// Exact: stretch to target (aspect ignored). FitPad: scale so the larger
/// relative side meets the target, then zero-pad symmetrically (odd leftover
/// goes right/bottom). Sampling uses pixel-centre alignment with edge clamp.
ResizeResult resize(const RasterImage& img, int target_w, int target_h, ResizeMode mode,
                    ResampleKernel kernel = ResampleKernel::Bilinear);

}  // namespace circa::imaging
