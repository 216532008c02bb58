#pragma once

#include "circa/imaging/raster.hpp"

#include <vector>

namespace circa::imaging {

struct PatchGrid {
    int patch_size = 0;
    int rows = 0;
    int cols = 0;
    std::vector<RasterImage> patches;  ///< row-major
    int pad_right = 0;
    int pad_bottom = 0;
};

/// Pads right/bottom by edge replication to a multiple of patch_size and cuts
/// the result into patch_size x patch_size tiles.
PatchGrid tile_patches(const RasterImage& img, int patch_size);

/// Concatenates (possibly upscaled) patches and crops the scaled padding.
/// Every patch must be (patch_size*scale) square, else PatchShapeMismatch.
RasterImage assemble_patches(const PatchGrid& grid, int scale);

}  // namespace circa::imaging
