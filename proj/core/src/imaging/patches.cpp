#include "circa/imaging/patches.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <string>

namespace circa::imaging {

PatchGrid tile_patches(const RasterImage& img, int patch_size) {
    if (patch_size < 1) throw Error(ErrorCode::InvalidArgument, "patch size must be >= 1");
    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.cols = (img.width() + patch_size - 1) / patch_size;
    grid.rows = (img.height() + patch_size - 1) / patch_size;
    grid.pad_right = grid.cols * patch_size - img.width();
    grid.pad_bottom = grid.rows * patch_size - img.height();
    grid.patches.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            RasterImage patch(patch_size, patch_size);
            for (int y = 0; y < patch_size; ++y) {
                const int sy = std::min(r * patch_size + y, img.height() - 1);
                for (int x = 0; x < patch_size; ++x) {
                    const int sx = std::min(c * patch_size + x, img.width() - 1);
                    patch.at(x, y) = img.at(sx, sy);
                }
            }
            grid.patches.push_back(std::move(patch));
        }
    }
    return grid;
}

RasterImage assemble_patches(const PatchGrid& grid, int scale) {
    if (scale < 1) throw Error(ErrorCode::InvalidArgument, "scale must be >= 1");
    if (grid.rows < 1 || grid.cols < 1 || grid.patches.size() != static_cast<std::size_t>(grid.rows * grid.cols)) {
        throw Error(ErrorCode::PatchShapeMismatch, "patch count does not match grid");
    }
    const int ps = grid.patch_size * scale;
    for (std::size_t i = 0; i < grid.patches.size(); ++i) {
        const auto& p = grid.patches[i];
        if (p.width() != ps || p.height() != ps) {
            throw Error(ErrorCode::PatchShapeMismatch,
                        "patch " + std::to_string(i) + " is " + std::to_string(p.width()) + "x" +
                            std::to_string(p.height()) + ", expected " + std::to_string(ps));
        }
    }
    const int out_w = grid.cols * ps - grid.pad_right * scale;
    const int out_h = grid.rows * ps - grid.pad_bottom * scale;
    RasterImage out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int r = y / ps;
        const int py = y % ps;
        for (int x = 0; x < out_w; ++x) {
            const int c = x / ps;
            out.at(x, y) = grid.patches[static_cast<std::size_t>(r * grid.cols + c)].at(x % ps, py);
        }
    }
    return out;
}

}  // namespace circa::imaging
