#include "circa/imaging/raster.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <string>

namespace circa::imaging {

RasterImage::RasterImage(int width, int height, double fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "raster dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

RasterImage::RasterImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
        throw Error(ErrorCode::InvalidArgument, "raster dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::ShapeMismatch, "pixel count does not match raster dimensions");
    }
}

double RasterImage::min_value() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
double RasterImage::max_value() const { return *std::max_element(pixels_.begin(), pixels_.end()); }

RasterImage RasterImage::crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > width_ || y0 + h > height_) {
        throw Error(ErrorCode::InvalidArgument, "crop window outside raster");
    }
    RasterImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const auto src = pixels_.begin() + static_cast<std::ptrdiff_t>(index(x0, y0 + y));
        std::copy(src, src + w, out.pixels().begin() + static_cast<std::ptrdiff_t>(y) * w);
    }
    return out;
}

void clamp_unit(RasterImage& img) {
    for (double& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace circa::imaging
