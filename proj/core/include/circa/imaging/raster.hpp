#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace circa::imaging {

/// Row-major grayscale raster. Module operations keep every pixel in [0,1];
/// the type itself does not clamp so that standardized ROI tensors (which may
/// leave the unit range) can reuse it.
class RasterImage {
public:
    RasterImage(int width, int height, double fill = 0.0);
    RasterImage(int width, int height, std::vector<double> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return pixels_.size(); }

    double at(int x, int y) const { return pixels_[index(x, y)]; }
    double& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }

    double min_value() const;
    double max_value() const;

    /// Copy of the [x0, x0+w) x [y0, y0+h) window; must lie inside the image.
    RasterImage crop(int x0, int y0, int w, int h) const;

    bool operator==(const RasterImage& other) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<double> pixels_;
};

/// Clamps every pixel into [0,1] in place.
void clamp_unit(RasterImage& img);

}  // namespace circa::imaging
