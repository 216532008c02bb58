#pragma once

#include "circa/imaging/raster.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace circa::segmentation {

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    bool operator==(const BoundingBox&) const = default;
};

class BinaryMask {
public:
    BinaryMask(int width, int height);
    BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }
    bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    /// One byte per pixel, 0 or 1.
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    std::size_t count() const;
    std::optional<BoundingBox> bbox() const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

struct Component {
    std::vector<std::size_t> pixels;  ///< linear indices, ascending
    BoundingBox bbox;

    std::size_t area() const noexcept { return pixels.size(); }
};

/// Connected components (8- or 4-connectivity), largest first; equal areas
/// keep raster order of their first pixel.
std::vector<Component> connected_components(const BinaryMask& mask, int connectivity = 8);

BinaryMask mask_from_components(int width, int height, std::span<const Component> components);

/// Foreground where value >= threshold.
BinaryMask binarize(const imaging::RasterImage& img, double threshold);

/// Disc structuring element: offsets with dx^2 + dy^2 <= radius^2
/// (radius 2 gives the 13-pixel 5x5 disc).
std::vector<std::pair<int, int>> disc_offsets(int radius);

/// Erosion treats pixels outside the image as foreground and dilation treats
/// them as background, so neither operation invents a border effect.
BinaryMask erode(const BinaryMask& mask, int radius);
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask open(const BinaryMask& mask, int radius);
BinaryMask close(const BinaryMask& mask, int radius);

/// Convex hull of pixel centres (counter-clockwise in image coordinates,
/// collinear points dropped). Fewer than 3 vertices for degenerate sets.
std::vector<std::pair<int, int>> convex_hull(std::vector<std::pair<int, int>> points);

/// Every pixel whose centre lies inside or on the hull of the foreground.
BinaryMask convex_hull_fill(const BinaryMask& mask);

imaging::RasterImage to_raster(const BinaryMask& mask);

/// 1-bit grayscale PNG; decoding thresholds at 0.5.
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);

}  // namespace circa::segmentation
