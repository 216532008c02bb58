#pragma once

#include "circa/imaging/raster.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace circa::imaging::detail {

RasterImage decode_png(std::span<const std::uint8_t> bytes);
RasterImage decode_jpeg(std::span<const std::uint8_t> bytes);
RasterImage decode_dicom(std::span<const std::uint8_t> bytes);

/// 8-bit grayscale JPEG bytes for a w*h plane.
std::vector<std::uint8_t> encode_jpeg_gray8(int width, int height, std::span<const std::uint8_t> plane, int quality);

}  // namespace circa::imaging::detail
