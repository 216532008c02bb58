#pragma once

#include "circa/imaging/raster.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace circa::imaging {

enum class ImageFormat { Auto, Png, Jpeg, Dicom };

std::string_view to_string(ImageFormat format);
std::optional<ImageFormat> parse_image_format(std::string_view text);

/// Magic-byte detection; nullopt when the stream matches no supported format.
std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

/// Decodes PNG (1-16 bit, gray/rgb/palette), baseline JPEG and monochrome
/// DICOM (implicit/explicit little endian, baseline JPEG encapsulation).
/// Intensities are mapped linearly from the source bit depth to [0,1]; colour
/// sources are reduced to the mean of their channels; MONOCHROME1 is inverted.
///
/// A hint is only consulted when the magic bytes are inconclusive, which is
/// how preamble-less DICOM datasets get accepted.
RasterImage decode_image(std::span<const std::uint8_t> bytes, ImageFormat hint = ImageFormat::Auto);

/// Encodes a [0,1] raster as 8- or 16-bit grayscale PNG (values are clamped).
std::vector<std::uint8_t> encode_png(const RasterImage& img, int bit_depth = 8);

/// Encodes a 0/1 byte plane as a 1-bit grayscale PNG.
std::vector<std::uint8_t> encode_png_1bit(int width, int height, std::span<const std::uint8_t> bits);

/// Baseline grayscale JPEG, used for fixtures and verified-case exports.
std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality = 90);

/// Minimal Part-10 DICOM writer (explicit VR little endian, secondary capture).
struct DicomWriteOptions {
    int bits_stored = 16;           ///< 8 or 16 stored bits, allocated to match
    bool monochrome1 = false;
    bool jpeg_baseline = false;     ///< encapsulate an 8-bit baseline JPEG instead
    std::string sop_instance_uid = "1.2.826.0.1.3680043.10.1462.1";
};

/// Writes raw stored values (each must fit in `bits_stored`).
std::vector<std::uint8_t> encode_dicom_raw(int width, int height, std::span<const std::uint16_t> stored,
                                           const DicomWriteOptions& options = {});

/// Quantizes a [0,1] raster to the stored bit depth and writes it.
std::vector<std::uint8_t> encode_dicom(const RasterImage& img, const DicomWriteOptions& options = {});

}  // namespace circa::imaging
