#include "circa/imaging/codec.hpp"

#include "circa/error.hpp"
#include "codec_internal.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <cstdio>
#include <jerror.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdlib>
#include <cstring>
#include <string>

namespace circa::imaging {

std::string_view to_string(ImageFormat format) {
    switch (format) {
        case ImageFormat::Auto: return "auto";
        case ImageFormat::Png: return "png";
        case ImageFormat::Jpeg: return "jpeg";
        case ImageFormat::Dicom: return "dicom";
    }
    return "auto";
}

std::optional<ImageFormat> parse_image_format(std::string_view text) {
    if (text.empty() || text == "auto") return ImageFormat::Auto;
    if (text == "png" || text == "image/png") return ImageFormat::Png;
    if (text == "jpeg" || text == "jpg" || text == "image/jpeg") return ImageFormat::Jpeg;
    if (text == "dicom" || text == "dcm" || text == "application/dicom") return ImageFormat::Dicom;
    return std::nullopt;
}

std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::equal(kPng, kPng + 8, bytes.begin())) return ImageFormat::Png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::Jpeg;
    if (bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0) return ImageFormat::Dicom;
    return std::nullopt;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes, ImageFormat hint) {
    if (bytes.empty()) throw Error(ErrorCode::UnsupportedFormat, "empty image stream");
    const auto sniffed = sniff_format(bytes);
    const ImageFormat format = sniffed ? *sniffed : hint;
    switch (format) {
        case ImageFormat::Png: return detail::decode_png(bytes);
        case ImageFormat::Jpeg: return detail::decode_jpeg(bytes);
        case ImageFormat::Dicom: return detail::decode_dicom(bytes);
        case ImageFormat::Auto: break;
    }
    throw Error(ErrorCode::UnsupportedFormat, "stream is not PNG, JPEG or DICOM");
}

namespace {

// ---------------------------------------------------------------- PNG

struct PngReadState {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
    char message[256] = {};
};

void png_read_cb(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->offset + length > state->bytes.size()) png_error(png, "unexpected end of PNG stream");
    std::memcpy(out, state->bytes.data() + state->offset, length);
    state->offset += length;
}

void png_error_cb(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof(state->message), "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

struct PngDecoded {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
    std::vector<std::uint8_t> data;
    std::vector<png_bytep> rows;
};

// Only trivially destructible locals live in this frame because libpng
// reports errors through longjmp.
bool png_decode_impl(PngReadState& state, PngDecoded& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_cb, png_warning_cb);
    if (png == nullptr) return false;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &state, png_read_cb);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out.data.resize(rowbytes * static_cast<std::size_t>(out.height));
    out.rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) out.rows[static_cast<std::size_t>(y)] = out.data.data() + rowbytes * y;
    png_read_image(png, out.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_cb(png_structp) {}

void png_write_error_cb(png_structp png, png_const_charp) { png_longjmp(png, 1); }

bool png_encode_impl(std::vector<std::uint8_t>& out, int width, int height, int bit_depth,
                     const std::vector<std::uint8_t>& packed) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_write_error_cb, png_warning_cb);
    if (png == nullptr) return false;
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes = packed.size() / static_cast<std::size_t>(height);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(packed.data() + rowbytes * static_cast<std::size_t>(y)));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

std::vector<std::uint8_t> png_encode(int width, int height, int bit_depth, const std::vector<std::uint8_t>& packed) {
    std::vector<std::uint8_t> out;
    if (!png_encode_impl(out, width, height, bit_depth, packed)) {
        throw Error(ErrorCode::Io, "PNG encoding failed");
    }
    return out;
}

// ---------------------------------------------------------------- JPEG

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    bool truncated = false;
    char message[JMSG_LENGTH_MAX] = {};
};

void jpeg_error_exit_cb(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_emit_message_cb(j_common_ptr cinfo, int level) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    // libjpeg pads a premature end of data with a fake EOI and only warns.
    if (level < 0 && cinfo->err->msg_code == JWRN_JPEG_EOF) err->truncated = true;
}

struct JpegDecoded {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;
};

bool jpeg_decode_impl(std::span<const std::uint8_t> bytes, JpegErrorMgr& err, JpegDecoded& out) {
    jpeg_decompress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit_cb;
    err.pub.emit_message = jpeg_emit_message_cb;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = static_cast<int>(cinfo.output_width);
    out.height = static_cast<int>(cinfo.output_height);
    out.channels = cinfo.output_components;
    const std::size_t stride = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.channels);
    out.data.resize(stride * static_cast<std::size_t>(out.height));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.data.data() + stride * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

bool jpeg_encode_impl(int width, int height, std::span<const std::uint8_t> plane, int quality, JpegErrorMgr& err,
                      unsigned char*& buffer, unsigned long& size) {
    jpeg_compress_struct cinfo;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit_cb;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        return false;
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = 1;
    cinfo.in_color_space = JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto row = const_cast<JSAMPROW>(plane.data() + static_cast<std::size_t>(width) * cinfo.next_scanline);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    return true;
}

RasterImage from_interleaved(int width, int height, int channels, double full_scale,
                             const auto& sample_at) {
    if (width < 1 || height < 1) throw Error(ErrorCode::CorruptStream, "image has zero dimension");
    RasterImage img(width, height);
    auto px = img.pixels();
    const std::size_t n = px.size();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) acc += sample_at(i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c));
        px[i] = std::clamp(acc / channels / full_scale, 0.0, 1.0);
    }
    return img;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

namespace detail {

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    PngReadState state;
    state.bytes = bytes;
    PngDecoded decoded;
    if (!png_decode_impl(state, decoded)) {
        throw Error(ErrorCode::CorruptStream, std::string("PNG decode failed: ") + state.message);
    }
    if (decoded.bit_depth == 16) {
        return from_interleaved(decoded.width, decoded.height, decoded.channels, 65535.0, [&](std::size_t i) {
            return static_cast<double>((decoded.data[2 * i] << 8) | decoded.data[2 * i + 1]);
        });
    }
    return from_interleaved(decoded.width, decoded.height, decoded.channels, 255.0,
                            [&](std::size_t i) { return static_cast<double>(decoded.data[i]); });
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    JpegErrorMgr err;
    JpegDecoded decoded;
    if (!jpeg_decode_impl(bytes, err, decoded)) {
        throw Error(ErrorCode::CorruptStream, std::string("JPEG decode failed: ") + err.message);
    }
    if (err.truncated) throw Error(ErrorCode::CorruptStream, "JPEG stream ends prematurely");
    return from_interleaved(decoded.width, decoded.height, decoded.channels, 255.0,
                            [&](std::size_t i) { return static_cast<double>(decoded.data[i]); });
}

std::vector<std::uint8_t> encode_jpeg_gray8(int width, int height, std::span<const std::uint8_t> plane, int quality) {
    JpegErrorMgr err;
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    const bool ok = jpeg_encode_impl(width, height, plane, std::clamp(quality, 1, 100), err, buffer, size);
    std::vector<std::uint8_t> out;
    if (ok) out.assign(buffer, buffer + size);
    std::free(buffer);
    if (!ok) throw Error(ErrorCode::Io, std::string("JPEG encoding failed: ") + err.message);
    return out;
}

}  // namespace detail

std::vector<std::uint8_t> encode_png(const RasterImage& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::InvalidArgument, "PNG bit depth must be 8 or 16");
    const auto px = img.pixels();
    std::vector<std::uint8_t> packed;
    if (bit_depth == 8) {
        packed.reserve(px.size());
        for (double v : px) packed.push_back(to_u8(v));
    } else {
        packed.reserve(px.size() * 2);
        for (double v : px) {
            const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
            packed.push_back(static_cast<std::uint8_t>(s >> 8));
            packed.push_back(static_cast<std::uint8_t>(s & 0xFF));
        }
    }
    return png_encode(img.width(), img.height(), bit_depth, packed);
}

std::vector<std::uint8_t> encode_png_1bit(int width, int height, std::span<const std::uint8_t> bits) {
    if (width < 1 || height < 1 || bits.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::ShapeMismatch, "bit plane does not match dimensions");
    }
    const std::size_t rowbytes = (static_cast<std::size_t>(width) + 7) / 8;
    std::vector<std::uint8_t> packed(rowbytes * static_cast<std::size_t>(height), 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]) {
                packed[rowbytes * static_cast<std::size_t>(y) + static_cast<std::size_t>(x / 8)] |=
                    static_cast<std::uint8_t>(0x80 >> (x % 8));
            }
        }
    }
    return png_encode(width, height, 1, packed);
}

std::vector<std::uint8_t> encode_jpeg(const RasterImage& img, int quality) {
    std::vector<std::uint8_t> plane;
    plane.reserve(img.size());
    for (double v : img.pixels()) plane.push_back(to_u8(v));
    return detail::encode_jpeg_gray8(img.width(), img.height(), plane, quality);
}

}  // namespace circa::imaging
