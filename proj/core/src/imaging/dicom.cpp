#include "circa/error.hpp"
#include "circa/imaging/codec.hpp"
#include "codec_internal.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <optional>
#include <string>

namespace circa::imaging {
namespace {

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;
constexpr const char* kImplicitLE = "1.2.840.10008.1.2";
constexpr const char* kExplicitLE = "1.2.840.10008.1.2.1";
constexpr const char* kJpegBaseline = "1.2.840.10008.1.2.4.50";
constexpr const char* kSecondaryCapture = "1.2.840.10008.5.1.4.1.1.7";

constexpr std::uint32_t tag(std::uint16_t group, std::uint16_t element) {
    return (static_cast<std::uint32_t>(group) << 16) | element;
}

constexpr std::uint32_t kItem = tag(0xFFFE, 0xE000);
constexpr std::uint32_t kItemDelim = tag(0xFFFE, 0xE00D);
constexpr std::uint32_t kSeqDelim = tag(0xFFFE, 0xE0DD);
constexpr std::uint32_t kPixelData = tag(0x7FE0, 0x0010);

bool long_form_vr(const char vr[2]) {
    static constexpr const char* kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ", "SV", "UC", "UN", "UR", "UT", "UV"};
    return std::any_of(std::begin(kLong), std::end(kLong),
                       [&](const char* v) { return v[0] == vr[0] && v[1] == vr[1]; });
}

struct Element {
    std::uint32_t tag = 0;
    char vr[2] = {0, 0};
    std::uint32_t length = 0;
    std::size_t value_offset = 0;
};

struct ImageAttributes {
    std::optional<int> rows;
    std::optional<int> cols;
    int bits_allocated = 16;
    std::optional<int> bits_stored;
    int pixel_representation = 0;
    int samples_per_pixel = 1;
    std::string photometric = "MONOCHROME2";
    std::string transfer_syntax = kImplicitLE;
    bool has_pixels = false;
    bool encapsulated = false;
    std::span<const std::uint8_t> native;
    std::vector<std::uint8_t> fragments;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t size() const { return bytes_.size(); }

    void need(std::size_t pos, std::size_t n) const {
        if (pos > bytes_.size() || n > bytes_.size() - pos) {
            throw Error(ErrorCode::CorruptStream, "DICOM stream truncated at offset " + std::to_string(pos));
        }
    }
    std::uint16_t u16(std::size_t pos) const {
        need(pos, 2);
        return static_cast<std::uint16_t>(bytes_[pos] | (bytes_[pos + 1] << 8));
    }
    std::uint32_t u32(std::size_t pos) const {
        need(pos, 4);
        return static_cast<std::uint32_t>(bytes_[pos]) | (static_cast<std::uint32_t>(bytes_[pos + 1]) << 8) |
               (static_cast<std::uint32_t>(bytes_[pos + 2]) << 16) | (static_cast<std::uint32_t>(bytes_[pos + 3]) << 24);
    }
    std::span<const std::uint8_t> slice(std::size_t pos, std::size_t n) const {
        need(pos, n);
        return bytes_.subspan(pos, n);
    }
    std::string text(std::size_t pos, std::size_t n) const {
        auto s = slice(pos, n);
        std::string out(s.begin(), s.end());
        while (!out.empty() && (out.back() == ' ' || out.back() == '\0')) out.pop_back();
        while (!out.empty() && out.front() == ' ') out.erase(out.begin());
        return out;
    }

    Element read_element(std::size_t pos, bool explicit_vr) const {
        Element e;
        e.tag = tag(u16(pos), u16(pos + 2));
        if ((e.tag >> 16) == 0xFFFE) {
            e.length = u32(pos + 4);
            e.value_offset = pos + 8;
            return e;
        }
        if (explicit_vr) {
            need(pos + 4, 2);
            e.vr[0] = static_cast<char>(bytes_[pos + 4]);
            e.vr[1] = static_cast<char>(bytes_[pos + 5]);
            if (long_form_vr(e.vr)) {
                e.length = u32(pos + 8);
                e.value_offset = pos + 12;
            } else {
                e.length = u16(pos + 6);
                e.value_offset = pos + 8;
            }
        } else {
            e.length = u32(pos + 4);
            e.value_offset = pos + 8;
        }
        return e;
    }

private:
    std::span<const std::uint8_t> bytes_;
};

// Skips an undefined-length sequence starting at `pos`; returns the offset past its delimiter.
std::size_t skip_undefined_sequence(const Reader& r, std::size_t pos, bool explicit_vr);

// Skips elements of an undefined-length item until its delimiter.
std::size_t skip_undefined_item(const Reader& r, std::size_t pos, bool explicit_vr) {
    while (true) {
        const Element e = r.read_element(pos, explicit_vr);
        if (e.tag == kItemDelim) return e.value_offset;
        if (e.length == kUndefinedLength) {
            pos = skip_undefined_sequence(r, e.value_offset, explicit_vr);
        } else {
            r.need(e.value_offset, e.length);
            pos = e.value_offset + e.length;
        }
    }
}

std::size_t skip_undefined_sequence(const Reader& r, std::size_t pos, bool explicit_vr) {
    while (true) {
        const Element e = r.read_element(pos, explicit_vr);
        if (e.tag == kSeqDelim) return e.value_offset;
        if (e.tag != kItem) throw Error(ErrorCode::CorruptStream, "malformed DICOM sequence");
        if (e.length == kUndefinedLength) {
            pos = skip_undefined_item(r, e.value_offset, explicit_vr);
        } else {
            r.need(e.value_offset, e.length);
            pos = e.value_offset + e.length;
        }
    }
}

std::size_t read_fragments(const Reader& r, std::size_t pos, std::vector<std::uint8_t>& out) {
    bool first = true;
    while (true) {
        const Element e = r.read_element(pos, true);
        if (e.tag == kSeqDelim) return e.value_offset;
        if (e.tag != kItem || e.length == kUndefinedLength) {
            throw Error(ErrorCode::CorruptStream, "malformed encapsulated pixel data");
        }
        auto value = r.slice(e.value_offset, e.length);
        if (!first) out.insert(out.end(), value.begin(), value.end());
        first = false;  // the first item is the basic offset table
        pos = e.value_offset + e.length;
    }
}

void parse_dataset(const Reader& r, std::size_t pos, bool explicit_vr, ImageAttributes& attrs, bool meta_only) {
    while (pos < r.size()) {
        const std::uint16_t group = r.u16(pos);
        if (meta_only && group != 0x0002) return;
        const Element e = r.read_element(pos, explicit_vr || group == 0x0002);
        if (e.tag == kPixelData) {
            attrs.has_pixels = true;
            if (e.length == kUndefinedLength) {
                attrs.encapsulated = true;
                read_fragments(r, e.value_offset, attrs.fragments);
            } else {
                attrs.native = r.slice(e.value_offset, e.length);
            }
            return;
        }
        if (e.length == kUndefinedLength) {
            pos = skip_undefined_sequence(r, e.value_offset, explicit_vr);
            continue;
        }
        r.need(e.value_offset, e.length);
        const auto us = [&] { return static_cast<int>(r.u16(e.value_offset)); };
        switch (e.tag) {
            case tag(0x0002, 0x0010): attrs.transfer_syntax = r.text(e.value_offset, e.length); break;
            case tag(0x0028, 0x0002): attrs.samples_per_pixel = us(); break;
            case tag(0x0028, 0x0004): attrs.photometric = r.text(e.value_offset, e.length); break;
            case tag(0x0028, 0x0010): attrs.rows = us(); break;
            case tag(0x0028, 0x0011): attrs.cols = us(); break;
            case tag(0x0028, 0x0100): attrs.bits_allocated = us(); break;
            case tag(0x0028, 0x0101): attrs.bits_stored = us(); break;
            case tag(0x0028, 0x0103): attrs.pixel_representation = us(); break;
            default: break;
        }
        pos = e.value_offset + e.length;
    }
}

bool looks_explicit(const Reader& r, std::size_t pos) {
    if (pos + 6 > r.size()) return false;
    const auto s = r.slice(pos + 4, 2);
    return std::isupper(s[0]) && std::isupper(s[1]);
}

}  // namespace

namespace detail {

RasterImage decode_dicom(std::span<const std::uint8_t> bytes) {
    const Reader r(bytes);
    std::size_t pos = 0;
    if (bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0) pos = 132;

    ImageAttributes attrs;
    bool explicit_vr = looks_explicit(r, pos);
    if (pos + 2 <= bytes.size() && r.u16(pos) == 0x0002) {
        // Locate the end of the file meta group, then re-enter with the announced syntax.
        std::size_t meta_end = pos;
        while (meta_end + 2 <= bytes.size() && r.u16(meta_end) == 0x0002) {
            const Element e = r.read_element(meta_end, true);
            r.need(e.value_offset, e.length);
            if (e.tag == tag(0x0002, 0x0010)) attrs.transfer_syntax = r.text(e.value_offset, e.length);
            meta_end = e.value_offset + e.length;
        }
        pos = meta_end;
        if (attrs.transfer_syntax == kImplicitLE) {
            explicit_vr = false;
        } else if (attrs.transfer_syntax == kExplicitLE || attrs.transfer_syntax == kJpegBaseline) {
            explicit_vr = true;
        } else {
            throw Error(ErrorCode::UnsupportedFormat, "unsupported DICOM transfer syntax " + attrs.transfer_syntax);
        }
    } else if (explicit_vr) {
        attrs.transfer_syntax = kExplicitLE;
    }
    parse_dataset(r, pos, explicit_vr, attrs, false);

    if (!attrs.has_pixels || !attrs.rows || !attrs.cols) {
        throw Error(ErrorCode::NonImageDicom, "DICOM dataset has no image pixel module");
    }
    const bool mono1 = attrs.photometric == "MONOCHROME1";
    if ((!mono1 && attrs.photometric != "MONOCHROME2") || attrs.samples_per_pixel != 1) {
        throw Error(ErrorCode::UnsupportedFormat, "only monochrome DICOM is supported, got " + attrs.photometric);
    }
    const int rows = *attrs.rows;
    const int cols = *attrs.cols;
    if (rows < 1 || cols < 1) throw Error(ErrorCode::NonImageDicom, "DICOM image has zero dimension");

    RasterImage img(1, 1);
    if (attrs.encapsulated) {
        if (attrs.transfer_syntax != kJpegBaseline) {
            throw Error(ErrorCode::UnsupportedFormat, "encapsulated pixel data requires baseline JPEG");
        }
        img = decode_jpeg(attrs.fragments);
        if (img.width() != cols || img.height() != rows) {
            throw Error(ErrorCode::CorruptStream, "JPEG frame size disagrees with DICOM rows/columns");
        }
    } else {
        if (attrs.bits_allocated != 8 && attrs.bits_allocated != 16) {
            throw Error(ErrorCode::UnsupportedFormat, "unsupported BitsAllocated " + std::to_string(attrs.bits_allocated));
        }
        const int stored = std::clamp(attrs.bits_stored.value_or(attrs.bits_allocated), 1, attrs.bits_allocated);
        const std::size_t bytes_per = static_cast<std::size_t>(attrs.bits_allocated / 8);
        const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        if (attrs.native.size() < count * bytes_per) throw Error(ErrorCode::CorruptStream, "DICOM pixel data truncated");
        const std::uint32_t mask = (1u << stored) - 1u;
        const double full_scale = static_cast<double>(mask);
        img = RasterImage(cols, rows);
        auto px = img.pixels();
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t raw = bytes_per == 1
                                    ? attrs.native[i]
                                    : static_cast<std::uint32_t>(attrs.native[2 * i] | (attrs.native[2 * i + 1] << 8));
            raw &= mask;
            double v = static_cast<double>(raw);
            if (attrs.pixel_representation == 1) {
                const std::uint32_t sign = 1u << (stored - 1);
                v = static_cast<double>(raw ^ sign);  // offset-binary: min signed value maps to 0
            }
            px[i] = std::clamp(v / full_scale, 0.0, 1.0);
        }
    }
    if (mono1) {
        for (double& v : img.pixels()) v = 1.0 - v;
    }
    return img;
}

}  // namespace detail

namespace {

class Writer {
public:
    void u16(std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
    void element(std::uint16_t group, std::uint16_t elem, const char* vr, std::span<const std::uint8_t> value) {
        u16(group);
        u16(elem);
        out.push_back(static_cast<std::uint8_t>(vr[0]));
        out.push_back(static_cast<std::uint8_t>(vr[1]));
        if (long_form_vr(vr)) {
            u16(0);
            u32(static_cast<std::uint32_t>(value.size()));
        } else {
            u16(static_cast<std::uint16_t>(value.size()));
        }
        out.insert(out.end(), value.begin(), value.end());
    }
    void text(std::uint16_t group, std::uint16_t elem, const char* vr, std::string value) {
        if (value.size() % 2) value.push_back(vr[0] == 'U' && vr[1] == 'I' ? '\0' : ' ');
        element(group, elem, vr, std::span(reinterpret_cast<const std::uint8_t*>(value.data()), value.size()));
    }
    void us(std::uint16_t group, std::uint16_t elem, std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v & 0xFF), static_cast<std::uint8_t>(v >> 8)};
        element(group, elem, "US", b);
    }

    std::vector<std::uint8_t> out;
};

}  // namespace

std::vector<std::uint8_t> encode_dicom_raw(int width, int height, std::span<const std::uint16_t> stored,
                                           const DicomWriteOptions& options) {
    if (width < 1 || height < 1 || width > 0xFFFF || height > 0xFFFF ||
        stored.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::ShapeMismatch, "stored values do not match dimensions");
    }
    if (options.bits_stored != 8 && options.bits_stored != 16) {
        throw Error(ErrorCode::InvalidArgument, "DICOM writer supports 8 or 16 stored bits");
    }
    const bool jpeg = options.jpeg_baseline;
    const int bits = jpeg ? 8 : options.bits_stored;
    const std::string ts = jpeg ? kJpegBaseline : kExplicitLE;

    Writer meta;
    const std::uint8_t version[2] = {0x00, 0x01};
    meta.element(0x0002, 0x0001, "OB", version);
    meta.text(0x0002, 0x0002, "UI", kSecondaryCapture);
    meta.text(0x0002, 0x0003, "UI", options.sop_instance_uid);
    meta.text(0x0002, 0x0010, "UI", ts);
    meta.text(0x0002, 0x0012, "UI", "1.2.826.0.1.3680043.10.1462");

    Writer w;
    w.out.assign(128, 0);
    w.out.insert(w.out.end(), {'D', 'I', 'C', 'M'});
    const std::uint32_t group_len = static_cast<std::uint32_t>(meta.out.size());
    const std::uint8_t gl[4] = {static_cast<std::uint8_t>(group_len & 0xFF), static_cast<std::uint8_t>((group_len >> 8) & 0xFF),
                                static_cast<std::uint8_t>((group_len >> 16) & 0xFF), static_cast<std::uint8_t>(group_len >> 24)};
    w.element(0x0002, 0x0000, "UL", gl);
    w.out.insert(w.out.end(), meta.out.begin(), meta.out.end());

    w.text(0x0008, 0x0016, "UI", kSecondaryCapture);
    w.text(0x0008, 0x0018, "UI", options.sop_instance_uid);
    w.text(0x0008, 0x0060, "CS", "OT");
    w.us(0x0028, 0x0002, 1);
    w.text(0x0028, 0x0004, "CS", options.monochrome1 ? "MONOCHROME1" : "MONOCHROME2");
    w.us(0x0028, 0x0010, static_cast<std::uint16_t>(height));
    w.us(0x0028, 0x0011, static_cast<std::uint16_t>(width));
    w.us(0x0028, 0x0100, static_cast<std::uint16_t>(bits));
    w.us(0x0028, 0x0101, static_cast<std::uint16_t>(bits));
    w.us(0x0028, 0x0102, static_cast<std::uint16_t>(bits - 1));
    w.us(0x0028, 0x0103, 0);

    const std::uint32_t limit = (1u << bits) - 1u;
    if (jpeg) {
        std::vector<std::uint8_t> plane;
        plane.reserve(stored.size());
        for (std::uint16_t v : stored) plane.push_back(static_cast<std::uint8_t>(std::min<std::uint32_t>(v, limit)));
        auto frame = detail::encode_jpeg_gray8(width, height, plane, 95);
        if (frame.size() % 2) frame.push_back(0);
        w.u16(0x7FE0);
        w.u16(0x0010);
        w.out.push_back('O');
        w.out.push_back('B');
        w.u16(0);
        w.u32(kUndefinedLength);
        w.u16(0xFFFE);
        w.u16(0xE000);
        w.u32(0);
        w.u16(0xFFFE);
        w.u16(0xE000);
        w.u32(static_cast<std::uint32_t>(frame.size()));
        w.out.insert(w.out.end(), frame.begin(), frame.end());
        w.u16(0xFFFE);
        w.u16(0xE0DD);
        w.u32(0);
    } else {
        std::vector<std::uint8_t> pixels;
        for (std::uint16_t v : stored) {
            if (v > limit) throw Error(ErrorCode::InvalidArgument, "stored value exceeds bit depth");
            pixels.push_back(static_cast<std::uint8_t>(v & 0xFF));
            if (bits == 16) pixels.push_back(static_cast<std::uint8_t>(v >> 8));
        }
        if (pixels.size() % 2) pixels.push_back(0);
        w.element(0x7FE0, 0x0010, bits == 16 ? "OW" : "OB", pixels);
    }
    return std::move(w.out);
}

std::vector<std::uint8_t> encode_dicom(const RasterImage& img, const DicomWriteOptions& options) {
    const int bits = options.jpeg_baseline ? 8 : options.bits_stored;
    const double full = static_cast<double>((1u << bits) - 1u);
    std::vector<std::uint16_t> stored;
    stored.reserve(img.size());
    for (double v : img.pixels()) {
        double u = std::clamp(v, 0.0, 1.0);
        if (options.monochrome1) u = 1.0 - u;
        stored.push_back(static_cast<std::uint16_t>(std::lround(u * full)));
    }
    return encode_dicom_raw(img.width(), img.height(), stored, options);
}

}  // namespace circa::imaging
