#include "circa/segmentation/mask.hpp"

#include "circa/error.hpp"
#include "circa/imaging/codec.hpp"

#include <algorithm>
#include <climits>
#include <cstdint>

namespace circa::segmentation {

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "mask dimensions must be positive");
    if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::ShapeMismatch, "mask bit count does not match dimensions");
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::optional<BoundingBox> BinaryMask::bbox() const {
    BoundingBox box{width_, height_, -1, -1};
    bool any = false;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!at(x, y)) continue;
            any = true;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.x1 = std::max(box.x1, x + 1);
            box.y1 = std::max(box.y1, y + 1);
        }
    }
    if (!any) return std::nullopt;
    return box;
}

std::vector<Component> connected_components(const BinaryMask& mask, int connectivity) {
    if (connectivity != 4 && connectivity != 8) throw Error(ErrorCode::InvalidArgument, "connectivity must be 4 or 8");
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(mask.size(), -1);
    std::vector<Component> comps;
    std::vector<std::size_t> stack;
    const auto bits = mask.bits();
    for (std::size_t start = 0; start < bits.size(); ++start) {
        if (!bits[start] || label[start] >= 0) continue;
        Component comp;
        comp.bbox = BoundingBox{w, h, 0, 0};
        const int id = static_cast<int>(comps.size());
        label[start] = id;
        stack.assign(1, start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            comp.pixels.push_back(idx);
            const int x = static_cast<int>(idx % static_cast<std::size_t>(w));
            const int y = static_cast<int>(idx / static_cast<std::size_t>(w));
            comp.bbox.x0 = std::min(comp.bbox.x0, x);
            comp.bbox.y0 = std::min(comp.bbox.y0, y);
            comp.bbox.x1 = std::max(comp.bbox.x1, x + 1);
            comp.bbox.y1 = std::max(comp.bbox.y1, y + 1);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if ((dx == 0 && dy == 0) || (connectivity == 4 && dx != 0 && dy != 0)) continue;
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (!mask.in_bounds(nx, ny)) continue;
                    const std::size_t n = static_cast<std::size_t>(ny) * static_cast<std::size_t>(w) + static_cast<std::size_t>(nx);
                    if (bits[n] && label[n] < 0) {
                        label[n] = id;
                        stack.push_back(n);
                    }
                }
            }
        }
        std::sort(comp.pixels.begin(), comp.pixels.end());
        comps.push_back(std::move(comp));
    }
    std::stable_sort(comps.begin(), comps.end(),
                     [](const Component& a, const Component& b) { return a.area() > b.area(); });
    return comps;
}

BinaryMask mask_from_components(int width, int height, std::span<const Component> components) {
    BinaryMask out(width, height);
    auto bits = out.bits();
    for (const auto& c : components) {
        for (std::size_t idx : c.pixels) bits[idx] = 1;
    }
    return out;
}

BinaryMask binarize(const imaging::RasterImage& img, double threshold) {
    BinaryMask out(img.width(), img.height());
    auto bits = out.bits();
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) bits[i] = px[i] >= threshold ? 1 : 0;
    return out;
}

std::vector<std::pair<int, int>> disc_offsets(int radius) {
    if (radius < 0) throw Error(ErrorCode::InvalidArgument, "disc radius must be >= 0");
    std::vector<std::pair<int, int>> offs;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
        }
    }
    return offs;
}

namespace {

BinaryMask morph(const BinaryMask& mask, int radius, bool erosion) {
    const auto offs = disc_offsets(radius);
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool value = erosion;
            for (const auto& [dx, dy] : offs) {
                const int nx = x + dx;
                const int ny = y + dy;
                const bool v = mask.in_bounds(nx, ny) ? mask.at(nx, ny) : erosion;
                if (erosion && !v) {
                    value = false;
                    break;
                }
                if (!erosion && v) {
                    value = true;
                    break;
                }
            }
            out.set(x, y, value);
        }
    }
    return out;
}

std::int64_t cross(const std::pair<int, int>& o, const std::pair<int, int>& a, const std::pair<int, int>& b) {
    return static_cast<std::int64_t>(a.first - o.first) * (b.second - o.second) -
           static_cast<std::int64_t>(a.second - o.second) * (b.first - o.first);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    if (b < 0) {
        a = -a;
        b = -b;
    }
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

}  // namespace

BinaryMask erode(const BinaryMask& mask, int radius) { return morph(mask, radius, true); }
BinaryMask dilate(const BinaryMask& mask, int radius) { return morph(mask, radius, false); }
BinaryMask open(const BinaryMask& mask, int radius) { return dilate(erode(mask, radius), radius); }
BinaryMask close(const BinaryMask& mask, int radius) { return erode(dilate(mask, radius), radius); }

std::vector<std::pair<int, int>> convex_hull(std::vector<std::pair<int, int>> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    std::vector<std::pair<int, int>> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

BinaryMask convex_hull_fill(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    // Only row extremes can be hull vertices.
    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < h; ++y) {
        int lo = -1;
        int hi = -1;
        for (int x = 0; x < w; ++x) {
            if (mask.at(x, y)) {
                if (lo < 0) lo = x;
                hi = x;
            }
        }
        if (lo >= 0) {
            pts.emplace_back(lo, y);
            pts.emplace_back(hi, y);
        }
    }
    BinaryMask out(w, h);
    if (pts.empty()) return out;
    const auto hull = convex_hull(std::move(pts));
    int ymin = INT_MAX;
    int ymax = INT_MIN;
    for (const auto& p : hull) {
        ymin = std::min(ymin, p.second);
        ymax = std::max(ymax, p.second);
    }
    const std::size_t m = hull.size();
    for (int y = ymin; y <= ymax; ++y) {
        std::int64_t xl = INT64_MAX;
        std::int64_t xr = INT64_MIN;
        for (std::size_t i = 0; i < m; ++i) {
            const auto& a = hull[i];
            const auto& b = hull[(i + 1) % m];
            if (y < std::min(a.second, b.second) || y > std::max(a.second, b.second)) continue;
            if (a.second == b.second) {
                xl = std::min<std::int64_t>(xl, std::min(a.first, b.first));
                xr = std::max<std::int64_t>(xr, std::max(a.first, b.first));
                continue;
            }
            // x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y), kept exact.
            const std::int64_t num = static_cast<std::int64_t>(a.first) * (b.second - a.second) +
                                     static_cast<std::int64_t>(y - a.second) * (b.first - a.first);
            const std::int64_t den = b.second - a.second;
            xl = std::min(xl, ceil_div(num, den));
            xr = std::max(xr, floor_div(num, den));
        }
        for (std::int64_t x = std::max<std::int64_t>(xl, 0); x <= std::min<std::int64_t>(xr, w - 1); ++x) {
            out.set(static_cast<int>(x), y, true);
        }
    }
    return out;
}

imaging::RasterImage to_raster(const BinaryMask& mask) {
    imaging::RasterImage img(mask.width(), mask.height());
    auto px = img.pixels();
    const auto bits = mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) px[i] = bits[i] ? 1.0 : 0.0;
    return img;
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
    return imaging::encode_png_1bit(mask.width(), mask.height(), mask.bits());
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
    return binarize(imaging::decode_image(bytes, imaging::ImageFormat::Png), 0.5);
}

}  // namespace circa::segmentation
