#include "circa/imaging/resample.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace circa::imaging {
namespace {

double cubic_weight(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

RasterImage resample_bilinear(const RasterImage& img, int tw, int th) {
    const int sw = img.width();
    const int sh = img.height();
    if (sw == tw && sh == th) return img;
    const double fx = static_cast<double>(sw) / tw;
    const double fy = static_cast<double>(sh) / th;
    RasterImage out(tw, th);
    for (int y = 0; y < th; ++y) {
        const double sy = std::clamp((y + 0.5) * fy - 0.5, 0.0, static_cast<double>(sh - 1));
        const int y0 = static_cast<int>(std::floor(sy));
        const int y1 = std::min(y0 + 1, sh - 1);
        const double wy = sy - y0;
        for (int x = 0; x < tw; ++x) {
            const double sx = std::clamp((x + 0.5) * fx - 0.5, 0.0, static_cast<double>(sw - 1));
            const int x0 = static_cast<int>(std::floor(sx));
            const int x1 = std::min(x0 + 1, sw - 1);
            const double wx = sx - x0;
            const double top = (1.0 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
            const double bot = (1.0 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
            out.at(x, y) = (1.0 - wy) * top + wy * bot;
        }
    }
    return out;
}

RasterImage resample_bicubic(const RasterImage& img, int tw, int th) {
    const int sw = img.width();
    const int sh = img.height();
    if (sw == tw && sh == th) return img;
    const double fx = static_cast<double>(sw) / tw;
    const double fy = static_cast<double>(sh) / th;
    RasterImage out(tw, th);
    for (int y = 0; y < th; ++y) {
        const double sy = (y + 0.5) * fy - 0.5;
        const int iy = static_cast<int>(std::floor(sy));
        for (int x = 0; x < tw; ++x) {
            const double sx = (x + 0.5) * fx - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            double acc = 0.0;
            for (int m = -1; m <= 2; ++m) {
                const double wy = cubic_weight(sy - (iy + m));
                const int yy = std::clamp(iy + m, 0, sh - 1);
                for (int n = -1; n <= 2; ++n) {
                    const int xx = std::clamp(ix + n, 0, sw - 1);
                    acc += wy * cubic_weight(sx - (ix + n)) * img.at(xx, yy);
                }
            }
            out.at(x, y) = std::clamp(acc, 0.0, 1.0);
        }
    }
    return out;
}

RasterImage resample(const RasterImage& img, int tw, int th, ResampleKernel kernel) {
    return kernel == ResampleKernel::Bicubic ? resample_bicubic(img, tw, th) : resample_bilinear(img, tw, th);
}

}  // namespace

ResizeResult resize(const RasterImage& img, int target_w, int target_h, ResizeMode mode, ResampleKernel kernel) {
    if (target_w < 1 || target_h < 1) throw Error(ErrorCode::InvalidArgument, "resize target must be >= 1");
    if (mode == ResizeMode::Exact) {
        return ResizeResult{resample(img, target_w, target_h, kernel), Padding{}, target_w, target_h,
                            static_cast<double>(target_w) / img.width(),
                            static_cast<double>(target_h) / img.height()};
    }
    const double scale = std::min(static_cast<double>(target_w) / img.width(),
                                  static_cast<double>(target_h) / img.height());
    const int cw = std::clamp(static_cast<int>(std::lround(img.width() * scale)), 1, target_w);
    const int ch = std::clamp(static_cast<int>(std::lround(img.height() * scale)), 1, target_h);
    const RasterImage content = resample(img, cw, ch, kernel);

    Padding pad;
    pad.left = (target_w - cw) / 2;
    pad.right = target_w - cw - pad.left;
    pad.top = (target_h - ch) / 2;
    pad.bottom = target_h - ch - pad.top;

    RasterImage out(target_w, target_h);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) out.at(x + pad.left, y + pad.top) = content.at(x, y);
    }
    return ResizeResult{std::move(out), pad, cw, ch, static_cast<double>(cw) / img.width(),
                        static_cast<double>(ch) / img.height()};
}

}  // namespace circa::imaging
