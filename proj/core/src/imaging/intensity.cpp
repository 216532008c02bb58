#include "circa/imaging/intensity.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace circa::imaging {

double nearest_rank_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
    std::vector<double> sorted(values.begin(), values.end());
    const std::size_t n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
}

RasterImage standardize_intensity(const RasterImage& img, double low_q, double high_q) {
    if (!(low_q >= 0.0 && low_q < high_q && high_q <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "quantiles must satisfy 0 <= low < high <= 1");
    }
    const double lo = nearest_rank_quantile(img.pixels(), low_q);
    const double hi = nearest_rank_quantile(img.pixels(), high_q);
    RasterImage out(img.width(), img.height());
    const double range = hi - lo;
    if (!(range > 0.0)) return out;
    auto dst = out.pixels();
    auto src = img.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = std::clamp((std::clamp(src[i], lo, hi) - lo) / range, 0.0, 1.0);
    }
    return out;
}

namespace {

struct TileMap {
    bool identity = true;
    std::vector<double> lut;

    double apply(double v, int bins) const {
        if (identity) return v;
        const int b = std::clamp(static_cast<int>(v * bins), 0, bins - 1);
        return lut[static_cast<std::size_t>(b)];
    }
};

TileMap build_tile_map(const RasterImage& img, int x0, int x1, int y0, int y1, const ClaheParams& p) {
    std::vector<double> hist(static_cast<std::size_t>(p.bins), 0.0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const int b = std::clamp(static_cast<int>(img.at(x, y) * p.bins), 0, p.bins - 1);
            hist[static_cast<std::size_t>(b)] += 1.0;
        }
    }
    int lo_bin = -1;
    int hi_bin = -1;
    for (int b = 0; b < p.bins; ++b) {
        if (hist[static_cast<std::size_t>(b)] > 0.0) {
            if (lo_bin < 0) lo_bin = b;
            hi_bin = b;
        }
    }
    TileMap map;
    if (lo_bin == hi_bin) return map;

    const double area = static_cast<double>((x1 - x0) * (y1 - y0));
    if (p.clip_limit > 0.0) {
        const double limit = std::max(1.0, p.clip_limit * area / p.bins);
        double excess = 0.0;
        for (double& h : hist) {
            if (h > limit) {
                excess += h - limit;
                h = limit;
            }
        }
        const double share = excess / p.bins;
        for (double& h : hist) h += share;
    }
    std::vector<double> cdf(hist.size());
    double acc = 0.0;
    for (std::size_t b = 0; b < hist.size(); ++b) {
        acc += hist[b];
        cdf[b] = acc;
    }
    const double c_lo = cdf[static_cast<std::size_t>(lo_bin)];
    const double c_hi = cdf[static_cast<std::size_t>(hi_bin)];
    map.identity = false;
    map.lut.resize(hist.size());
    for (std::size_t b = 0; b < hist.size(); ++b) {
        map.lut[b] = std::clamp((cdf[b] - c_lo) / (c_hi - c_lo), 0.0, 1.0);
    }
    return map;
}

}  // namespace

RasterImage enhance_contrast(const RasterImage& img, const ClaheParams& params) {
    if (params.tiles_x < 1 || params.tiles_y < 1 || params.bins < 2) {
        throw Error(ErrorCode::InvalidArgument, "CLAHE needs >= 1 tile per axis and >= 2 bins");
    }
    const int w = img.width();
    const int h = img.height();
    const int tx = std::min(params.tiles_x, w);
    const int ty = std::min(params.tiles_y, h);

    std::vector<int> xb(static_cast<std::size_t>(tx) + 1);
    std::vector<int> yb(static_cast<std::size_t>(ty) + 1);
    for (int i = 0; i <= tx; ++i) xb[static_cast<std::size_t>(i)] = static_cast<int>(static_cast<long long>(i) * w / tx);
    for (int i = 0; i <= ty; ++i) yb[static_cast<std::size_t>(i)] = static_cast<int>(static_cast<long long>(i) * h / ty);

    std::vector<TileMap> maps;
    maps.reserve(static_cast<std::size_t>(tx * ty));
    for (int j = 0; j < ty; ++j) {
        for (int i = 0; i < tx; ++i) {
            maps.push_back(build_tile_map(img, xb[static_cast<std::size_t>(i)], xb[static_cast<std::size_t>(i) + 1],
                                          yb[static_cast<std::size_t>(j)], yb[static_cast<std::size_t>(j) + 1], params));
        }
    }
    auto centre = [](const std::vector<int>& b, int i) {
        return 0.5 * (b[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i) + 1]) - 0.5;
    };
    // Locates the pair of tile centres surrounding a coordinate.
    auto bracket = [&](const std::vector<int>& b, int tiles, double pos, int& i0, int& i1, double& t) {
        if (pos <= centre(b, 0)) {
            i0 = i1 = 0;
            t = 0.0;
            return;
        }
        if (pos >= centre(b, tiles - 1)) {
            i0 = i1 = tiles - 1;
            t = 0.0;
            return;
        }
        int i = 0;
        while (i + 1 < tiles && centre(b, i + 1) <= pos) ++i;
        i0 = i;
        i1 = i + 1;
        t = (pos - centre(b, i0)) / (centre(b, i1) - centre(b, i0));
    };

    RasterImage out(w, h);
    for (int y = 0; y < h; ++y) {
        int j0, j1;
        double ty_frac;
        bracket(yb, ty, y, j0, j1, ty_frac);
        for (int x = 0; x < w; ++x) {
            int i0, i1;
            double tx_frac;
            bracket(xb, tx, x, i0, i1, tx_frac);
            const double v = img.at(x, y);
            const auto m = [&](int i, int j) {
                return maps[static_cast<std::size_t>(j * tx + i)].apply(v, params.bins);
            };
            const double a = m(i0, j0);
            const double b = m(i1, j0);
            const double c = m(i0, j1);
            const double d = m(i1, j1);
            if (a == b && a == c && a == d) {
                out.at(x, y) = std::clamp(a, 0.0, 1.0);
                continue;
            }
            const double top = (1.0 - tx_frac) * a + tx_frac * b;
            const double bottom = (1.0 - tx_frac) * c + tx_frac * d;
            out.at(x, y) = std::clamp((1.0 - ty_frac) * top + ty_frac * bottom, 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace circa::imaging
