#pragma once

#include "circa/imaging/raster.hpp"

#include <span>

namespace circa::imaging {

inline constexpr double kDefaultLowQuantile = 0.0025;
inline constexpr double kDefaultHighQuantile = 0.9975;

/// Nearest-rank quantile of a sample: element ceil(q*n) (1-based) of the
/// sorted values, with q=0 mapping to the minimum.
double nearest_rank_quantile(std::span<const double> values, double q);

/// Clips to the [low_q, high_q] nearest-rank quantiles and rescales the
/// clipped range to [0,1]. A zero clipped range yields an all-zero image.
RasterImage standardize_intensity(const RasterImage& img, double low_q = kDefaultLowQuantile,
                                  double high_q = kDefaultHighQuantile);

struct ClaheParams {
    int tiles_x = 8;
    int tiles_y = 8;
    double clip_limit = 2.0;  ///< <= 0 disables clipping
    int bins = 256;
};

/// Contrast-limited adaptive histogram equalization.
///
/// Each tile maps its lowest occupied bin to 0 and its highest to 1 through
/// the (clipped, redistributed) cumulative histogram. Tiles holding a single
/// gray level map values to themselves, so constant images are fixed points.
/// Per-pixel output is the bilinear blend of the four nearest tile mappings.
RasterImage enhance_contrast(const RasterImage& img, const ClaheParams& params = {});

}  // namespace circa::imaging
