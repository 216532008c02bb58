#include "circa/radiomics/case_features.hpp"

#include "circa/error.hpp"
#include "circa/radiomics/catalog.hpp"
#include "circa/radiomics/discretize.hpp"
#include "circa/radiomics/first_order.hpp"

#include <algorithm>
#include <cmath>

namespace circa::radiomics {
namespace {

template <std::size_t N>
void put_block(std::vector<double>& out, std::size_t offset, const std::array<double, N>& block) {
    std::copy(block.begin(), block.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
}

}  // namespace

LevelImage level_image(const imaging::RasterImage& intensity, const segmentation::BinaryMask& mask, double bin_width) {
    if (intensity.width() != mask.width() || intensity.height() != mask.height()) {
        throw Error(ErrorCode::ShapeMismatch, "intensity and mask sizes differ");
    }
    std::vector<double> values;
    std::vector<std::size_t> where;
    const auto n = static_cast<std::size_t>(intensity.width()) * static_cast<std::size_t>(intensity.height());
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.bits()[i] == 0) continue;
        values.push_back(intensity.pixels()[i]);
        where.push_back(i);
    }
    LevelImage img;
    img.width = intensity.width();
    img.height = intensity.height();
    img.levels.assign(n, 0);
    if (values.empty()) return img;
    const Discretized d = discretize(values, bin_width);
    img.n_levels = d.n_levels;
    for (std::size_t k = 0; k < where.size(); ++k) img.levels[where[k]] = d.levels[k];
    return img;
}

FeatureVector extract_case_features(const imaging::RasterImage& intensity, const segmentation::Trisection& bands,
                                    double bin_width) {
    if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
    FeatureVector fv;
    fv.bin_width = bin_width;
    fv.values.assign(kCatalogSize, 0.0);

    for (auto seg : segmentation::kSegments) {
        const std::string tag = segmentation::segment_tag(seg);
        const std::size_t base = static_cast<std::size_t>(seg) * kFeaturesPerSegment;
        const auto& mask = bands[seg];
        const LevelImage img = level_image(intensity, mask, bin_width);
        if (img.n_levels == 0) {
            fv.warnings.push_back(tag + ": empty segment");
            continue;
        }
        std::vector<double> values;
        for (std::size_t i = 0; i < img.levels.size(); ++i)
            if (img.levels[i] > 0) values.push_back(intensity.pixels()[i]);

        std::size_t offset = base;
        put_block(fv.values, offset, first_order_features(values, bin_width));
        offset += 19;
        const auto guarded = [&](Family fam, std::size_t width, auto&& compute) {
            try {
                put_block(fv.values, offset, compute());
            } catch (const Error& e) {
                if (e.code() != ErrorCode::EmptySegment) throw;
                fv.warnings.push_back(tag + ": " + std::string(family_tag(fam)) + " degenerate");
            }
            offset += width;
        };
        guarded(Family::Glcm, 24, [&] { return glcm_features(img); });
        guarded(Family::Glrlm, 16, [&] { return glrlm_features(img); });
        guarded(Family::Glszm, 16, [&] { return glszm_features(img); });
        guarded(Family::Ngtdm, 12, [&] { return ngtdm_features(img); });

        bool non_finite = false;
        for (std::size_t i = base; i < base + kFeaturesPerSegment; ++i) {
            if (!std::isfinite(fv.values[i])) {
                fv.values[i] = 0.0;
                non_finite = true;
            }
        }
        if (non_finite) fv.warnings.push_back(tag + ": non-finite feature replaced by 0");
    }
    return fv;
}

}  // namespace circa::radiomics
