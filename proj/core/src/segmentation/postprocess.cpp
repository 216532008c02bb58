#include "circa/segmentation/postprocess.hpp"

#include "circa/error.hpp"

#include <algorithm>

namespace circa::segmentation {
namespace {

BinaryMask keep_largest(const BinaryMask& mask, int keep) {
    auto comps = connected_components(mask, 8);
    if (comps.size() > static_cast<std::size_t>(keep)) comps.resize(static_cast<std::size_t>(keep));
    return mask_from_components(mask.width(), mask.height(), comps);
}

}  // namespace

BinaryMask postprocess_mask(const imaging::RasterImage& prob_map, const PostprocessParams& params) {
    if (params.keep_components < 1) throw Error(ErrorCode::InvalidArgument, "must keep at least one component");
    BinaryMask mask = binarize(prob_map, params.threshold);
    if (mask.count() == 0) throw Error(ErrorCode::NoLungFound, "no pixel reaches the segmentation threshold");

    mask = keep_largest(mask, params.keep_components);
    if (params.disc_radius > 0) mask = close(open(mask, params.disc_radius), params.disc_radius);

    // Opening can split or erase thin components.
    auto comps = connected_components(mask, 8);
    if (comps.empty()) throw Error(ErrorCode::NoLungFound, "no lung region survives morphological filtering");
    if (comps.size() > static_cast<std::size_t>(params.keep_components)) {
        comps.resize(static_cast<std::size_t>(params.keep_components));
    }

    BinaryMask out(mask.width(), mask.height());
    for (const auto& comp : comps) {
        const Component single[] = {comp};
        const BinaryMask hull = convex_hull_fill(mask_from_components(mask.width(), mask.height(), single));
        auto dst = out.bits();
        const auto src = hull.bits();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] |= src[i];
    }
    if (connected_components(out, 8).size() < comps.size()) out = convex_hull_fill(out);
    return out;
}

}  // namespace circa::segmentation
