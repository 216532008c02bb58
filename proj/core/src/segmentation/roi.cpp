#include "circa/segmentation/roi.hpp"

#include "circa/error.hpp"
#include "circa/imaging/intensity.hpp"
#include "circa/model_io.hpp"

#include <algorithm>
#include <cmath>

namespace circa::segmentation {

TrainStats compute_train_stats(std::span<const imaging::RasterImage> intensities) {
    if (intensities.empty()) throw Error(ErrorCode::EmptyDataset, "train statistics need at least one image");
    TrainStats stats;
    stats.width = intensities.front().width();
    stats.height = intensities.front().height();
    const std::size_t n = intensities.front().size();
    stats.mean.assign(n, 0.0);
    stats.std.assign(n, 0.0);
    for (const auto& img : intensities) {
        if (img.width() != stats.width || img.height() != stats.height) {
            throw Error(ErrorCode::ShapeMismatch, "train statistics need equally sized images");
        }
        const auto px = img.pixels();
        for (std::size_t i = 0; i < n; ++i) stats.mean[i] += px[i];
    }
    const auto count = static_cast<double>(intensities.size());
    for (double& m : stats.mean) m /= count;
    for (const auto& img : intensities) {
        const auto px = img.pixels();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = px[i] - stats.mean[i];
            stats.std[i] += d * d;
        }
    }
    for (double& s : stats.std) s = std::sqrt(s / count);
    return stats;
}

void save_train_stats(const std::filesystem::path& path, const TrainStats& stats) {
    const std::size_t n = static_cast<std::size_t>(stats.width) * static_cast<std::size_t>(stats.height);
    if (stats.mean.size() != n || stats.std.size() != n) throw Error(ErrorCode::ShapeMismatch, "train statistics shape");
    std::vector<float> payload;
    payload.reserve(2 * n);
    for (double v : stats.mean) payload.push_back(static_cast<float>(v));
    for (double v : stats.std) payload.push_back(static_cast<float>(v));
    save_model_file(path, "train_stats", Json{{"shape", {2, stats.height, stats.width}}}, payload);
}

TrainStats load_train_stats(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "train_stats");
    const auto& shape = file.meta.at("shape");
    if (!shape.is_array() || shape.size() != 3 || shape[0].get<int>() != 2) {
        throw Error(ErrorCode::CorruptModel, "train_stats shape must be [2, H, W]");
    }
    TrainStats stats;
    stats.height = shape[1].get<int>();
    stats.width = shape[2].get<int>();
    const std::size_t n = static_cast<std::size_t>(stats.width) * static_cast<std::size_t>(stats.height);
    if (file.payload.size() != 2 * n) throw Error(ErrorCode::CorruptModel, "train_stats payload size mismatch");
    stats.mean.assign(file.payload.begin(), file.payload.begin() + static_cast<std::ptrdiff_t>(n));
    stats.std.assign(file.payload.begin() + static_cast<std::ptrdiff_t>(n), file.payload.end());
    stats.checksum = file.payload_sha256;
    return stats;
}

RepositionResult reposition_lungs(const imaging::RasterImage& img, const BinaryMask& mask, int gap) {
    if (img.width() != mask.width() || img.height() != mask.height()) {
        throw Error(ErrorCode::ShapeMismatch, "image and mask dimensions differ");
    }
    if (gap < 0) throw Error(ErrorCode::InvalidArgument, "lung gap must be >= 0");
    const auto comps = connected_components(mask, 8);
    if (comps.empty()) throw Error(ErrorCode::EmptyMask, "cannot reposition an empty mask");
    const auto w = static_cast<std::size_t>(img.width());

    if (comps.size() != 2) {
        const BoundingBox box = *mask.bbox();
        RepositionResult r{imaging::RasterImage(box.width(), box.height()), BinaryMask(box.width(), box.height()), false};
        for (int y = box.y0; y < box.y1; ++y) {
            for (int x = box.x0; x < box.x1; ++x) {
                if (!mask.at(x, y)) continue;
                r.image.at(x - box.x0, y - box.y0) = img.at(x, y);
                r.mask.set(x - box.x0, y - box.y0, true);
            }
        }
        return r;
    }

    const bool first_is_left = comps[0].bbox.x0 <= comps[1].bbox.x0;
    const Component& left = first_is_left ? comps[0] : comps[1];
    const Component& right = first_is_left ? comps[1] : comps[0];
    const int y0 = std::min(left.bbox.y0, right.bbox.y0);
    const int y1 = std::max(left.bbox.y1, right.bbox.y1);
    const int out_w = left.bbox.width() + gap + right.bbox.width();
    const int right_shift = left.bbox.width() + gap - right.bbox.x0;

    RepositionResult r{imaging::RasterImage(out_w, y1 - y0), BinaryMask(out_w, y1 - y0), true};
    const auto place = [&](const Component& c, int dx) {
        for (std::size_t idx : c.pixels) {
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            r.image.at(x + dx, y - y0) = img.at(x, y);
            r.mask.set(x + dx, y - y0, true);
        }
    };
    place(left, -left.bbox.x0);
    place(right, right_shift);
    return r;
}

RoiImage build_roi(const imaging::RasterImage& img, const BinaryMask& mask, const TrainStats* stats,
                   const RoiParams& params) {
    if (img.width() != mask.width() || img.height() != mask.height()) {
        throw Error(ErrorCode::ShapeMismatch, "image and mask dimensions differ");
    }
    if (params.size < 1) throw Error(ErrorCode::InvalidArgument, "ROI size must be >= 1");
    std::vector<double> lung;
    lung.reserve(mask.count());
    const auto bits = mask.bits();
    const auto src = img.pixels();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) lung.push_back(src[i]);
    }
    if (lung.empty()) throw Error(ErrorCode::EmptyMask, "ROI mask has no lung pixels");

    const double lo = imaging::nearest_rank_quantile(lung, params.low_q);
    const double hi = imaging::nearest_rank_quantile(lung, params.high_q);
    imaging::RasterImage masked(img.width(), img.height());
    auto dst = masked.pixels();
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] && hi > lo) dst[i] = std::clamp((std::clamp(src[i], lo, hi) - lo) / (hi - lo), 0.0, 1.0);
    }

    const RepositionResult moved = reposition_lungs(masked, mask, params.min_gap);
    auto sized = imaging::resize(moved.image, params.size, params.size, imaging::ResizeMode::FitPad);
    const auto sized_mask = imaging::resize(to_raster(moved.mask), params.size, params.size, imaging::ResizeMode::FitPad);

    RoiImage roi{imaging::RasterImage(params.size, params.size), std::move(sized.image),
                 binarize(sized_mask.image, 0.5), sized.padding,
                 BoundingBox{0, 0, moved.image.width(), moved.image.height()}, moved.repositioned, false, {}};
    auto inten = roi.intensity.pixels();
    const auto roi_bits = roi.mask.bits();
    for (std::size_t i = 0; i < inten.size(); ++i) inten[i] = roi_bits[i] ? std::clamp(inten[i], 0.0, 1.0) : 0.0;

    auto out = roi.pixels.pixels();
    if (stats != nullptr) {
        if (stats->width != params.size || stats->height != params.size ||
            stats->mean.size() != inten.size() || stats->std.size() != inten.size()) {
            throw Error(ErrorCode::ShapeMismatch, "train statistics do not match the ROI size");
        }
        for (std::size_t i = 0; i < inten.size(); ++i) {
            out[i] = (inten[i] - stats->mean[i]) / std::max(stats->std[i], kStdFloor);
        }
        roi.standardized = true;
        roi.norm_params = stats->checksum.empty() ? "in-memory" : stats->checksum;
    } else {
        std::copy(inten.begin(), inten.end(), out.begin());
    }
    return roi;
}

}  // namespace circa::segmentation
