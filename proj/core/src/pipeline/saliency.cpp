#include "circa/pipeline/saliency.hpp"

#include "circa/error.hpp"
#include "circa/pipeline/engine.hpp"

#include <algorithm>

namespace circa::pipeline {
namespace {

std::vector<int> positions(int extent, int patch, int stride) {
    std::vector<int> out{0};
    for (int p = stride; p + patch <= extent; p += stride) out.push_back(p);
    return out;
}

}  // namespace

imaging::RasterImage SaliencyMap::display(int width, int height) const {
    const auto xs = positions(width, patch, stride);
    const auto ys = positions(height, patch, stride);
    std::vector<double> sum(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0);
    std::vector<int> hits(sum.size(), 0);
    for (std::size_t r = 0; r < ys.size() && static_cast<int>(r) < drops.height(); ++r) {
        for (std::size_t c = 0; c < xs.size() && static_cast<int>(c) < drops.width(); ++c) {
            const double d = drops.at(static_cast<int>(c), static_cast<int>(r));
            for (int y = ys[r]; y < std::min(height, ys[r] + patch); ++y) {
                for (int x = xs[c]; x < std::min(width, xs[c] + patch); ++x) {
                    const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x);
                    sum[i] += d;
                    ++hits[i];
                }
            }
        }
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        sum[i] = hits[i] ? std::max(0.0, sum[i] / hits[i]) : 0.0;
        peak = std::max(peak, sum[i]);
    }
    if (peak > 0.0)
        for (double& v : sum) v /= peak;
    return imaging::RasterImage(width, height, std::move(sum));
}

SaliencyMap occlusion_saliency(const imaging::RasterImage& input, models::ModelBackend* classifier, int patch,
                               int stride, ClassLabel target) {
    if (!classifier) throw Error(ErrorCode::BackendUnavailable, "no image classifier backend for saliency", "saliency");
    if (patch < 1 || stride < 1) throw Error(ErrorCode::InvalidArgument, "saliency patch and stride must be >= 1", "saliency");
    const auto k = static_cast<std::size_t>(index_of(target));
    auto tensor = to_tensor(input);
    SaliencyMap map;
    map.patch = patch;
    map.stride = stride;
    map.target = target;
    map.baseline = probabilities_from_tensor(models::run_inference(*classifier, tensor), "saliency").p[k];
    const auto xs = positions(input.width(), patch, stride);
    const auto ys = positions(input.height(), patch, stride);
    map.drops = imaging::RasterImage(static_cast<int>(xs.size()), static_cast<int>(ys.size()));
    const auto w = static_cast<std::size_t>(input.width());
    for (std::size_t r = 0; r < ys.size(); ++r) {
        for (std::size_t c = 0; c < xs.size(); ++c) {
            auto occluded = tensor;
            for (int y = ys[r]; y < std::min(input.height(), ys[r] + patch); ++y)
                for (int x = xs[c]; x < std::min(input.width(), xs[c] + patch); ++x)
                    occluded.data[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = 0.0f;
            const double p = probabilities_from_tensor(models::run_inference(*classifier, occluded), "saliency").p[k];
            map.drops.at(static_cast<int>(c), static_cast<int>(r)) = map.baseline - p;
        }
    }
    return map;
}

}  // namespace circa::pipeline
