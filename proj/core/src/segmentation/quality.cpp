#include "circa/segmentation/quality.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace circa::segmentation {

MaskMetrics mask_metrics(const BinaryMask& mask) {
    const std::size_t n = mask.count();
    if (n == 0) throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");

    double sx = 0.0;
    double sy = 0.0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.at(x, y)) {
                sx += x;
                sy += y;
            }
        }
    }
    const double cx = sx / static_cast<double>(n);
    const double cy = sy / static_cast<double>(n);
    double mu20 = 0.0;
    double mu02 = 0.0;
    double mu11 = 0.0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(x, y)) continue;
            const double dx = x - cx;
            const double dy = y - cy;
            mu20 += dx * dx;
            mu02 += dy * dy;
            mu11 += dx * dy;
        }
    }
    mu20 /= static_cast<double>(n);
    mu02 /= static_cast<double>(n);
    mu11 /= static_cast<double>(n);

    const double half_trace = 0.5 * (mu20 + mu02);
    const double root = std::sqrt(0.25 * (mu20 - mu02) * (mu20 - mu02) + mu11 * mu11);
    const double l1 = half_trace + root;
    const double l2 = std::max(0.0, half_trace - root);

    MaskMetrics m;
    m.eccentricity = l1 > 0.0 ? std::sqrt(std::clamp(1.0 - l2 / l1, 0.0, 1.0)) : 0.0;
    m.orientation_deg = std::clamp(0.5 * std::atan2(2.0 * mu11, mu20 - mu02) * 180.0 / std::numbers::pi, -90.0, 90.0);
    m.area_fraction = static_cast<double>(n) / static_cast<double>(mask.size());
    const std::size_t hull = convex_hull_fill(mask).count();
    m.solidity = std::clamp(static_cast<double>(n) / static_cast<double>(hull), 0.0, 1.0);
    return m;
}

QualityScore quality_score(const MaskMetrics& m) {
    QualityScore q;
    q.components = {std::clamp(m.eccentricity, 0.0, 1.0),
                    std::clamp(1.0 - std::abs(m.orientation_deg) / 90.0, 0.0, 1.0),
                    std::clamp(m.area_fraction, 0.0, 1.0), std::clamp(m.solidity, 0.0, 1.0)};
    q.value = (q.components[0] + q.components[1] + q.components[2] + q.components[3]) / 4.0;
    return q;
}

SizeCheck too_small_check(const BinaryMask& mask, int min_dimension) {
    const auto box = mask.bbox();
    if (!box) return SizeCheck{};
    SizeCheck check;
    check.width = box->width();
    check.height = box->height();
    check.accepted = check.width >= min_dimension && check.height >= min_dimension;
    return check;
}

Json to_json(const MaskMetrics& m) {
    return Json{{"eccentricity", m.eccentricity},
                {"orientation_deg", m.orientation_deg},
                {"area_fraction", m.area_fraction},
                {"solidity", m.solidity}};
}

Json to_json(const QualityScore& q) {
    return Json{{"value", q.value},
                {"components",
                 Json{{"eccentricity", q.components[0]},
                      {"orientation", q.components[1]},
                      {"area", q.components[2]},
                      {"solidity", q.components[3]}}}};
}

}  // namespace circa::segmentation
