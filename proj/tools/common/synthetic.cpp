#include "synthetic.hpp"

#include "circa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace circa::synthetic {
namespace {

double ellipse_r2(double x, double y, double cx, double cy, double ax, double ay) {
    const double dx = (x - cx) / ax;
    const double dy = (y - cy) / ay;
    return dx * dx + dy * dy;
}

double soft(double r2, double edge) { return std::clamp((1.0 - r2) / edge, 0.0, 1.0); }

}  // namespace

imaging::RasterImage make_chest(const ChestParams& p) {
    Rng rng(p.seed);
    const double w = p.width, h = p.height;
    const double jitter_x = rng.uniform(-0.02, 0.02) * w;
    const double jitter_y = rng.uniform(-0.02, 0.02) * h;
    const double lung_ax = 0.15 * w, lung_ay = 0.31 * h;
    const double left_cx = 0.33 * w + jitter_x, right_cx = 0.67 * w + jitter_x;
    const double lung_cy = 0.49 * h + jitter_y;
    const double rib_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    struct Blob {
        double cx, cy, r, amp;
    };
    std::vector<Blob> blobs;
    const double sev = p.severity;
    if (p.label == ClassLabel::Pneumonia) {
        const int n = 2 + static_cast<int>(rng.below(2));
        for (int i = 0; i < n; ++i) {
            const double cx = (rng.uniform() < 0.5 ? left_cx : right_cx) + rng.uniform(-0.4, 0.4) * lung_ax;
            blobs.push_back({cx, lung_cy + rng.uniform(0.25, 0.6) * lung_ay, rng.uniform(0.25, 0.4) * lung_ax, 0.35 * sev});
        }
    } else if (p.label == ClassLabel::Covid) {
        for (double side : {-1.0, 1.0}) {
            const double cx = side < 0 ? left_cx - 0.6 * lung_ax : right_cx + 0.6 * lung_ax;
            for (int i = 0; i < 3; ++i) {
                blobs.push_back({cx, lung_cy + rng.uniform(-0.3, 0.7) * lung_ay, rng.uniform(0.3, 0.5) * lung_ax, 0.18 * sev});
            }
        }
    }

    imaging::RasterImage img(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            const double fx = x + 0.5, fy = y + 0.5;
            double v = 0.04;
            v += 0.5 * soft(ellipse_r2(fx, fy, 0.5 * w, 0.55 * h, 0.46 * w, 0.52 * h), 0.15);
            v += 0.25 * soft(std::pow(std::abs(fx - 0.5 * w - jitter_x) / (0.045 * w), 2.0), 0.5);
            double lung = 0.0;
            for (double cx : {left_cx, right_cx}) lung = std::max(lung, soft(ellipse_r2(fx, fy, cx, lung_cy, lung_ax, lung_ay), 0.2));
            if (lung > 0.0) {
                const double ribs = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fy / (0.075 * h) + rib_phase +
                                                         0.8 * std::abs(fx - 0.5 * w) / w);
                v -= lung * (0.38 - 0.08 * ribs);
                for (const auto& b : blobs) {
                    const double d2 = ((fx - b.cx) * (fx - b.cx) + (fy - b.cy) * (fy - b.cy)) / (b.r * b.r);
                    v += lung * b.amp * std::exp(-d2);
                }
            }
            v += 0.02 * rng.normal();
            img.at(x, y) = std::clamp(v, 0.0, 1.0);
        }
    }
    return img;
}

}  // namespace circa::synthetic
