#include "circa/imaging/intensity.hpp"
#include "circa/imaging/resample.hpp"
#include "circa/rng.hpp"
#include "circa/segmentation/mask.hpp"
#include "circa/segmentation/outlier.hpp"
#include "circa/segmentation/postprocess.hpp"
#include "circa/segmentation/quality.hpp"
#include "circa/segmentation/roi.hpp"
#include "circa/segmentation/trisection.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace circa;
using namespace circa::segmentation;
using imaging::RasterImage;

namespace {

void fill_rect(RasterImage& img, int x0, int y0, int w, int h, double v) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) img.at(x, y) = v;
}

void fill_rect(BinaryMask& m, int x0, int y0, int w, int h) {
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) m.set(x, y, true);
}

BinaryMask disc_mask(int size, double cx, double cy, double r) {
    BinaryMask m(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y, true);
    return m;
}

std::vector<std::vector<int>> grid_of(const BinaryMask& m) {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(m.height()), std::vector<int>(static_cast<std::size_t>(m.width())));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) g[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = m.at(x, y);
    return g;
}

bool is_subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.bits()[i] && !b.bits()[i]) return false;
    return true;
}

}  // namespace

TEST(Mask, ComponentsMatchFloodFillOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m(40, 30);
        for (auto& b : m.bits()) b = rng.uniform() < 0.45 ? 1 : 0;
        const auto comps = connected_components(m);
        const auto expected = oracle::component_sizes(grid_of(m));
        ASSERT_EQ(comps.size(), expected.size());
        for (std::size_t i = 0; i < comps.size(); ++i) EXPECT_EQ(comps[i].area(), static_cast<std::size_t>(expected[i]));
    }
}

TEST(Mask, DiscOffsetsRadiusTwoHasThirteenPixels) { EXPECT_EQ(disc_offsets(2).size(), 13u); }

TEST(Mask, HullFillOfConvexShapeIsIdentity) {
    const auto d = disc_mask(60, 30, 30, 20);
    EXPECT_EQ(convex_hull_fill(d), d);
    BinaryMask rect(20, 20);
    fill_rect(rect, 3, 4, 10, 7);
    EXPECT_EQ(convex_hull_fill(rect), rect);
}

TEST(Mask, HullFillClosesConcavity) {
    BinaryMask l(10, 10);
    fill_rect(l, 0, 0, 2, 10);
    fill_rect(l, 0, 8, 10, 2);
    const auto hull = convex_hull_fill(l);
    EXPECT_TRUE(hull.at(5, 5));
    EXPECT_FALSE(hull.at(8, 2));
    EXPECT_TRUE(is_subset(l, hull));
}

TEST(Mask, HullFillDegenerateSegments) {
    BinaryMask line(10, 10);
    line.set(1, 1, true);
    line.set(7, 4, true);
    const auto hull = convex_hull_fill(line);
    EXPECT_TRUE(hull.at(3, 2));  // (3,2) lies on the segment
    EXPECT_TRUE(hull.at(5, 3));
    EXPECT_EQ(hull.count(), 4u);
}

TEST(Mask, PngRoundTripIsExact) {
    Rng rng(2);
    BinaryMask m(37, 23);
    for (auto& b : m.bits()) b = rng.uniform() < 0.5 ? 1 : 0;
    EXPECT_EQ(decode_mask_png(encode_mask_png(m)), m);
}

TEST(Postprocess, KeepsTwoLargestBlobs) {
    RasterImage prob(120, 80);
    fill_rect(prob, 5, 5, 25, 20, 0.9);   // 500 px
    fill_rect(prob, 50, 5, 20, 20, 0.8);  // 400 px
    fill_rect(prob, 90, 60, 5, 2, 0.95);  // 10 px
    const auto mask = postprocess_mask(prob);
    const auto comps = connected_components(mask);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[0].bbox, (BoundingBox{5, 5, 30, 25}));
    EXPECT_EQ(comps[1].bbox, (BoundingBox{50, 5, 70, 25}));
    EXPECT_FALSE(mask.at(91, 60));
    BinaryMask blobs(120, 80);
    fill_rect(blobs, 5, 5, 25, 20);
    fill_rect(blobs, 50, 5, 20, 20);
    EXPECT_TRUE(is_subset(mask, blobs));
    // Only the three corner pixels per rectangle corner are lost to the disc opening.
    EXPECT_EQ(mask.count(), 900u - 8u * 3u);
}

TEST(Postprocess, SolidRectangleUnchangedAwayFromCorners) {
    RasterImage prob(80, 80);
    fill_rect(prob, 20, 20, 40, 40, 1.0);
    const auto mask = postprocess_mask(prob, 0.5);
    for (int y = 0; y < 80; ++y) {
        for (int x = 0; x < 80; ++x) {
            const bool inside = x >= 20 && x < 60 && y >= 20 && y < 60;
            const int dx = std::min(x - 20, 59 - x);
            const int dy = std::min(y - 20, 59 - y);
            const bool corner_cut = inside && dx + dy < 2;
            EXPECT_EQ(mask.at(x, y), inside && !corner_cut) << x << "," << y;
        }
    }
}

TEST(Postprocess, AllZeroMapHasNoLung) {
    EXPECT_CIRCA_ERROR(postprocess_mask(RasterImage(64, 64)), ErrorCode::NoLungFound);
}

TEST(Postprocess, RandomMapsYieldAtMostTwoConvexComponents) {
    Rng rng(3);
    for (int trial = 0; trial < 15; ++trial) {
        RasterImage prob(64, 64);
        // Blocky noise so that some components survive the opening.
        for (int by = 0; by < 8; ++by)
            for (int bx = 0; bx < 8; ++bx) fill_rect(prob, bx * 8, by * 8, 8, 8, rng.uniform());
        BinaryMask mask(64, 64);
        try {
            mask = postprocess_mask(prob);
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NoLungFound);
            continue;
        }
        const auto comps = connected_components(mask);
        ASSERT_LE(comps.size(), 2u);
        for (const auto& c : comps) {
            const Component one[] = {c};
            const auto cm = mask_from_components(64, 64, one);
            EXPECT_EQ(convex_hull_fill(cm), cm);
        }
    }
}

TEST(Quality, CircleMetrics) {
    const auto m = mask_metrics(disc_mask(200, 99.5, 99.5, 50));
    EXPECT_NEAR(m.eccentricity, 0.0, 0.05);
    EXPECT_GE(m.solidity, 0.98);
    EXPECT_NEAR(m.area_fraction, std::numbers::pi * 2500.0 / 40000.0, 0.005);
}

TEST(Quality, HorizontalBarMetrics) {
    BinaryMask bar(120, 20);
    fill_rect(bar, 10, 8, 100, 4);
    const auto m = mask_metrics(bar);
    EXPECT_NEAR(m.orientation_deg, 0.0, 1e-12);
    EXPECT_GE(m.eccentricity, 0.99);
    EXPECT_DOUBLE_EQ(m.solidity, 1.0);
}

TEST(Quality, DiagonalOrientationSign) {
    BinaryMask diag(50, 50);
    for (int i = 0; i < 40; ++i) diag.set(5 + i, 5 + i, true);
    EXPECT_NEAR(mask_metrics(diag).orientation_deg, 45.0, 1e-9);
}

TEST(Quality, EmptyMaskThrows) { EXPECT_CIRCA_ERROR(mask_metrics(BinaryMask(5, 5)), ErrorCode::EmptyMask); }

TEST(Quality, ScoreArithmetic) {
    EXPECT_DOUBLE_EQ(quality_score({1.0, 0.0, 1.0, 1.0}).value, 1.0);
    EXPECT_DOUBLE_EQ(quality_score({0.0, 90.0, 0.0, 0.0}).value, 0.0);
    EXPECT_NEAR(quality_score({0.8, 18.0, 0.3, 0.9}).value, 0.70, 1e-12);
    EXPECT_NEAR(quality_score({0.8, -18.0, 0.3, 0.9}).components[1], 0.8, 1e-12);
}

TEST(Quality, ScoreMonotoneInEachComponent) {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        MaskMetrics m{rng.uniform(), rng.uniform(-90, 90), rng.uniform(), rng.uniform()};
        const double base = quality_score(m).value;
        MaskMetrics up = m;
        up.eccentricity = std::min(1.0, m.eccentricity + 0.1);
        EXPECT_GE(quality_score(up).value, base);
        up = m;
        up.orientation_deg = m.orientation_deg * 0.5;
        EXPECT_GE(quality_score(up).value, base);
        up = m;
        up.area_fraction = std::min(1.0, m.area_fraction + 0.1);
        EXPECT_GE(quality_score(up).value, base);
        up = m;
        up.solidity = std::min(1.0, m.solidity + 0.1);
        EXPECT_GE(quality_score(up).value, base);
    }
}

TEST(SizeGate, BoundaryRule) {
    BinaryMask m(500, 500);
    fill_rect(m, 0, 0, 299, 400);
    auto c = too_small_check(m);
    EXPECT_FALSE(c.accepted);
    EXPECT_EQ(c.width, 299);
    EXPECT_EQ(c.height, 400);
    BinaryMask ok(500, 500);
    fill_rect(ok, 10, 10, 300, 300);
    EXPECT_TRUE(too_small_check(ok).accepted);
    EXPECT_FALSE(too_small_check(BinaryMask(10, 10)).accepted);
}

TEST(Outlier, SymmetricReducesToTukey) {
    std::vector<double> xs;
    for (int i = 1; i <= 101; ++i) xs.push_back(i);
    const auto b = adjusted_boxplot(xs);
    EXPECT_EQ(b.medcouple, 0.0);
    EXPECT_EQ(oracle::medcouple(xs), 0.0);
    EXPECT_DOUBLE_EQ(b.lower_fence, 26.0 - 1.5 * 50.0);
    EXPECT_DOUBLE_EQ(skewed_outlier_threshold(xs), b.q1 - 1.5 * b.iqr);
}

TEST(Outlier, MedcoupleMatchesBruteForce) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> xs(4 + rng.below(57));
        for (double& x : xs) x = std::exp(rng.normal());
        EXPECT_NEAR(medcouple(xs), oracle::medcouple(xs), 1e-9) << "n=" << xs.size();
    }
}

TEST(Outlier, MedcoupleWithTiesMatchesBruteForce) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> xs(4 + rng.below(40));
        for (double& x : xs) x = static_cast<double>(rng.below(6));
        if (std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs[0]; })) continue;
        const double fast = medcouple(xs);
        // The margin shortcut returns +-1 exactly when the median sits at an extreme.
        std::vector<double> s = xs;
        std::sort(s.begin(), s.end());
        const double med = s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]);
        if (med == s.front() || med == s.back()) continue;
        EXPECT_NEAR(fast, oracle::medcouple(xs), 1e-9);
    }
}

TEST(Outlier, RightSkewUsesAsymmetricFence) {
    std::vector<double> xs = {1, 1.1, 1.2, 1.3, 1.5, 2, 3, 5, 8, 13, 21};
    const auto b = adjusted_boxplot(xs);
    ASSERT_GT(b.medcouple, 0.0);
    EXPECT_NEAR(b.lower_fence, b.q1 - 1.5 * std::exp(-4.0 * b.medcouple) * b.iqr, 1e-15);
}

TEST(Outlier, TooFewSamples) {
    const std::vector<double> xs = {1, 2, 3};
    EXPECT_CIRCA_ERROR(skewed_outlier_threshold(xs), ErrorCode::TooFewSamples);
}

TEST(Trisection, EvenAndRemainderSplits) {
    BinaryMask m(20, 400);
    fill_rect(m, 2, 10, 10, 300);
    auto t = lung_trisection(m);
    EXPECT_EQ(t.band_heights, (std::array<int, 3>{100, 100, 100}));
    BinaryMask m2(20, 400);
    fill_rect(m2, 2, 10, 10, 301);
    t = lung_trisection(m2);
    EXPECT_EQ(t.band_heights, (std::array<int, 3>{100, 100, 101}));
    EXPECT_TRUE(t[LungSegment::Lower].at(5, 310));
    EXPECT_FALSE(t[LungSegment::Middle].at(5, 310));
}

TEST(Trisection, PartitionProperty) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m(30, 30);
        for (auto& b : m.bits()) b = rng.uniform() < 0.3 ? 1 : 0;
        if (m.count() == 0) continue;
        const auto t = lung_trisection(m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const int hits = t.bands[0].bits()[i] + t.bands[1].bits()[i] + t.bands[2].bits()[i];
            EXPECT_EQ(hits, m.bits()[i]);
        }
    }
    EXPECT_CIRCA_ERROR(lung_trisection(BinaryMask(4, 4)), ErrorCode::EmptyMask);
}

TEST(Roi, TwoRectanglesRepositionedToMinimumGap) {
    RasterImage img(400, 200, 0.5);
    BinaryMask mask(400, 200);
    fill_rect(mask, 20, 30, 50, 100);
    fill_rect(mask, 270, 50, 50, 100);
    const auto r = reposition_lungs(img, mask, 8);
    EXPECT_TRUE(r.repositioned);
    EXPECT_EQ(r.image.width(), 108);
    EXPECT_EQ(r.image.height(), 120);
    for (int y = 0; y < 120; ++y)
        for (int x = 50; x < 58; ++x) EXPECT_FALSE(r.mask.at(x, y));
    EXPECT_TRUE(r.mask.at(49, 0));
    EXPECT_TRUE(r.mask.at(58, 20));
    EXPECT_FALSE(r.mask.at(58, 19));
    EXPECT_TRUE(r.mask.at(107, 119));
    const auto comps = connected_components(r.mask);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_EQ(comps[1].bbox.x0 - comps[0].bbox.x1, 8);
}

TEST(Roi, FullMaskIsFitPadOfRestandardizedImage) {
    const auto img = test::random_raster(300, 200, 8);
    BinaryMask full(300, 200);
    for (auto& b : full.bits()) b = 1;
    const auto roi = build_roi(img, full);
    ASSERT_EQ(roi.pixels.width(), 512);
    ASSERT_EQ(roi.pixels.height(), 512);
    const auto restd = imaging::standardize_intensity(img, kRoiLowQuantile, kRoiHighQuantile);
    const auto expected = imaging::resize(restd, 512, 512, imaging::ResizeMode::FitPad);
    EXPECT_EQ(roi.padding, expected.padding);
    for (int y = 0; y < 512; ++y) {
        for (int x = 0; x < 512; ++x) {
            if (roi.mask.at(x, y)) {
                EXPECT_NEAR(roi.pixels.at(x, y), expected.image.at(x, y), 1e-12);
            } else {
                EXPECT_EQ(roi.pixels.at(x, y), 0.0);
            }
        }
    }
    EXPECT_FALSE(roi.repositioned);
}

TEST(Roi, IdentityStatsLeavePixelsUnchanged) {
    const auto img = test::random_raster(128, 128, 9);
    BinaryMask mask(128, 128);
    fill_rect(mask, 10, 10, 40, 100);
    fill_rect(mask, 70, 15, 40, 100);
    TrainStats stats;
    stats.mean.assign(512 * 512, 0.0);
    stats.std.assign(512 * 512, 1.0);
    const auto plain = build_roi(img, mask);
    const auto standardized = build_roi(img, mask, &stats);
    EXPECT_EQ(plain.pixels, standardized.pixels);
    EXPECT_TRUE(standardized.standardized);
}

TEST(Roi, BackgroundEqualsStandardizedZero) {
    const auto img = test::random_raster(100, 100, 10);
    BinaryMask mask(100, 100);
    fill_rect(mask, 20, 20, 30, 60);
    TrainStats stats;
    stats.mean.assign(512 * 512, 0.25);
    stats.std.assign(512 * 512, 0.0);
    const auto roi = build_roi(img, mask, &stats);
    for (int y = 0; y < 512; ++y)
        for (int x = 0; x < 512; ++x)
            if (!roi.mask.at(x, y)) ASSERT_EQ(roi.pixels.at(x, y), -0.25 / kStdFloor);
}

TEST(Roi, OutputAlways512) {
    Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const int w = 20 + static_cast<int>(rng.below(300));
        const int h = 20 + static_cast<int>(rng.below(300));
        BinaryMask mask(w, h);
        fill_rect(mask, 0, 0, std::max(1, w / 3), std::max(1, h / 2));
        const auto roi = build_roi(test::random_raster(w, h, rng.next()), mask);
        EXPECT_EQ(roi.pixels.width(), 512);
        EXPECT_EQ(roi.pixels.height(), 512);
    }
    EXPECT_CIRCA_ERROR(build_roi(RasterImage(10, 10), BinaryMask(10, 10)), ErrorCode::EmptyMask);
}

TEST(Roi, TrainStatsRoundTrip) {
    std::vector<RasterImage> imgs = {test::random_raster(512, 512, 12), test::random_raster(512, 512, 13)};
    const auto stats = compute_train_stats(imgs);
    EXPECT_NEAR(stats.mean[7], 0.5 * (imgs[0].pixels()[7] + imgs[1].pixels()[7]), 1e-15);
    EXPECT_NEAR(stats.std[7], 0.5 * std::abs(imgs[0].pixels()[7] - imgs[1].pixels()[7]), 1e-15);
    const auto path = test::scratch_dir("stats") / "train_stats.bin";
    save_train_stats(path, stats);
    const auto loaded = load_train_stats(path);
    EXPECT_EQ(loaded.width, 512);
    EXPECT_FALSE(loaded.checksum.empty());
    EXPECT_NEAR(loaded.mean[7], stats.mean[7], 1e-7);
}
