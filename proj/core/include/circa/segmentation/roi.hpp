#pragma once

#include "circa/imaging/raster.hpp"
#include "circa/imaging/resample.hpp"
#include "circa/segmentation/mask.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace circa::segmentation {

inline constexpr int kRoiSize = 512;
inline constexpr double kRoiLowQuantile = 0.0005;
inline constexpr double kRoiHighQuantile = 0.9995;
inline constexpr double kStdFloor = 1e-6;

/// Per-pixel mean/std of ROI intensities over a training corpus.
struct TrainStats {
    int width = kRoiSize;
    int height = kRoiSize;
    std::vector<double> mean;
    std::vector<double> std;
    std::string checksum;  ///< payload checksum of the persisted file, if loaded
};

/// Population mean and std per pixel. All rasters must share dimensions.
TrainStats compute_train_stats(std::span<const imaging::RasterImage> intensities);

/// Stored as a model container of type "train_stats" holding 2 x H x W float32
/// values (mean plane then std plane) with the shape in the header.
void save_train_stats(const std::filesystem::path& path, const TrainStats& stats);
TrainStats load_train_stats(const std::filesystem::path& path);

struct RoiParams {
    double low_q = kRoiLowQuantile;
    double high_q = kRoiHighQuantile;
    int min_gap = 8;
    int size = kRoiSize;
};

struct RoiImage {
    imaging::RasterImage pixels;     ///< classifier input (per-pixel standardized when stats are given)
    imaging::RasterImage intensity;  ///< [0,1] lung intensities before per-pixel standardization
    BinaryMask mask;                 ///< lung footprint in the ROI frame
    imaging::Padding padding;
    BoundingBox crop;                ///< joint lung box in the repositioned frame, before resize
    bool repositioned = false;
    bool standardized = false;
    std::string norm_params;         ///< checksum of the train statistics applied, empty when none
};

/// Lungs moved next to each other and cropped to their joint box.
struct RepositionResult {
    imaging::RasterImage image;
    BinaryMask mask;
    bool repositioned = false;
};

/// With exactly two components, the right one is translated horizontally so
/// that `gap` background columns separate the two bounding boxes (vertical
/// placement kept); the result is cropped to the joint bounding box. Other
/// component counts are cropped to the foreground box without moving.
RepositionResult reposition_lungs(const imaging::RasterImage& img, const BinaryMask& mask, int gap);

/// Mask, re-standardize lung pixels, reposition, crop, fit-pad to size x size
/// and optionally standardize per pixel. Throws EmptyMask or ShapeMismatch.
RoiImage build_roi(const imaging::RasterImage& img, const BinaryMask& mask, const TrainStats* stats = nullptr,
                   const RoiParams& params = {});

}  // namespace circa::segmentation
