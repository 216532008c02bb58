#pragma once

#include <array>
#include <utility>
#include <vector>

namespace circa::radiomics {

/// Segment of a discretized image: level 0 marks pixels outside the segment.
struct LevelImage {
    int width = 0;
    int height = 0;
    int n_levels = 0;
    std::vector<int> levels;

    int at(int x, int y) const { return levels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height && at(x, y) > 0; }
    std::size_t pixel_count() const;
};

using Offset = std::pair<int, int>;  ///< (dx, dy)

/// Distance-1 offsets at 0, 45, 90 and 135 degrees.
std::vector<Offset> default_offsets();

/// n_levels x n_levels symmetric co-occurrence matrix (row-major), each
/// offset's matrix normalized to unit mass before averaging. Offsets with no
/// valid pair are skipped; throws EmptySegment when none has a pair.
std::vector<double> glcm_matrix(const LevelImage& img, const std::vector<Offset>& offsets);

std::array<double, 24> glcm_features(const LevelImage& img, const std::vector<Offset>& offsets = default_offsets());
std::array<double, 24> glcm_features_from_matrix(const std::vector<double>& p, int n_levels);

/// Run (level, length) counts per direction, averaged over directions.
struct RunLengthMatrix {
    int n_levels = 0;
    int max_length = 0;
    std::vector<double> counts;  ///< n_levels x max_length, row-major, (level-1, length-1)
    double n_pixels = 0.0;
};

RunLengthMatrix glrlm_matrix(const LevelImage& img, const std::vector<Offset>& directions);
std::array<double, 16> glrlm_features(const LevelImage& img, const std::vector<Offset>& directions = default_offsets());
std::array<double, 16> glrlm_features_from_matrix(const RunLengthMatrix& m);

/// 8-connected zones of equal level.
std::array<double, 16> glszm_features(const LevelImage& img);

/// Neighbourhood tone difference (5) followed by neighbouring dependence (7),
/// both over the 8-neighbourhood restricted to the segment.
std::array<double, 12> ngtdm_features(const LevelImage& img);

}  // namespace circa::radiomics
