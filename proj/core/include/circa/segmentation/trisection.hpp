#pragma once

#include "circa/segmentation/mask.hpp"

#include <array>

namespace circa::segmentation {

enum class LungSegment { Upper = 0, Middle = 1, Lower = 2 };

inline constexpr std::array<LungSegment, 3> kSegments{LungSegment::Upper, LungSegment::Middle, LungSegment::Lower};

/// "UL", "ML" or "LL".
const char* segment_tag(LungSegment segment);

struct Trisection {
    std::array<BinaryMask, 3> bands;  ///< indexed by LungSegment
    std::array<int, 3> band_heights{};

    const BinaryMask& operator[](LungSegment s) const { return bands[static_cast<std::size_t>(s)]; }
};

/// Splits the foreground bounding box into horizontal bands of
/// floor(H/3), floor(H/3) and the remainder rows (top to bottom) and
/// intersects each band with the mask. Throws EmptyMask.
Trisection lung_trisection(const BinaryMask& mask);

}  // namespace circa::segmentation
