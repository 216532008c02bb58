#include "circa/segmentation/trisection.hpp"

#include "circa/error.hpp"

namespace circa::segmentation {

const char* segment_tag(LungSegment segment) {
    switch (segment) {
        case LungSegment::Upper: return "UL";
        case LungSegment::Middle: return "ML";
        case LungSegment::Lower: return "LL";
    }
    return "UL";
}

Trisection lung_trisection(const BinaryMask& mask) {
    const auto box = mask.bbox();
    if (!box) throw Error(ErrorCode::EmptyMask, "cannot trisect an empty mask");
    const int h = box->height();
    const int third = h / 3;
    const int starts[4] = {box->y0, box->y0 + third, box->y0 + 2 * third, box->y1};

    Trisection t{{BinaryMask(mask.width(), mask.height()), BinaryMask(mask.width(), mask.height()),
                  BinaryMask(mask.width(), mask.height())},
                 {third, third, h - 2 * third}};
    for (int band = 0; band < 3; ++band) {
        for (int y = starts[band]; y < starts[band + 1]; ++y) {
            for (int x = box->x0; x < box->x1; ++x) {
                if (mask.at(x, y)) t.bands[static_cast<std::size_t>(band)].set(x, y, true);
            }
        }
    }
    return t;
}

}  // namespace circa::segmentation
