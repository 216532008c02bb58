#include "circa/radiomics/discretize.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>

namespace circa::radiomics {

Discretized discretize(std::span<const double> values, double bin_width) {
    if (!(bin_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
    Discretized d;
    if (values.empty()) return d;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    d.min_value = *lo;
    const auto level = [&](double v) { return static_cast<int>(std::floor((v - d.min_value) / bin_width + 1e-9)) + 1; };
    d.n_levels = level(*hi);
    d.levels.reserve(values.size());
    for (double v : values) d.levels.push_back(std::min(level(v), d.n_levels));
    return d;
}

}  // namespace circa::radiomics
