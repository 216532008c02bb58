#include "circa/radiomics/first_order.hpp"

#include "circa/error.hpp"
#include "circa/radiomics/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace circa::radiomics {
namespace {

double percentile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::array<double, 19> first_order_features(std::span<const double> values, double bin_width, double pixel_area) {
    if (values.empty()) throw Error(ErrorCode::EmptySegment, "first-order features of an empty segment");
    const auto n = static_cast<double>(values.size());
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    double sum = 0.0;
    double energy = 0.0;
    for (double v : sorted) {
        sum += v;
        energy += v * v;
    }
    // Exact for constant regions, where sum / n can be off by an ulp.
    const double mean = sorted.front() == sorted.back() ? sorted.front() : sum / n;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    double mad = 0.0;
    for (double v : sorted) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += std::abs(d);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;

    const double p10 = percentile(sorted, 0.10);
    const double p90 = percentile(sorted, 0.90);
    double robust_sum = 0.0;
    double robust_n = 0.0;
    for (double v : sorted) {
        if (v >= p10 && v <= p90) {
            robust_sum += v;
            robust_n += 1.0;
        }
    }
    // With two values the [P10, P90] band can be empty; rMAD is then 0.
    double rmad = 0.0;
    if (robust_n > 0.0) {
        const double robust_mean = robust_sum / robust_n;
        for (double v : sorted) {
            if (v >= p10 && v <= p90) rmad += std::abs(v - robust_mean);
        }
        rmad /= robust_n;
    }

    const Discretized d = discretize(values, bin_width);
    std::vector<double> hist(static_cast<std::size_t>(d.n_levels), 0.0);
    for (int lvl : d.levels) hist[static_cast<std::size_t>(lvl - 1)] += 1.0;
    double entropy = 0.0;
    double uniformity = 0.0;
    for (double c : hist) {
        if (c <= 0.0) continue;
        const double p = c / n;
        entropy -= p * std::log2(p);
        uniformity += p * p;
    }

    const bool flat = m2 <= 0.0;
    return {energy,
            energy * pixel_area,
            entropy,
            sorted.front(),
            p10,
            p90,
            sorted.back(),
            mean,
            percentile(sorted, 0.5),
            percentile(sorted, 0.75) - percentile(sorted, 0.25),
            sorted.back() - sorted.front(),
            mad,
            rmad,
            std::sqrt(energy / n),
            std::sqrt(m2),
            flat ? 0.0 : m3 / std::pow(m2, 1.5),
            flat ? 0.0 : m4 / (m2 * m2),
            m2,
            uniformity};
}

}  // namespace circa::radiomics
