#include "circa/segmentation/outlier.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace circa::segmentation {

double interpolated_quantile(std::span<const double> values, double q) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

namespace {

constexpr double kEps1 = std::numeric_limits<double>::epsilon();
constexpr double kEps2 = std::numeric_limits<double>::min();

// Kernel matrix over (z+, z-), both sorted descending; rows are
// non-increasing left to right and columns non-increasing top to bottom.
struct Kernel {
    std::vector<double> plus;
    std::vector<double> minus;

    double operator()(std::size_t i, std::size_t j) const {
        const double a = plus[i];
        const double b = minus[j];
        if (std::abs(a - b) <= 2.0 * kEps2) {
            const auto s = static_cast<long long>(plus.size()) - 1 - static_cast<long long>(i) - static_cast<long long>(j);
            return static_cast<double>((s > 0) - (s < 0));
        }
        return (a + b) / (a - b);
    }
};

double weighted_median(std::vector<std::pair<double, long long>> items) {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    long long total = 0;
    for (const auto& it : items) total += it.second;
    long long acc = 0;
    for (const auto& it : items) {
        acc += it.second;
        if (2 * acc >= total) return it.first;
    }
    return items.back().first;
}

// Value of rank k (0-based) among all kernel entries sorted descending.
double kernel_kth_largest(const Kernel& h, long long k) {
    const auto p = static_cast<long long>(h.plus.size());
    const auto q = static_cast<long long>(h.minus.size());
    std::vector<long long> left(static_cast<std::size_t>(p), 0);
    std::vector<long long> right(static_cast<std::size_t>(p), q - 1);
    long long left_total = 0;
    long long right_total = p * q;
    std::vector<long long> part_p(static_cast<std::size_t>(p));
    std::vector<long long> part_q(static_cast<std::size_t>(p));

    while (right_total - left_total > p) {
        std::vector<std::pair<double, long long>> row_medians;
        for (long long i = 0; i < p; ++i) {
            const auto iu = static_cast<std::size_t>(i);
            if (left[iu] <= right[iu]) {
                row_medians.emplace_back(h(iu, static_cast<std::size_t>((left[iu] + right[iu]) / 2)),
                                         right[iu] - left[iu] + 1);
            }
        }
        const double wm = weighted_median(std::move(row_medians));
        const double tol = kEps1 * (kEps1 + std::abs(wm));

        // part_p[i]: last column whose entry is strictly greater than wm.
        long long j = 0;
        for (long long i = p - 1; i >= 0; --i) {
            while (j < q && h(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - wm > tol) ++j;
            part_p[static_cast<std::size_t>(i)] = j - 1;
        }
        // part_q[i]: first column whose entry is strictly smaller than wm.
        j = q - 1;
        for (long long i = 0; i < p; ++i) {
            while (j >= 0 && h(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - wm < -tol) --j;
            part_q[static_cast<std::size_t>(i)] = j + 1;
        }
        const long long sum_p = std::accumulate(part_p.begin(), part_p.end(), 0LL) + p;
        const long long sum_q = std::accumulate(part_q.begin(), part_q.end(), 0LL);

        if (k <= sum_p - 1) {
            right = part_p;
            right_total = sum_p;
        } else if (k > sum_q - 1) {
            left = part_q;
            left_total = sum_q;
        } else {
            return wm;
        }
    }

    std::vector<double> remaining;
    for (long long i = 0; i < p; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        for (long long jj = left[iu]; jj <= right[iu]; ++jj) remaining.push_back(h(iu, static_cast<std::size_t>(jj)));
    }
    const auto idx = static_cast<std::size_t>(k - left_total);
    std::nth_element(remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(idx), remaining.end(),
                     std::greater<double>());
    return remaining[idx];
}

}  // namespace

double medcouple(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3) throw Error(ErrorCode::TooFewSamples, "medcouple needs at least 3 values");
    std::vector<double> z(values.begin(), values.end());
    std::sort(z.begin(), z.end(), std::greater<double>());
    const std::size_t n2 = (n - 1) / 2;
    const double med = n % 2 == 1 ? z[n2] : 0.5 * (z[n2] + z[n2 + 1]);

    if (std::abs(z.front() - med) < kEps1 * (kEps1 + std::abs(med))) return -1.0;
    if (std::abs(z.back() - med) < kEps1 * (kEps1 + std::abs(med))) return 1.0;

    const double scale = 2.0 * std::max(std::abs(z.front() - med), std::abs(z.back() - med));
    for (double& v : z) v = (v - med) / scale;

    Kernel h;
    for (double v : z) {
        if (v >= 0.0) h.plus.push_back(v);
        if (v <= 0.0) h.minus.push_back(v);
    }
    const auto total = static_cast<long long>(h.plus.size() * h.minus.size());
    if (total % 2 == 1) return kernel_kth_largest(h, total / 2);
    return 0.5 * (kernel_kth_largest(h, total / 2 - 1) + kernel_kth_largest(h, total / 2));
}

AdjustedBoxplot adjusted_boxplot(std::span<const double> values) {
    if (values.size() < 4) throw Error(ErrorCode::TooFewSamples, "adjusted boxplot needs at least 4 samples");
    AdjustedBoxplot b;
    b.q1 = interpolated_quantile(values, 0.25);
    b.q3 = interpolated_quantile(values, 0.75);
    b.iqr = b.q3 - b.q1;
    b.medcouple = medcouple(values);
    if (b.medcouple >= 0.0) {
        b.lower_fence = b.q1 - 1.5 * std::exp(-4.0 * b.medcouple) * b.iqr;
        b.upper_fence = b.q3 + 1.5 * std::exp(3.0 * b.medcouple) * b.iqr;
    } else {
        b.lower_fence = b.q1 - 1.5 * std::exp(-3.0 * b.medcouple) * b.iqr;
        b.upper_fence = b.q3 + 1.5 * std::exp(4.0 * b.medcouple) * b.iqr;
    }
    return b;
}

double skewed_outlier_threshold(std::span<const double> scores) { return adjusted_boxplot(scores).lower_fence; }

}  // namespace circa::segmentation
