#pragma once

#include <span>

namespace circa::segmentation {

/// Linear-interpolation quantile (the numpy default) of an unsorted sample.
double interpolated_quantile(std::span<const double> values, double q);

/// Medcouple via the O(n log n) selection of Johnson and Mizera over the
/// implicit kernel matrix. Pairs that both equal the median use the sign
/// convention sign(p - 1 - i - j); an even number of kernel values yields
/// the mean of the two central ones.
double medcouple(std::span<const double> values);

struct AdjustedBoxplot {
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double medcouple = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
};

/// Skewness-adjusted boxplot fences. Throws TooFewSamples for n < 4.
AdjustedBoxplot adjusted_boxplot(std::span<const double> values);

/// Lower adjusted-boxplot fence; scores strictly below it are outliers.
double skewed_outlier_threshold(std::span<const double> scores);

}  // namespace circa::segmentation
