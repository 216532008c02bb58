#pragma once

#include "circa/json.hpp"

#include <span>
#include <string>
#include <vector>

namespace circa::radiomics {

struct KruskalWallis {
    double h = 0.0;
    double p_value = 1.0;
    double eta_squared = 0.0;
    double tie_correction = 1.0;
    int groups = 0;  ///< non-empty groups
    std::size_t n = 0;
};

/// Tie-corrected H with average ranks; p from the chi-square upper tail with
/// k-1 degrees of freedom; eta^2 = (H - k + 1)/(n - k) clamped at 0. Group
/// ids are arbitrary non-negative integers. Throws DegenerateGroups when
/// fewer than two groups are non-empty and TooFewSamples when n < 5.
KruskalWallis kruskal_wallis(std::span<const double> values, std::span<const int> groups);

struct FeatureStat {
    std::string name;
    double h = 0.0;
    double p_value = 1.0;
    double eta_squared = 0.0;
    bool selected = false;
};

struct SelectionReport {
    std::vector<FeatureStat> features;
    std::vector<std::size_t> selected;  ///< indices in selection order
    double min_eta = 0.01;
    std::size_t cap = 200;
};

/// Column-wise Kruskal-Wallis over a row-major case x feature matrix.
SelectionReport rank_features(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                              const std::vector<std::string>& names);

inline constexpr double kDefaultMinEta = 0.01;
inline constexpr std::size_t kDefaultFeatureCap = 200;

/// Features with eta^2 >= min_eta ordered by descending eta^2 (ties by lower
/// index), truncated at cap. Also marks `selected` in the report.
std::vector<std::size_t> select_features(SelectionReport& report, double min_eta = kDefaultMinEta,
                                         std::size_t cap = kDefaultFeatureCap);

Json to_json(const SelectionReport& report);
SelectionReport selection_report_from_json(const Json& doc);

}  // namespace circa::radiomics
