#pragma once

#include "circa/classes.hpp"
#include "circa/json.hpp"
#include "circa/pipeline/manifest.hpp"
#include "circa/segmentation/mask.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace circa::metrics {

/// 2|A∩B| / (|A|+|B|); two empty masks score 1. Throws DimensionMismatch.
double dice(const segmentation::BinaryMask& a, const segmentation::BinaryMask& b);

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix3 {
    std::array<std::array<std::uint64_t, 3>, 3> counts{};

    void add(ClassLabel truth, ClassLabel predicted, std::uint64_t n = 1);
    std::uint64_t total() const;
    std::uint64_t row_total(ClassLabel truth) const;
    std::uint64_t column_total(ClassLabel predicted) const;

    ConfusionMatrix3& operator+=(const ConfusionMatrix3& other);
    bool operator==(const ConfusionMatrix3&) const = default;

    Json to_json() const;
};

/// nullopt marks an undefined rate (zero denominator).
using Rate = std::optional<double>;

enum class Metric { Ppv, Npv, Sensitivity, Specificity, Accuracy, BalancedAccuracy, F1 };

inline constexpr std::array<Metric, 7> kAllMetrics{Metric::Ppv,         Metric::Npv,      Metric::Sensitivity,
                                                   Metric::Specificity, Metric::Accuracy, Metric::BalancedAccuracy,
                                                   Metric::F1};

std::string_view to_string(Metric m);

struct OneVsRest {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    bool operator==(const OneVsRest&) const = default;
};

struct ClassReport {
    std::array<Rate, 7> values{};  ///< indexed in kAllMetrics order
    std::uint64_t support = 0;     ///< cases contributing
    std::optional<OneVsRest> counts;

    Rate& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
    const Rate& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }

    Json to_json() const;
};

struct MetricsReport {
    std::array<ClassReport, 3> classes;
    std::uint64_t total = 0;

    const ClassReport& operator[](ClassLabel c) const { return classes[static_cast<std::size_t>(index_of(c))]; }

    Json to_json() const;
};

OneVsRest one_vs_rest(const ConfusionMatrix3& cm, ClassLabel c);
ClassReport class_report(const OneVsRest& counts);

/// Throws EmptyMatrix when the matrix has no cases.
MetricsReport class_metrics(const ConfusionMatrix3& cm);

struct SubtypeReport {
    std::string subtype;  ///< e.g. "C3"; the first letter names the class
    MetricsReport report;
    std::uint64_t count = 0;
};

/// Per class: count-weighted mean of each subtype's report for that class.
/// Undefined values drop out together with their weight. A class with
/// subtypes whose counts sum to zero throws ZeroTotalWeight; a class with no
/// subtypes at all yields an empty report.
std::array<ClassReport, 3> weighted_class_from_subtypes(std::span<const SubtypeReport> subtypes);

struct Prediction {
    std::string id;
    ClassLabel predicted = ClassLabel::Normal;
};

struct EvaluationScope {
    ConfusionMatrix3 pooled;
    MetricsReport pooled_report;
    std::map<std::string, ConfusionMatrix3> subtype_matrices;
    std::vector<SubtypeReport> subtypes;
    std::array<ClassReport, 3> classes;  ///< weighted from subtypes; pooled when no subtypes are known

    Json to_json() const;
};

struct EvaluationReport {
    EvaluationScope overall;
    std::map<std::string, EvaluationScope> datasets;

    Json to_json() const;
    /// Columns: dataset,level,group,metric,value. Undefined values are empty.
    std::string to_csv() const;
};

/// Subtypes come from `subtypes` (id -> "C2") when present, else from the
/// truth manifest entry. A class is aggregated from its subtypes only when
/// every evaluated case of that class has one; otherwise its pooled one-vs-rest
/// report is used. Manifest cases without a prediction are ignored.
/// Predictions whose id is absent from the manifest throw MissingPredictions
/// listing the ids; predictions for unlabeled cases throw InvalidArgument.
EvaluationReport evaluate_manifest(std::span<const Prediction> predictions, const pipeline::DatasetManifest& truth,
                                   const std::map<std::string, std::string>& subtypes = {});

}  // namespace circa::metrics
