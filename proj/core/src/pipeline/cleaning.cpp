#include "circa/pipeline/cleaning.hpp"

#include "circa/error.hpp"
#include "circa/io.hpp"
#include "circa/parallel.hpp"

namespace circa::pipeline {
namespace {

struct CaseOutcome {
    std::optional<std::string> reason;
    std::optional<double> score;
    std::string message;
    Json details = Json::object();
};

CaseOutcome assess(const DatasetManifest& manifest, const CaseEntry& entry, const Engine& engine) {
    CaseOutcome o;
    try {
        const auto bytes = read_file_bytes(manifest.resolve(entry));
        const auto seg = engine.segment_case(bytes);
        const auto& r = seg.result;
        if (r.quality) o.score = r.quality->value;
        if (r.rejection) {
            o.reason = std::string(to_string(r.rejection->reason));
            o.message = r.rejection->message;
            o.details = r.rejection->details;
        }
    } catch (const Error& e) {
        o.reason = "Error";
        o.message = e.what();
        o.details = Json{{"code", std::string(to_string(e.code()))}, {"stage", e.stage()}};
    }
    return o;
}

}  // namespace

Json CleaningReport::to_json() const {
    Json j{{"input_cases", input_cases}, {"kept_cases", kept_cases}};
    j["threshold"] = threshold ? Json(*threshold) : Json(nullptr);
    if (fence) {
        j["fence"] = Json{{"q1", fence->q1},
                          {"q3", fence->q3},
                          {"iqr", fence->iqr},
                          {"medcouple", fence->medcouple},
                          {"lower", fence->lower_fence},
                          {"upper", fence->upper_fence}};
    } else {
        j["fence"] = nullptr;
    }
    Json rej = Json::array();
    for (const auto& r : rejections) {
        rej.push_back(Json{{"id", r.id},
                           {"reason", r.reason},
                           {"score", r.score ? Json(*r.score) : Json(nullptr)},
                           {"message", r.message},
                           {"details", r.details}});
    }
    j["rejections"] = std::move(rej);
    Json sc = Json::array();
    for (const auto& [id, s] : scores) sc.push_back(Json{{"id", id}, {"score", s}});
    j["scores"] = std::move(sc);
    return j;
}

CleaningResult clean_dataset(const DatasetManifest& manifest, const Engine& engine, int jobs) {
    manifest.validate();
    const std::size_t n = manifest.cases.size();
    std::vector<CaseOutcome> outcomes(n);
    parallel_for(n, jobs, [&](std::size_t i) { outcomes[i] = assess(manifest, manifest.cases[i], engine); });

    CleaningResult result;
    auto& report = result.report;
    report.input_cases = n;
    std::vector<double> accepted_scores;
    for (std::size_t i = 0; i < n; ++i) {
        if (outcomes[i].score) report.scores.emplace_back(manifest.cases[i].id, *outcomes[i].score);
        if (!outcomes[i].reason && outcomes[i].score) accepted_scores.push_back(*outcomes[i].score);
    }
    if (accepted_scores.size() >= 4) {
        report.fence = segmentation::adjusted_boxplot(accepted_scores);
        report.threshold = report.fence->lower_fence;
    }
    result.cleaned.base_dir = manifest.base_dir;
    for (std::size_t i = 0; i < n; ++i) {
        auto& o = outcomes[i];
        if (!o.reason && report.threshold && o.score && *o.score < *report.threshold) {
            o.reason = "LowQuality";
            o.message = "quality score below the corpus fence";
            o.details = Json{{"threshold", *report.threshold}};
        }
        if (o.reason) {
            report.rejections.push_back({manifest.cases[i].id, *o.reason, o.score, o.message, o.details});
        } else {
            result.cleaned.cases.push_back(manifest.cases[i]);
        }
    }
    report.kept_cases = result.cleaned.cases.size();
    return result;
}

}  // namespace circa::pipeline
