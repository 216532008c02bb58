#include "circa/pipeline/result.hpp"

namespace circa::pipeline {

std::string_view to_string(RejectionReason reason) {
    switch (reason) {
        case RejectionReason::NoLungFound: return "NoLungFound";
        case RejectionReason::TooSmall: return "TooSmall";
        case RejectionReason::LowQuality: return "LowQuality";
    }
    return "NoLungFound";
}

Json probabilities_json(const ClassProbabilities& p) {
    return Json{{"normal", p.p[0]}, {"pneumonia", p.p[1]}, {"covid", p.p[2]}};
}

Json PipelineResult::to_json(bool include_timings) const {
    Json j;
    j["status"] = accepted() ? "accepted" : "rejected";
    j["input"] = Json{{"width", input_width},
                      {"height", input_height},
                      {"format", input_format},
                      {"super_resolution", super_resolution},
                      {"super_resolution_fallback", super_resolution_fallback}};
    j["gates"] = Json{{"size",
                       {{"evaluated", size_gate.evaluated},
                        {"passed", size_gate.passed},
                        {"width", size_gate.width},
                        {"height", size_gate.height},
                        {"min_dimension", size_gate.min_dimension}}},
                      {"quality",
                       {{"evaluated", quality_gate.evaluated},
                        {"passed", quality_gate.passed},
                        {"enabled", quality_gate.enabled},
                        {"score", quality_gate.score},
                        {"threshold", quality_gate.threshold}}}};
    if (mask_metrics) j["mask_metrics"] = segmentation::to_json(*mask_metrics);
    if (quality) j["quality"] = segmentation::to_json(*quality);
    if (rejection) {
        j["rejection"] = Json{{"reason", std::string(to_string(rejection->reason))},
                              {"message", rejection->message},
                              {"details", rejection->details}};
    }
    if (probabilities && decided) {
        Json c{{"probabilities", probabilities_json(*probabilities)}, {"decided_class", std::string(circa::to_string(*decided))}};
        if (image_branch) c["branches"]["image"] = probabilities_json(*image_branch);
        if (radiomics_branch) c["branches"]["radiomics"] = probabilities_json(*radiomics_branch);
        j["classification"] = std::move(c);
    }
    if (subtype) j["subtype"] = models::to_json(*subtype);
    if (embedding) j["embedding"] = Json::array({(*embedding)[0], (*embedding)[1]});
    j["warnings"] = warnings;
    Json kinds = Json::array();
    if (artifacts.mask) kinds.push_back("mask");
    if (artifacts.roi) kinds.push_back("roi");
    if (artifacts.saliency) kinds.push_back("saliency");
    j["artifacts"] = std::move(kinds);
    if (include_timings) {
        Json t = Json::array();
        for (const auto& s : timings) t.push_back(Json{{"stage", s.stage}, {"ms", s.milliseconds}});
        j["timings"] = std::move(t);
    }
    return j;
}

}  // namespace circa::pipeline
