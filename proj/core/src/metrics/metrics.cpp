#include "circa/metrics/metrics.hpp"

#include "circa/error.hpp"

#include <cstdio>
#include <set>

namespace circa::metrics {
namespace {

Rate ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

Json rate_json(const Rate& r) { return r ? Json(*r) : Json(nullptr); }

std::optional<ClassLabel> class_of_subtype(std::string_view subtype) {
    if (subtype.empty()) return std::nullopt;
    for (ClassLabel c : kAllClasses)
        if (subtype[0] == subtype_prefix(c)) return c;
    return std::nullopt;
}

std::string format_rate(const Rate& r) {
    if (!r) return {};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", *r);
    return buf;
}

}  // namespace

double dice(const segmentation::BinaryMask& a, const segmentation::BinaryMask& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw Error(ErrorCode::DimensionMismatch, "dice: masks differ in size (" + std::to_string(a.width()) + "x" +
                                                      std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                                                      "x" + std::to_string(b.height()) + ")");
    std::uint64_t na = 0, nb = 0, both = 0;
    const auto ba = a.bits();
    const auto bb = b.bits();
    for (std::size_t i = 0; i < ba.size(); ++i) {
        na += ba[i] != 0;
        nb += bb[i] != 0;
        both += (ba[i] != 0 && bb[i] != 0);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

void ConfusionMatrix3::add(ClassLabel truth, ClassLabel predicted, std::uint64_t n) {
    counts[static_cast<std::size_t>(index_of(truth))][static_cast<std::size_t>(index_of(predicted))] += n;
}

std::uint64_t ConfusionMatrix3::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
        for (auto v : row) t += v;
    return t;
}

std::uint64_t ConfusionMatrix3::row_total(ClassLabel truth) const {
    std::uint64_t t = 0;
    for (auto v : counts[static_cast<std::size_t>(index_of(truth))]) t += v;
    return t;
}

std::uint64_t ConfusionMatrix3::column_total(ClassLabel predicted) const {
    std::uint64_t t = 0;
    for (const auto& row : counts) t += row[static_cast<std::size_t>(index_of(predicted))];
    return t;
}

ConfusionMatrix3& ConfusionMatrix3::operator+=(const ConfusionMatrix3& other) {
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) counts[r][c] += other.counts[r][c];
    return *this;
}

Json ConfusionMatrix3::to_json() const {
    Json rows = Json::array();
    for (const auto& row : counts) rows.push_back(Json::array({row[0], row[1], row[2]}));
    return rows;
}

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::Ppv: return "ppv";
        case Metric::Npv: return "npv";
        case Metric::Sensitivity: return "sensitivity";
        case Metric::Specificity: return "specificity";
        case Metric::Accuracy: return "accuracy";
        case Metric::BalancedAccuracy: return "balanced_accuracy";
        case Metric::F1: return "f1";
    }
    return "ppv";
}

Json ClassReport::to_json() const {
    Json j{{"support", support}};
    for (Metric m : kAllMetrics) j[std::string(to_string(m))] = rate_json((*this)[m]);
    if (counts) j["counts"] = Json{{"tp", counts->tp}, {"fp", counts->fp}, {"fn", counts->fn}, {"tn", counts->tn}};
    return j;
}

Json MetricsReport::to_json() const {
    Json j{{"total", total}};
    for (ClassLabel c : kAllClasses) j["classes"][std::string(circa::to_string(c))] = (*this)[c].to_json();
    return j;
}

OneVsRest one_vs_rest(const ConfusionMatrix3& cm, ClassLabel c) {
    const auto k = static_cast<std::size_t>(index_of(c));
    OneVsRest o;
    o.tp = cm.counts[k][k];
    o.fn = cm.row_total(c) - o.tp;
    o.fp = cm.column_total(c) - o.tp;
    o.tn = cm.total() - o.tp - o.fn - o.fp;
    return o;
}

ClassReport class_report(const OneVsRest& o) {
    ClassReport r;
    r.counts = o;
    r.support = o.tp + o.fn;
    const Rate ppv = ratio(o.tp, o.tp + o.fp);
    const Rate sens = ratio(o.tp, o.tp + o.fn);
    const Rate spec = ratio(o.tn, o.tn + o.fp);
    r[Metric::Ppv] = ppv;
    r[Metric::Npv] = ratio(o.tn, o.tn + o.fn);
    r[Metric::Sensitivity] = sens;
    r[Metric::Specificity] = spec;
    r[Metric::Accuracy] = ratio(o.tp + o.tn, o.tp + o.tn + o.fp + o.fn);
    if (sens && spec) r[Metric::BalancedAccuracy] = (*sens + *spec) / 2.0;
    if (ppv && sens && (*ppv + *sens) > 0.0) r[Metric::F1] = 2.0 * *ppv * *sens / (*ppv + *sens);
    return r;
}

MetricsReport class_metrics(const ConfusionMatrix3& cm) {
    MetricsReport report;
    report.total = cm.total();
    if (report.total == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix has no cases");
    for (ClassLabel c : kAllClasses) report.classes[static_cast<std::size_t>(index_of(c))] = class_report(one_vs_rest(cm, c));
    return report;
}

std::array<ClassReport, 3> weighted_class_from_subtypes(std::span<const SubtypeReport> subtypes) {
    std::array<ClassReport, 3> out;
    std::array<bool, 3> present{};
    std::array<std::array<double, 7>, 3> sum{};
    std::array<std::array<double, 7>, 3> weight{};
    for (const auto& s : subtypes) {
        const auto c = class_of_subtype(s.subtype);
        if (!c) throw Error(ErrorCode::InvalidArgument, "unknown subtype '" + s.subtype + "'");
        const auto k = static_cast<std::size_t>(index_of(*c));
        present[k] = true;
        out[k].support += s.count;
        if (s.count == 0) continue;
        const auto& rep = s.report[*c];
        for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
            if (!rep.values[m]) continue;
            sum[k][m] += static_cast<double>(s.count) * *rep.values[m];
            weight[k][m] += static_cast<double>(s.count);
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        if (!present[k]) continue;
        if (out[k].support == 0)
            throw Error(ErrorCode::ZeroTotalWeight,
                        "subtypes of class " + std::string(circa::to_string(class_from_index(static_cast<int>(k)))) +
                            " have zero total count");
        for (std::size_t m = 0; m < kAllMetrics.size(); ++m)
            if (weight[k][m] > 0.0) out[k].values[m] = sum[k][m] / weight[k][m];
    }
    return out;
}

Json EvaluationScope::to_json() const {
    Json j;
    j["pooled"] = Json{{"confusion", pooled.to_json()}, {"report", pooled_report.to_json()}};
    j["classes"] = Json::object();
    for (ClassLabel c : kAllClasses)
        j["classes"][std::string(circa::to_string(c))] = classes[static_cast<std::size_t>(index_of(c))].to_json();
    j["subtypes"] = Json::object();
    for (const auto& s : subtypes) {
        j["subtypes"][s.subtype] = Json{
            {"count", s.count}, {"confusion", subtype_matrices.at(s.subtype).to_json()}, {"report", s.report.to_json()}};
    }
    return j;
}

Json EvaluationReport::to_json() const {
    Json j = overall.to_json();
    j["datasets"] = Json::object();
    for (const auto& [tag, scope] : datasets) j["datasets"][tag] = scope.to_json();
    return j;
}

std::string EvaluationReport::to_csv() const {
    std::string out = "dataset,level,group,metric,value\n";
    auto emit_scope = [&](const std::string& tag, const EvaluationScope& scope) {
        auto row = [&](std::string_view level, std::string_view group, const ClassReport& rep) {
            for (Metric m : kAllMetrics) {
                out += tag;
                out += ',';
                out += level;
                out += ',';
                out += group;
                out += ',';
                out += to_string(m);
                out += ',';
                out += format_rate(rep[m]);
                out += '\n';
            }
        };
        for (ClassLabel c : kAllClasses) {
            row("class", circa::to_string(c), scope.classes[static_cast<std::size_t>(index_of(c))]);
        }
        for (ClassLabel c : kAllClasses) row("pooled", circa::to_string(c), scope.pooled_report[c]);
        for (const auto& s : scope.subtypes) row("subtype", s.subtype, s.report[*class_of_subtype(s.subtype)]);
    };
    emit_scope("all", overall);
    for (const auto& [tag, scope] : datasets) emit_scope(tag, scope);
    return out;
}

namespace {

struct Evaluated {
    ClassLabel truth;
    ClassLabel predicted;
    std::optional<std::string> subtype;
};

EvaluationScope build_scope(const std::vector<const Evaluated*>& cases) {
    EvaluationScope scope;
    std::array<bool, 3> all_have_subtype{true, true, true};
    for (const auto* e : cases) {
        scope.pooled.add(e->truth, e->predicted);
        if (e->subtype) {
            scope.subtype_matrices[*e->subtype].add(e->truth, e->predicted);
        } else {
            all_have_subtype[static_cast<std::size_t>(index_of(e->truth))] = false;
        }
    }
    scope.pooled_report = class_metrics(scope.pooled);
    for (const auto& [name, cm] : scope.subtype_matrices) {
        scope.subtypes.push_back(SubtypeReport{name, class_metrics(cm), cm.total()});
    }
    const auto weighted = weighted_class_from_subtypes(scope.subtypes);
    for (ClassLabel c : kAllClasses) {
        const auto k = static_cast<std::size_t>(index_of(c));
        const bool has_cases = scope.pooled.row_total(c) > 0;
        scope.classes[k] = has_cases && all_have_subtype[k] ? weighted[k] : scope.pooled_report[c];
    }
    return scope;
}

}  // namespace

EvaluationReport evaluate_manifest(std::span<const Prediction> predictions, const pipeline::DatasetManifest& truth,
                                   const std::map<std::string, std::string>& subtypes) {
    std::vector<std::string> missing;
    std::vector<Evaluated> evaluated;
    std::vector<std::string> tags;
    std::set<std::string> seen;
    evaluated.reserve(predictions.size());
    for (const auto& p : predictions) {
        const auto* entry = truth.find(p.id);
        if (!entry) {
            missing.push_back(p.id);
            continue;
        }
        if (!seen.insert(p.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate prediction for " + p.id);
        if (!entry->label) throw Error(ErrorCode::InvalidArgument, "case " + p.id + " has no truth label");
        Evaluated e{*entry->label, p.predicted, entry->subtype};
        if (auto it = subtypes.find(p.id); it != subtypes.end()) e.subtype = it->second;
        if (e.subtype && class_of_subtype(*e.subtype) != e.truth)
            throw Error(ErrorCode::InvalidArgument, "case " + p.id + " subtype " + *e.subtype + " disagrees with label");
        evaluated.push_back(std::move(e));
        tags.push_back(entry->dataset);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw Error(ErrorCode::MissingPredictions, "predictions reference ids absent from the truth manifest: " + list);
    }
    if (evaluated.empty()) throw Error(ErrorCode::EmptyMatrix, "no predictions to evaluate");

    EvaluationReport report;
    std::vector<const Evaluated*> all;
    std::map<std::string, std::vector<const Evaluated*>> by_tag;
    for (std::size_t i = 0; i < evaluated.size(); ++i) {
        all.push_back(&evaluated[i]);
        by_tag[tags[i]].push_back(&evaluated[i]);
    }
    report.overall = build_scope(all);
    for (const auto& [tag, cases] : by_tag) report.datasets.emplace(tag, build_scope(cases));
    return report;
}

}  // namespace circa::metrics
