#include "circa/radiomics/selection.hpp"

#include "circa/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace circa::radiomics {

KruskalWallis kruskal_wallis(std::span<const double> values, std::span<const int> groups) {
    if (values.size() != groups.size()) throw Error(ErrorCode::ShapeMismatch, "values and groups differ in length");
    const std::size_t n = values.size();
    std::map<int, std::pair<double, std::size_t>> rank_sums;
    for (int g : groups) rank_sums[g];
    KruskalWallis kw;
    kw.n = n;
    kw.groups = static_cast<int>(rank_sums.size());
    if (kw.groups < 2) throw Error(ErrorCode::DegenerateGroups, "fewer than two non-empty groups");
    if (n < 5) throw Error(ErrorCode::TooFewSamples, "Kruskal-Wallis needs at least 5 samples");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    double tie_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        const auto t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& [sum, count] = rank_sums[groups[i]];
        sum += ranks[i];
        ++count;
    }
    const auto nd = static_cast<double>(n);
    double h = 0.0;
    for (const auto& [g, sc] : rank_sums) h += sc.first * sc.first / static_cast<double>(sc.second);
    h = 12.0 / (nd * (nd + 1.0)) * h - 3.0 * (nd + 1.0);
    kw.tie_correction = 1.0 - tie_sum / (nd * nd * nd - nd);
    if (kw.tie_correction <= 0.0) {
        kw.h = 0.0;
        kw.p_value = 1.0;
        kw.eta_squared = 0.0;
        return kw;
    }
    kw.h = std::max(0.0, h / kw.tie_correction);
    const double k = kw.groups;
    kw.p_value = boost::math::gamma_q(0.5 * (k - 1.0), 0.5 * kw.h);
    kw.eta_squared = nd > k ? std::max(0.0, (kw.h - k + 1.0) / (nd - k)) : 0.0;
    return kw;
}

SelectionReport rank_features(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                              const std::vector<std::string>& names) {
    if (rows.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "row and label counts differ");
    SelectionReport report;
    report.features.resize(names.size());
    std::vector<double> column(rows.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != names.size()) throw Error(ErrorCode::ShapeMismatch, "ragged feature matrix");
            column[r] = rows[r][c];
        }
        const KruskalWallis kw = kruskal_wallis(column, labels);
        report.features[c] = FeatureStat{names[c], kw.h, kw.p_value, kw.eta_squared, false};
    }
    return report;
}

std::vector<std::size_t> select_features(SelectionReport& report, double min_eta, std::size_t cap) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < report.features.size(); ++i) {
        report.features[i].selected = false;
        if (report.features[i].eta_squared >= min_eta) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return report.features[a].eta_squared > report.features[b].eta_squared;
    });
    if (idx.size() > cap) idx.resize(cap);
    for (std::size_t i : idx) report.features[i].selected = true;
    report.selected = idx;
    report.min_eta = min_eta;
    report.cap = cap;
    return idx;
}

Json to_json(const SelectionReport& report) {
    Json features = Json::array();
    for (std::size_t i = 0; i < report.features.size(); ++i) {
        const auto& f = report.features[i];
        features.push_back(Json{{"index", i},
                                {"name", f.name},
                                {"h", f.h},
                                {"p_value", f.p_value},
                                {"eta_squared", f.eta_squared},
                                {"selected", f.selected}});
    }
    return Json{{"min_eta", report.min_eta},
                {"cap", report.cap},
                {"selected", report.selected},
                {"features", features}};
}

SelectionReport selection_report_from_json(const Json& doc) {
    try {
        SelectionReport r;
        r.min_eta = doc.at("min_eta").get<double>();
        r.cap = doc.at("cap").get<std::size_t>();
        r.selected = doc.at("selected").get<std::vector<std::size_t>>();
        for (const auto& f : doc.at("features")) {
            r.features.push_back(FeatureStat{f.at("name").get<std::string>(), f.at("h").get<double>(),
                                             f.at("p_value").get<double>(), f.at("eta_squared").get<double>(),
                                             f.at("selected").get<bool>()});
        }
        for (std::size_t i : r.selected) {
            if (i >= r.features.size()) throw Error(ErrorCode::CorruptModel, "selected index out of range");
        }
        return r;
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed selection report: ") + e.what());
    }
}

}  // namespace circa::radiomics
