#include "circa/pipeline/sampling.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace circa::pipeline {

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights, std::size_t k, Rng& rng) {
    if (k > weights.size()) throw Error(ErrorCode::InvalidArgument, "cannot draw more items than available");
    for (double w : weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "sampling weights must be finite and >= 0");
    std::vector<std::size_t> pool(weights.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
        double total = 0.0;
        for (std::size_t i : pool) total += weights[i];
        std::size_t pick = pool.size() - 1;
        if (total > 0.0) {
            const double u = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t j = 0; j < pool.size(); ++j) {
                acc += weights[pool[j]];
                if (u < acc) {
                    pick = j;
                    break;
                }
            }
            while (weights[pool[pick]] == 0.0) --pick;  // guards rounding at the top end
        } else {
            pick = static_cast<std::size_t>(rng.below(pool.size()));
        }
        out.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<std::size_t> distribute_quota(std::span<const std::size_t> available, std::size_t per_cell) {
    const std::size_t target = per_cell * available.size();
    const std::size_t total = std::accumulate(available.begin(), available.end(), std::size_t{0});
    if (total < target) {
        throw Error(ErrorCode::InsufficientClassCases,
                    "class holds " + std::to_string(total) + " cases, quota is " + std::to_string(target));
    }
    std::vector<std::size_t> quota(available.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < available.size(); ++i) assigned += quota[i] = std::min(per_cell, available[i]);
    const std::size_t deficit = target - assigned;
    if (deficit == 0) return quota;

    std::vector<std::size_t> capacity(available.size());
    std::size_t cap_total = 0;
    for (std::size_t i = 0; i < available.size(); ++i) cap_total += capacity[i] = available[i] - quota[i];
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, cell)
    std::size_t given = 0;
    for (std::size_t i = 0; i < available.size(); ++i) {
        const std::size_t share = deficit * capacity[i] / cap_total;
        quota[i] += share;
        given += share;
        remainders.emplace_back(deficit * capacity[i] % cap_total, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; given < deficit; ++j, ++given) ++quota[remainders[j].second];
    return quota;
}

Json SplitResult::report() const {
    Json cells_json = Json::array();
    for (const auto& c : cells) {
        cells_json.push_back(Json{{"dataset", c.dataset}, {"subtype", c.subtype}, {"available", c.available}, {"quota", c.quota}});
    }
    return Json{{"holdout_cases", holdout.cases.size()}, {"train_cases", train.cases.size()}, {"cells", std::move(cells_json)}};
}

SplitResult stratified_sample(const DatasetManifest& manifest, const models::GmmModel2D& gmm, std::size_t per_cell,
                              std::uint64_t seed) {
    manifest.validate();
    const std::size_t n = manifest.cases.size();
    std::vector<CaseEntry> cases = manifest.cases;
    std::vector<double> density(n, 0.0);
    // dataset -> class -> component -> case indices (manifest order)
    std::map<std::string, std::array<std::array<std::vector<std::size_t>, 3>, 3>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = cases[i];
        if (!c.label) throw Error(ErrorCode::InvalidArgument, "case " + c.id + " has no class label");
        if (!c.coords) throw Error(ErrorCode::InvalidArgument, "case " + c.id + " has no embedding coordinates");
        const auto& mix = gmm[*c.label];
        if (mix.components.size() != 3) throw Error(ErrorCode::InvalidArgument, "sampling needs three components per class");
        const auto s = models::gmm_predict_subtype(gmm, *c.coords, *c.label);
        density[i] = mix.components[static_cast<std::size_t>(s.component)].density(*c.coords);
        c.subtype = s.subtype();
        groups[c.dataset][static_cast<std::size_t>(index_of(*c.label))][static_cast<std::size_t>(s.component)].push_back(i);
    }

    SplitResult out;
    std::vector<bool> held(n, false);
    Rng rng(seed);
    for (const auto& [dataset, by_class] : groups) {
        for (ClassLabel label : kAllClasses) {
            const auto& cells = by_class[static_cast<std::size_t>(index_of(label))];
            std::array<std::size_t, 3> available{cells[0].size(), cells[1].size(), cells[2].size()};
            if (available[0] + available[1] + available[2] == 0) continue;
            std::vector<std::size_t> quota;
            try {
                quota = distribute_quota(available, per_cell);
            } catch (const Error& e) {
                throw Error(ErrorCode::InsufficientClassCases,
                            "dataset " + dataset + ", class " + std::string(to_string(label)) + ": " + e.what());
            }
            for (std::size_t k = 0; k < 3; ++k) {
                std::vector<double> w;
                for (std::size_t i : cells[k]) w.push_back(density[i]);
                for (std::size_t pick : weighted_sample_without_replacement(w, quota[k], rng)) held[cells[k][pick]] = true;
                out.cells.push_back({dataset, std::string(1, subtype_prefix(label)) + std::to_string(k + 1), available[k], quota[k]});
            }
        }
    }
    out.holdout.base_dir = manifest.base_dir;
    out.train.base_dir = manifest.base_dir;
    for (std::size_t i = 0; i < n; ++i) (held[i] ? out.holdout : out.train).cases.push_back(cases[i]);
    return out;
}

}  // namespace circa::pipeline
