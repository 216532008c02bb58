#pragma once

#include "circa/json.hpp"
#include "circa/models/gmm.hpp"
#include "circa/pipeline/manifest.hpp"
#include "circa/rng.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace circa::pipeline {

inline constexpr std::size_t kDefaultPerCell = 50;

/// k sequential draws without replacement, each proportional to the weights
/// still in the pool. When every remaining weight is zero the draw is
/// uniform. Returns indices in draw order.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights, std::size_t k, Rng& rng);

/// Per-cell quotas for one class: min(per_cell, available) first, then the
/// deficit spread over the remaining capacity in proportion to it (largest
/// remainder, ties to the lower cell). Throws InsufficientClassCases when
/// the class holds fewer than cells * per_cell cases.
std::vector<std::size_t> distribute_quota(std::span<const std::size_t> available, std::size_t per_cell);

struct SampleCell {
    std::string dataset;
    std::string subtype;
    std::size_t available = 0;
    std::size_t quota = 0;
};

struct SplitResult {
    DatasetManifest holdout;
    DatasetManifest train;
    std::vector<SampleCell> cells;

    Json report() const;
};

/// Holdout of per_cell cases per (subtype, dataset) cell, sampled with
/// weights equal to the subtype component density at the case coordinates.
/// Subtypes are the mixture argmax within the case's class and are written
/// to both outputs. Classes absent from a dataset are skipped. Input order is
/// preserved in both outputs.
SplitResult stratified_sample(const DatasetManifest& manifest, const models::GmmModel2D& gmm,
                              std::size_t per_cell = kDefaultPerCell, std::uint64_t seed = 0);

}  // namespace circa::pipeline
