#pragma once

#include "circa/classes.hpp"
#include "circa/models/dense.hpp"
#include "circa/models/gmm.hpp"
#include "circa/models/knn_embed.hpp"
#include "circa/models/pca.hpp"
#include "circa/pipeline/cleaning.hpp"
#include "circa/pipeline/engine.hpp"
#include "circa/pipeline/manifest.hpp"
#include "circa/radiomics/matrix_io.hpp"
#include "circa/radiomics/scaler.hpp"
#include "circa/segmentation/roi.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace circa::pipeline {

/// Column names of the aggregation input, image branch first.
const std::vector<std::string>& branch_columns();
const std::vector<std::string>& image_probability_columns();
std::vector<std::string> deep_feature_columns(std::size_t width);

struct CorpusFeatures {
    radiomics::FeatureMatrix radiomics;     ///< catalog columns
    radiomics::FeatureMatrix image_probs;   ///< image_normal, image_pneumonia, image_covid
    radiomics::FeatureMatrix deep;          ///< deep_000, deep_001, ...
    std::vector<CaseRejection> rejections;  ///< gate rejections and per-case errors
};

/// Engine::extract_features over a manifest. Accepted cases become rows in
/// manifest order; everything else is reported, never thrown.
CorpusFeatures extract_corpus_features(const DatasetManifest& manifest, const Engine& engine, int jobs = 1);

/// Per-pixel ROI statistics over the accepted cases. Throws EmptyDataset.
segmentation::TrainStats corpus_train_stats(const DatasetManifest& manifest, const Engine& engine, int jobs = 1);

struct LabelTable {
    std::vector<std::string> ids;
    std::vector<ClassLabel> labels;
};

/// Labeled cases only, manifest order.
LabelTable labels_from_manifest(const DatasetManifest& manifest);
/// CSV "id,label".
void write_label_csv(const std::filesystem::path& path, const LabelTable& table);
LabelTable read_label_csv(const std::filesystem::path& path);

/// Class indices for the rows of m. Throws InvalidArgument for unlabeled rows.
std::vector<int> align_labels(const radiomics::FeatureMatrix& m, const LabelTable& table);

/// Radiomics branch on one catalog-ordered row: selection (empty keeps all),
/// optional scaling, dense forward pass.
ClassProbabilities radiomics_branch(const models::DenseNetParams& dense, std::span<const std::size_t> selection,
                                    const radiomics::FeatureScaler* scaler, std::span<const double> row);

/// Radiomics branch over a whole matrix; columns radiomics_normal, ...
radiomics::FeatureMatrix radiomics_branch_matrix(const models::DenseNetParams& dense,
                                                 std::span<const std::size_t> selection,
                                                 const radiomics::FeatureScaler* scaler,
                                                 const radiomics::FeatureMatrix& features);

/// Joins image-branch and radiomics-branch probabilities by id into the
/// six-column aggregation input, in the row order of `image`.
/// Throws InvalidArgument for ids missing from `radiomics`.
radiomics::FeatureMatrix branch_matrix(const radiomics::FeatureMatrix& image, const radiomics::FeatureMatrix& radiomics);

/// Scaler then PCA on every row.
radiomics::FeatureMatrix reduce_features(const radiomics::FeatureMatrix& deep, const radiomics::FeatureScaler* scaler,
                                         const models::PcaModel* pca);

/// Reference set pairing reduced features with manifest coordinates.
/// Throws InvalidArgument for rows whose case has no coordinates.
models::EmbeddingIndex build_embedding_index(const radiomics::FeatureMatrix& reduced, const DatasetManifest& manifest,
                                             int k);

/// Coordinates of labeled cases, grouped by class.
std::array<std::vector<models::Point2>, 3> coords_by_class(const DatasetManifest& manifest);

}  // namespace circa::pipeline
