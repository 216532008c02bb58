#include "circa/pipeline/training.hpp"

#include "circa/error.hpp"
#include "circa/io.hpp"
#include "circa/parallel.hpp"
#include "circa/radiomics/catalog.hpp"

#include <cstdio>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace circa::pipeline {
namespace {

struct CaseExtraction {
    std::optional<CaseFeatures> features;
    std::optional<CaseRejection> rejection;
};

CaseExtraction extract_one(const DatasetManifest& manifest, const CaseEntry& entry, const Engine& engine) {
    CaseExtraction out;
    try {
        auto cf = engine.extract_features(read_file_bytes(manifest.resolve(entry)));
        if (const auto& rej = cf.result.rejection) {
            std::optional<double> score;
            if (cf.result.quality) score = cf.result.quality->value;
            out.rejection = CaseRejection{entry.id, std::string(to_string(rej->reason)), score, rej->message, rej->details};
        } else {
            out.features = std::move(cf);
        }
    } catch (const Error& e) {
        out.rejection = CaseRejection{entry.id, "Error", std::nullopt, e.what(),
                                      Json{{"code", std::string(to_string(e.code()))}, {"stage", e.stage()}}};
    }
    return out;
}

std::vector<CaseExtraction> extract_all(const DatasetManifest& manifest, const Engine& engine, int jobs) {
    manifest.validate();
    std::vector<CaseExtraction> results(manifest.cases.size());
    parallel_for(results.size(), jobs,
                 [&](std::size_t i) { results[i] = extract_one(manifest, manifest.cases[i], engine); });
    return results;
}

std::vector<std::string> prefixed(std::string_view prefix) {
    std::vector<std::string> out;
    for (auto c : kAllClasses) out.push_back(std::string(prefix) + std::string(to_string(c)));
    return out;
}

std::unordered_map<std::string, std::size_t> index_ids(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::size_t> map;
    for (std::size_t i = 0; i < ids.size(); ++i) map.emplace(ids[i], i);
    return map;
}

}  // namespace

const std::vector<std::string>& image_probability_columns() {
    static const auto cols = prefixed("image_");
    return cols;
}

const std::vector<std::string>& branch_columns() {
    static const auto cols = [] {
        auto c = prefixed("image_");
        for (auto& r : prefixed("radiomics_")) c.push_back(r);
        return c;
    }();
    return cols;
}

std::vector<std::string> deep_feature_columns(std::size_t width) {
    std::vector<std::string> cols;
    cols.reserve(width);
    char buf[32];
    for (std::size_t i = 0; i < width; ++i) {
        std::snprintf(buf, sizeof buf, "deep_%03zu", i);
        cols.emplace_back(buf);
    }
    return cols;
}

CorpusFeatures extract_corpus_features(const DatasetManifest& manifest, const Engine& engine, int jobs) {
    auto results = extract_all(manifest, engine, jobs);
    CorpusFeatures out;
    out.radiomics.columns = radiomics::FeatureCatalog::standard().names();
    out.image_probs.columns = image_probability_columns();
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& r = results[i];
        if (r.rejection) {
            out.rejections.push_back(std::move(*r.rejection));
            continue;
        }
        const auto& id = manifest.cases[i].id;
        auto& cf = *r.features;
        if (out.deep.columns.empty()) out.deep.columns = deep_feature_columns(cf.deep_features.size());
        if (cf.deep_features.size() != out.deep.columns.size()) {
            throw Error(ErrorCode::ShapeMismatch, "feature extractor width changed at case " + id);
        }
        out.radiomics.ids.push_back(id);
        out.radiomics.rows.push_back(std::move(cf.radiomics));
        out.image_probs.ids.push_back(id);
        out.image_probs.rows.emplace_back(cf.image_probabilities->p.begin(), cf.image_probabilities->p.end());
        out.deep.ids.push_back(id);
        out.deep.rows.push_back(std::move(cf.deep_features));
    }
    return out;
}

segmentation::TrainStats corpus_train_stats(const DatasetManifest& manifest, const Engine& engine, int jobs) {
    auto results = extract_all(manifest, engine, jobs);
    std::vector<imaging::RasterImage> rois;
    for (auto& r : results) {
        if (r.features && r.features->result.artifacts.roi) rois.push_back(std::move(r.features->result.artifacts.roi->intensity));
    }
    if (rois.empty()) throw Error(ErrorCode::EmptyDataset, "no case passed the gates");
    return segmentation::compute_train_stats(rois);
}

LabelTable labels_from_manifest(const DatasetManifest& manifest) {
    LabelTable t;
    for (const auto& c : manifest.cases) {
        if (!c.label) continue;
        t.ids.push_back(c.id);
        t.labels.push_back(*c.label);
    }
    return t;
}

void write_label_csv(const std::filesystem::path& path, const LabelTable& table) {
    std::string text = "id,label\n";
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        text += table.ids[i] + "," + std::string(to_string(table.labels[i])) + "\n";
    }
    write_file_text(path, text);
}

LabelTable read_label_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file_text(path));
    std::string line;
    if (!std::getline(in, line) || line != "id,label") {
        throw Error(ErrorCode::CorruptStream, path.string() + ": expected header id,label");
    }
    LabelTable t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        const auto label = comma == std::string::npos ? std::nullopt : parse_class_label(line.substr(comma + 1));
        if (!label || comma == 0) {
            throw Error(ErrorCode::CorruptStream, path.string() + ":" + std::to_string(lineno) + ": bad label row");
        }
        t.ids.push_back(line.substr(0, comma));
        t.labels.push_back(*label);
    }
    return t;
}

std::vector<int> align_labels(const radiomics::FeatureMatrix& m, const LabelTable& table) {
    const auto index = index_ids(table.ids);
    std::vector<int> out;
    out.reserve(m.ids.size());
    for (const auto& id : m.ids) {
        auto it = index.find(id);
        if (it == index.end()) throw Error(ErrorCode::InvalidArgument, "no label for case " + id);
        out.push_back(index_of(table.labels[it->second]));
    }
    return out;
}

ClassProbabilities radiomics_branch(const models::DenseNetParams& dense, std::span<const std::size_t> selection,
                                    const radiomics::FeatureScaler* scaler, std::span<const double> row) {
    std::vector<double> x;
    if (selection.empty()) {
        x.assign(row.begin(), row.end());
    } else {
        x.reserve(selection.size());
        for (std::size_t i : selection) {
            if (i >= row.size()) throw Error(ErrorCode::CorruptModel, "feature selection index out of range");
            x.push_back(row[i]);
        }
    }
    if (scaler) x = radiomics::apply_scaler(*scaler, x);
    return models::dense_forward(dense, x);
}

radiomics::FeatureMatrix radiomics_branch_matrix(const models::DenseNetParams& dense,
                                                 std::span<const std::size_t> selection,
                                                 const radiomics::FeatureScaler* scaler,
                                                 const radiomics::FeatureMatrix& features) {
    radiomics::FeatureMatrix out;
    out.columns = prefixed("radiomics_");
    out.ids = features.ids;
    for (const auto& row : features.rows) {
        const auto p = radiomics_branch(dense, selection, scaler, row);
        out.rows.emplace_back(p.p.begin(), p.p.end());
    }
    return out;
}

radiomics::FeatureMatrix branch_matrix(const radiomics::FeatureMatrix& image, const radiomics::FeatureMatrix& radiomics) {
    if (image.columns.size() != 3 || radiomics.columns.size() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "branch probability tables need three columns");
    }
    const auto index = index_ids(radiomics.ids);
    radiomics::FeatureMatrix out;
    out.columns = branch_columns();
    for (std::size_t i = 0; i < image.ids.size(); ++i) {
        auto it = index.find(image.ids[i]);
        if (it == index.end()) throw Error(ErrorCode::InvalidArgument, "no radiomics-branch row for case " + image.ids[i]);
        auto row = image.rows[i];
        const auto& r = radiomics.rows[it->second];
        row.insert(row.end(), r.begin(), r.end());
        out.ids.push_back(image.ids[i]);
        out.rows.push_back(std::move(row));
    }
    return out;
}

radiomics::FeatureMatrix reduce_features(const radiomics::FeatureMatrix& deep, const radiomics::FeatureScaler* scaler,
                                         const models::PcaModel* pca) {
    radiomics::FeatureMatrix out;
    out.ids = deep.ids;
    for (const auto& row : deep.rows) {
        auto x = row;
        if (scaler) x = radiomics::apply_scaler(*scaler, x);
        if (pca) x = models::pca_transform(*pca, x);
        out.rows.push_back(std::move(x));
    }
    const std::size_t width = out.rows.empty() ? 0 : out.rows.front().size();
    char buf[32];
    for (std::size_t i = 0; i < width; ++i) {
        std::snprintf(buf, sizeof buf, "pc_%03zu", i);
        out.columns.emplace_back(buf);
    }
    return out;
}

models::EmbeddingIndex build_embedding_index(const radiomics::FeatureMatrix& reduced, const DatasetManifest& manifest,
                                             int k) {
    models::EmbeddingIndex index;
    index.k = k;
    for (std::size_t i = 0; i < reduced.ids.size(); ++i) {
        const auto* entry = manifest.find(reduced.ids[i]);
        if (!entry || !entry->coords) {
            throw Error(ErrorCode::InvalidArgument, "no embedding coordinates for case " + reduced.ids[i]);
        }
        index.features.push_back(reduced.rows[i]);
        index.coords.push_back(*entry->coords);
    }
    if (index.features.empty()) throw Error(ErrorCode::EmptyTrainSet, "embedding index has no rows");
    return index;
}

std::array<std::vector<models::Point2>, 3> coords_by_class(const DatasetManifest& manifest) {
    std::array<std::vector<models::Point2>, 3> out;
    for (const auto& c : manifest.cases) {
        if (c.label && c.coords) out[static_cast<std::size_t>(index_of(*c.label))].push_back(*c.coords);
    }
    return out;
}

}  // namespace circa::pipeline
