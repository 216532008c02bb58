#include "circa/models/knn_embed.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace circa::models {

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

KnnEmbedding knn_embed(std::span<const double> query, const EmbeddingIndex& index, int k) {
    if (index.features.empty()) throw Error(ErrorCode::EmptyTrainSet, "embedding index is empty");
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    if (index.coords.size() != index.features.size()) throw Error(ErrorCode::CorruptModel, "index features and coords differ");
    const std::size_t n = index.features.size();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (index.features[i].size() != query.size()) {
            throw Error(ErrorCode::ShapeMismatch, "query width " + std::to_string(query.size()) + " differs from index width " +
                                                      std::to_string(index.features[i].size()));
        }
        dist[i] = cosine_distance(query, index.features[i]);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(n, static_cast<std::size_t>(k));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });

    KnnEmbedding out;
    out.neighbours.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i : out.neighbours) out.distances.push_back(dist[i]);
    if (out.distances.front() <= 1e-15) {
        out.weights.assign(take, 0.0);
        out.weights.front() = 1.0;
        out.point = index.coords[out.neighbours.front()];
        return out;
    }
    double total = 0.0;
    for (double d : out.distances) {
        out.weights.push_back(1.0 / (d + 1e-9));
        total += out.weights.back();
    }
    for (std::size_t j = 0; j < take; ++j) {
        out.weights[j] /= total;
        out.point[0] += out.weights[j] * index.coords[out.neighbours[j]][0];
        out.point[1] += out.weights[j] * index.coords[out.neighbours[j]][1];
    }
    return out;
}

void save_embedding_index(const std::filesystem::path& path, const EmbeddingIndex& index) {
    if (index.coords.size() != index.features.size()) throw Error(ErrorCode::ShapeMismatch, "features and coords differ");
    const std::size_t dim = index.features.empty() ? 0 : index.features.front().size();
    std::vector<float> payload;
    for (const auto& f : index.features) {
        if (f.size() != dim) throw Error(ErrorCode::ShapeMismatch, "ragged embedding index");
        pack_f64(payload, f);
    }
    for (const auto& c : index.coords) pack_f64(payload, c);
    save_model_file(path, "knn_index", Json{{"k", index.k}, {"n", index.features.size()}, {"dim", dim}}, payload);
}

EmbeddingIndex load_embedding_index(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "knn_index");
    EmbeddingIndex index;
    try {
        index.k = file.meta.at("k").get<int>();
        const auto n = file.meta.at("n").get<std::size_t>();
        const auto dim = file.meta.at("dim").get<std::size_t>();
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) index.features.push_back(unpack_f64(file.payload, pos, dim));
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = unpack_f64(file.payload, pos, 2);
            index.coords.push_back({c[0], c[1]});
        }
        if (pos != file.payload.size()) throw Error(ErrorCode::CorruptModel, "embedding index payload size mismatch");
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed embedding index header: ") + e.what());
    }
    return index;
}

}  // namespace circa::models
