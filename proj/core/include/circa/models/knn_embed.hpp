#pragma once

#include "circa/models/gmm.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace circa::models {

inline constexpr int kDefaultNeighbours = 10;

/// Reference set for out-of-sample 2D embedding.
struct EmbeddingIndex {
    std::vector<std::vector<double>> features;  ///< PCA-reduced training vectors
    std::vector<Point2> coords;                 ///< their 2D embedding
    int k = kDefaultNeighbours;
};

struct KnnEmbedding {
    Point2 point{0.0, 0.0};
    std::vector<std::size_t> neighbours;  ///< nearest first, ties to the lower index
    std::vector<double> distances;
    std::vector<double> weights;          ///< normalized 1/(d + 1e-9)
};

/// 1 - cos(a, b); a zero vector has distance 1 to everything.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Inverse-distance-weighted mean of the k nearest coordinates under cosine
/// distance; a neighbour at distance <= 1e-15 is returned exactly.
/// Throws EmptyTrainSet, InvalidArgument for k < 1, ShapeMismatch.
KnnEmbedding knn_embed(std::span<const double> query, const EmbeddingIndex& index, int k);
inline KnnEmbedding knn_embed(std::span<const double> query, const EmbeddingIndex& index) {
    return knn_embed(query, index, index.k);
}

void save_embedding_index(const std::filesystem::path& path, const EmbeddingIndex& index);
EmbeddingIndex load_embedding_index(const std::filesystem::path& path);

}  // namespace circa::models
