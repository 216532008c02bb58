#pragma once

#include "circa/classes.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace circa::models {

struct TreeConfig {
    int max_depth = 7;
    int min_leaf = 100;            ///< minimum training rows per leaf
    int features_per_split = 3;    ///< <= 0 means all features
    std::array<double, 3> class_weights{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  ///< -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int depth = 0;
    std::size_t samples = 0;
    std::array<double, 3> counts{};         ///< raw class counts
    std::array<double, 3> probabilities{};  ///< class-weighted, normalized

    bool is_leaf() const noexcept { return feature < 0; }
};

struct DecisionTreeModel {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root; preorder, left subtree first
    TreeConfig config;
    int n_features = 0;

    int depth() const;
    std::size_t leaf_count() const;
};

/// 1 - sum p_c^2 over class-weighted counts.
double weighted_gini(const std::array<double, 3>& weighted_counts);

/// Greedy CART on the class-weighted Gini impurity. At each node a seeded
/// draw of features_per_split features (without replacement) is searched in
/// ascending index order over midpoints of consecutive distinct values; a
/// split must leave min_leaf rows on each side and lower the weighted child
/// impurity by more than 1e-12. Equal candidates keep the lower feature index,
/// then the lower threshold. Throws EmptyDataset.
DecisionTreeModel tree_fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                           const TreeConfig& config);

/// Routes by x[feature] <= threshold to the left. Throws ShapeMismatch.
ClassProbabilities tree_predict(const DecisionTreeModel& tree, std::span<const double> x);

void save_tree(const std::filesystem::path& path, const DecisionTreeModel& tree);
DecisionTreeModel load_tree(const std::filesystem::path& path);

}  // namespace circa::models
