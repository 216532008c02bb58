#pragma once

// Brute-force reference implementations used by unit and acceptance tests.
// They favour obviousness over speed and share no code with the library.

#include <array>
#include <utility>
#include <vector>

namespace circa::oracle {

/// O(n^2) medcouple: median over every (x_i <= med <= x_j) pair of
/// ((x_j - med) - (med - x_i)) / (x_j - x_i), with the sign rule for pairs tied at the median.
double medcouple(const std::vector<double>& xs);

/// numpy-default linear interpolation quantile.
double quantile(std::vector<double> xs, double q);

/// Kruskal-Wallis H from explicit average ranks and the tie correction 1 - sum(t^3 - t)/(n^3 - n).
struct KwResult {
    double h = 0.0;
    double tie_correction = 1.0;
};
KwResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Number of 8-connected components by repeated flood fill over a 0/1 grid.
std::vector<int> component_sizes(const std::vector<std::vector<int>>& grid);

/// Level grid indexed [row][col]; 0 marks pixels outside the region.
using LevelGrid = std::vector<std::vector<int>>;

/// 19 first-order statistics written out from their definitions, catalog order.
std::vector<double> first_order(const std::vector<double>& values, double bin_width);

/// Symmetric co-occurrence matrix [i-1][j-1] from explicit enumeration of
/// every in-region pixel pair, normalized per offset and averaged.
std::vector<std::vector<double>> glcm(const LevelGrid& grid, int n_levels,
                                      const std::vector<std::pair<int, int>>& offsets);

struct GlcmSubset {
    double autocorrelation, joint_average, cluster_tendency, contrast, correlation;
    double difference_average, joint_energy, joint_entropy, idm, id, maximum_probability;
    double sum_average, sum_squares;
};
GlcmSubset glcm_subset(const std::vector<std::vector<double>>& p);

/// Every maximal run (level, length) along direction (dx, dy).
std::vector<std::pair<int, int>> runs(const LevelGrid& grid, int dx, int dy);

/// 16 run-length features from run lists, one list per direction, with
/// counts averaged over directions.
std::vector<double> glrlm(const std::vector<std::vector<std::pair<int, int>>>& runs_per_direction, double n_pixels);

/// Exhaustive CART: every feature, every midpoint, children recounted from
/// scratch. Nodes in preorder (left subtree first); feature -1 marks a leaf.
struct CartNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
};
std::vector<CartNode> cart(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels, int max_depth,
                           int min_leaf, const std::array<double, 3>& class_weights);

/// Bivariate normal density from the explicit inverse and determinant; cov = (xx, xy, yy).
double gaussian2d(double x, double y, double mx, double my, const std::array<double, 3>& cov);

/// Indices of the k nearest rows by cosine distance (full scan, ties to lower index).
std::vector<std::size_t> knn_scan(const std::vector<std::vector<double>>& rows, const std::vector<double>& query,
                                  std::size_t k);

}  // namespace circa::oracle
