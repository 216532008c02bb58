#include "circa/models/tree.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"
#include "circa/rng.hpp"

#include <algorithm>
#include <numeric>

namespace circa::models {
namespace {

constexpr double kMinImprovement = 1e-12;

struct Builder {
    const std::vector<std::vector<double>>& rows;
    std::span<const int> labels;
    const TreeConfig& config;
    int n_features;
    Rng rng;
    std::vector<TreeNode> nodes;

    std::array<double, 3> weighted(const std::array<double, 3>& counts) const {
        return {counts[0] * config.class_weights[0], counts[1] * config.class_weights[1],
                counts[2] * config.class_weights[2]};
    }

    int build(std::vector<std::size_t>& idx, int depth) {
        TreeNode node;
        node.depth = depth;
        node.samples = idx.size();
        for (std::size_t i : idx) node.counts[static_cast<std::size_t>(labels[i])] += 1.0;
        const auto w = weighted(node.counts);
        const double wsum = w[0] + w[1] + w[2];
        for (std::size_t c = 0; c < 3; ++c) node.probabilities[c] = wsum > 0.0 ? w[c] / wsum : node.counts[c] / static_cast<double>(idx.size());
        const int id = static_cast<int>(nodes.size());
        nodes.push_back(node);

        const int nonzero = (node.counts[0] > 0) + (node.counts[1] > 0) + (node.counts[2] > 0);
        const auto min_leaf = static_cast<std::size_t>(std::max(1, config.min_leaf));
        if (depth >= config.max_depth || nonzero <= 1 || idx.size() < 2 * min_leaf || !(wsum > 0.0)) return id;

        std::vector<int> features(static_cast<std::size_t>(n_features));
        std::iota(features.begin(), features.end(), 0);
        const int draw = config.features_per_split <= 0 ? n_features : std::min(config.features_per_split, n_features);
        if (draw < n_features) {
            rng.shuffle(std::span<int>(features));
            features.resize(static_cast<std::size_t>(draw));
            std::sort(features.begin(), features.end());
        }

        const double parent = weighted_gini(w);
        double best_impurity = parent - kMinImprovement;
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> sorted = idx;
        for (int f : features) {
            const auto fi = static_cast<std::size_t>(f);
            std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return rows[a][fi] < rows[b][fi]; });
            std::array<double, 3> left{};
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                left[static_cast<std::size_t>(labels[sorted[k]])] += 1.0;
                const double a = rows[sorted[k]][fi];
                const double b = rows[sorted[k + 1]][fi];
                if (!(a < b)) continue;
                const std::size_t n_left = k + 1;
                if (n_left < min_leaf || sorted.size() - n_left < min_leaf) continue;
                const std::array<double, 3> right{node.counts[0] - left[0], node.counts[1] - left[1], node.counts[2] - left[2]};
                const auto wl = weighted(left);
                const auto wr = weighted(right);
                const double sl = wl[0] + wl[1] + wl[2];
                const double sr = wr[0] + wr[1] + wr[2];
                const double impurity = (sl * weighted_gini(wl) + sr * weighted_gini(wr)) / wsum;
                if (impurity < best_impurity) {
                    best_impurity = impurity - kMinImprovement;
                    best_feature = f;
                    best_threshold = a + (b - a) / 2.0;
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            (rows[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        nodes[static_cast<std::size_t>(id)].feature = best_feature;
        nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
        const int l = build(left_idx, depth + 1);
        nodes[static_cast<std::size_t>(id)].left = l;
        const int r = build(right_idx, depth + 1);
        nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }
};

}  // namespace

double weighted_gini(const std::array<double, 3>& w) {
    const double s = w[0] + w[1] + w[2];
    if (!(s > 0.0)) return 0.0;
    return 1.0 - (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) / (s * s);
}

int DecisionTreeModel::depth() const {
    int d = 0;
    for (const auto& n : nodes) d = std::max(d, n.depth);
    return d;
}

std::size_t DecisionTreeModel::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

DecisionTreeModel tree_fit(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                           const TreeConfig& config) {
    if (rows.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a tree on no rows");
    if (rows.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "row and label counts differ");
    if (config.max_depth < 0) throw Error(ErrorCode::InvalidArgument, "max_depth must be non-negative");
    const auto width = rows.front().size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != width) throw Error(ErrorCode::ShapeMismatch, "ragged tree input");
        if (labels[i] < 0 || labels[i] > 2) throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
    for (double w : config.class_weights) {
        if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "class weights must be non-negative");
    }
    Builder b{rows, labels, config, static_cast<int>(width), Rng(config.seed), {}};
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    b.build(idx, 0);
    DecisionTreeModel tree;
    tree.nodes = std::move(b.nodes);
    tree.config = config;
    tree.n_features = static_cast<int>(width);
    return tree;
}

ClassProbabilities tree_predict(const DecisionTreeModel& tree, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(tree.n_features)) {
        throw Error(ErrorCode::ShapeMismatch, "tree expects " + std::to_string(tree.n_features) + " features, got " +
                                                  std::to_string(x.size()));
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::CorruptModel, "tree has no nodes");
    std::size_t at = 0;
    while (!tree.nodes[at].is_leaf()) {
        const auto& n = tree.nodes[at];
        at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    ClassProbabilities out;
    out.p = tree.nodes[at].probabilities;
    return out;
}

void save_tree(const std::filesystem::path& path, const DecisionTreeModel& tree) {
    Json nodes = Json::array();
    std::vector<float> payload;
    for (const auto& n : tree.nodes) {
        nodes.push_back(Json{{"feature", n.feature}, {"left", n.left}, {"right", n.right}, {"depth", n.depth},
                             {"samples", n.samples}});
        pack_f64(payload, n.threshold);
        pack_f64(payload, n.counts);
        pack_f64(payload, n.probabilities);
    }
    pack_f64(payload, tree.config.class_weights);
    const Json config{{"max_depth", tree.config.max_depth},
                      {"min_leaf", tree.config.min_leaf},
                      {"features_per_split", tree.config.features_per_split},
                      {"criterion", "gini"},
                      {"seed", std::to_string(tree.config.seed)}};
    save_model_file(path, "decision_tree", Json{{"n_features", tree.n_features}, {"config", config}, {"nodes", nodes}},
                    payload);
}

DecisionTreeModel load_tree(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "decision_tree");
    DecisionTreeModel tree;
    try {
        tree.n_features = file.meta.at("n_features").get<int>();
        const auto& cfg = file.meta.at("config");
        tree.config.max_depth = cfg.at("max_depth").get<int>();
        tree.config.min_leaf = cfg.at("min_leaf").get<int>();
        tree.config.features_per_split = cfg.at("features_per_split").get<int>();
        tree.config.seed = std::stoull(cfg.at("seed").get<std::string>());
        std::size_t pos = 0;
        const auto& nodes = file.meta.at("nodes");
        for (const auto& nj : nodes) {
            TreeNode n;
            n.feature = nj.at("feature").get<int>();
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
            n.depth = nj.at("depth").get<int>();
            n.samples = nj.at("samples").get<std::size_t>();
            n.threshold = unpack_f64(file.payload, pos, 1)[0];
            const auto counts = unpack_f64(file.payload, pos, 3);
            const auto probs = unpack_f64(file.payload, pos, 3);
            std::copy(counts.begin(), counts.end(), n.counts.begin());
            std::copy(probs.begin(), probs.end(), n.probabilities.begin());
            tree.nodes.push_back(n);
        }
        const auto cw = unpack_f64(file.payload, pos, 3);
        std::copy(cw.begin(), cw.end(), tree.config.class_weights.begin());
        if (pos != file.payload.size()) throw Error(ErrorCode::CorruptModel, "tree payload size mismatch");
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed tree header: ") + e.what());
    }
    const auto count = static_cast<int>(tree.nodes.size());
    if (count == 0) throw Error(ErrorCode::CorruptModel, "tree has no nodes");
    for (int i = 0; i < count; ++i) {
        const auto& n = tree.nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) continue;
        if (n.feature >= tree.n_features || n.left <= i || n.right <= i || n.left >= count || n.right >= count) {
            throw Error(ErrorCode::CorruptModel, "tree node " + std::to_string(i) + " is malformed");
        }
    }
    return tree;
}

}  // namespace circa::models
