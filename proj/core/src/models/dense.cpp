#include "circa/models/dense.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace circa::models {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;

ConstWeights weights_of(const DenseLayer& l) { return ConstWeights(l.weights.data(), l.outputs, l.inputs); }

void check_input(const DenseNetParams& p, std::size_t width) {
    if (p.layers.empty()) throw Error(ErrorCode::CorruptModel, "network has no layers");
    if (width != p.input_width()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "network expects " + std::to_string(p.input_width()) + " inputs, got " + std::to_string(width));
    }
}

void softmax_rows(RowMatrix& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double m = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - m).exp();
        z.row(r) /= z.row(r).sum();
    }
}

struct Forward {
    std::vector<RowMatrix> pre;   // z per layer
    std::vector<RowMatrix> post;  // activations per layer, post[0] = input
};

Forward forward_batch(const DenseNetParams& p, const RowMatrix& x, const std::vector<const DropoutMask*>& masks) {
    Forward f;
    f.post.push_back(x);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const DenseLayer& layer = p.layers[l];
        RowMatrix z = f.post.back() * weights_of(layer).transpose();
        z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), layer.outputs);
        f.pre.push_back(z);
        if (layer.activation == Activation::Softmax) {
            softmax_rows(z);
        } else {
            z = z.cwiseMax(0.0);
            for (std::size_t r = 0; r < masks.size(); ++r) {
                if (masks[r] == nullptr) continue;
                const auto& m = (*masks[r])[l];
                for (Eigen::Index c = 0; c < z.cols(); ++c) z(static_cast<Eigen::Index>(r), c) *= m[static_cast<std::size_t>(c)];
            }
        }
        f.post.push_back(std::move(z));
    }
    return f;
}

RowMatrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t width) {
    RowMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width) throw Error(ErrorCode::ShapeMismatch, "row " + std::to_string(r) + " has wrong width");
        for (std::size_t c = 0; c < width; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return x;
}

ClassProbabilities forward_one(const DenseNetParams& p, std::span<const double> x, const DropoutMask* mask) {
    check_input(p, x.size());
    RowMatrix m(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = x[i];
    const Forward f = forward_batch(p, m, {mask});
    ClassProbabilities out;
    for (int c = 0; c < 3; ++c) out.p[static_cast<std::size_t>(c)] = f.post.back()(0, c);
    return out;
}

}  // namespace

std::size_t DenseNetParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void DenseNetParams::validate() const {
    if (layers.empty()) throw Error(ErrorCode::CorruptModel, "network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.inputs < 1 || layer.outputs < 1 ||
            layer.weights.size() != static_cast<std::size_t>(layer.inputs) * static_cast<std::size_t>(layer.outputs) ||
            layer.bias.size() != static_cast<std::size_t>(layer.outputs)) {
            throw Error(ErrorCode::CorruptModel, "layer " + std::to_string(l) + " has inconsistent shapes");
        }
        if (l > 0 && layer.inputs != layers[l - 1].outputs) {
            throw Error(ErrorCode::CorruptModel, "layer " + std::to_string(l) + " does not chain");
        }
        const bool last = l + 1 == layers.size();
        if (last != (layer.activation == Activation::Softmax)) {
            throw Error(ErrorCode::CorruptModel, "only the last layer may be softmax");
        }
    }
    if (layers.back().outputs != 3) throw Error(ErrorCode::CorruptModel, "output layer must have 3 units");
    if (!(dropout >= 0.0 && dropout < 1.0) || !(l2 >= 0.0)) throw Error(ErrorCode::CorruptModel, "invalid regularization");
}

DenseNetParams dense_init(int input_width, std::span<const int> hidden_widths, Rng& rng, double l2, double dropout) {
    if (input_width < 1) throw Error(ErrorCode::InvalidArgument, "input width must be positive");
    DenseNetParams p;
    p.l2 = l2;
    p.dropout = dropout;
    std::vector<int> widths(hidden_widths.begin(), hidden_widths.end());
    widths.push_back(3);
    int fan_in = input_width;
    for (std::size_t l = 0; l < widths.size(); ++l) {
        DenseLayer layer;
        layer.inputs = fan_in;
        layer.outputs = widths[l];
        layer.activation = l + 1 == widths.size() ? Activation::Softmax : Activation::Relu;
        const double limit = std::sqrt(6.0 / fan_in);
        layer.weights.resize(static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(widths[l]));
        for (double& w : layer.weights) w = rng.uniform(-limit, limit);
        layer.bias.assign(static_cast<std::size_t>(widths[l]), 0.0);
        p.layers.push_back(std::move(layer));
        fan_in = widths[l];
    }
    p.validate();
    return p;
}

ClassProbabilities dense_forward(const DenseNetParams& params, std::span<const double> x) {
    return forward_one(params, x, nullptr);
}

ClassProbabilities dense_forward(const DenseNetParams& params, std::span<const double> x, const DropoutMask& mask) {
    return forward_one(params, x, &mask);
}

DropoutMask draw_dropout_mask(const DenseNetParams& params, Rng& rng) {
    DropoutMask mask;
    const double keep = 1.0 - params.dropout;
    for (const auto& layer : params.layers) {
        std::vector<double> m(static_cast<std::size_t>(layer.outputs), 1.0);
        if (layer.activation == Activation::Relu && params.dropout > 0.0) {
            for (double& v : m) v = rng.uniform() < params.dropout ? 0.0 : 1.0 / keep;
        }
        mask.push_back(std::move(m));
    }
    return mask;
}

double dense_loss(const DenseNetParams& params, const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                  std::span<const double> sample_weights, DenseGradient* grad, const std::vector<DropoutMask>* masks) {
    if (rows.empty()) throw Error(ErrorCode::EmptyDataset, "empty batch");
    if (labels.size() != rows.size() || sample_weights.size() != rows.size() || (masks && masks->size() != rows.size())) {
        throw Error(ErrorCode::ShapeMismatch, "batch components differ in length");
    }
    check_input(params, rows.front().size());
    const RowMatrix x = to_matrix(rows, params.input_width());
    std::vector<const DropoutMask*> mask_ptrs(rows.size(), nullptr);
    if (masks) {
        for (std::size_t r = 0; r < rows.size(); ++r) mask_ptrs[r] = &(*masks)[r];
    }
    const Forward f = forward_batch(params, x, mask_ptrs);
    const auto n = static_cast<double>(rows.size());

    double loss = 0.0;
    const RowMatrix& logits = f.pre.back();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        if (labels[r] < 0 || labels[r] > 2) throw Error(ErrorCode::InvalidArgument, "label out of range");
        const double m = logits.row(ri).maxCoeff();
        const double lse = m + std::log((logits.row(ri).array() - m).exp().sum());
        loss += sample_weights[r] * (lse - logits(ri, labels[r])) / n;
    }
    for (const auto& layer : params.layers) {
        double sq = 0.0;
        for (double w : layer.weights) sq += w * w;
        loss += params.l2 * sq;
    }
    if (!grad) return loss;

    const std::size_t n_layers = params.layers.size();
    grad->weights.assign(n_layers, {});
    grad->bias.assign(n_layers, {});
    RowMatrix delta = f.post.back();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        delta(ri, labels[r]) -= 1.0;
        delta.row(ri) *= sample_weights[r] / n;
    }
    for (std::size_t l = n_layers; l-- > 0;) {
        const DenseLayer& layer = params.layers[l];
        RowMatrix gw = delta.transpose() * f.post[l];
        gw += 2.0 * params.l2 * weights_of(layer);
        grad->weights[l].assign(gw.data(), gw.data() + gw.size());
        const Eigen::RowVectorXd gb = delta.colwise().sum();
        grad->bias[l].assign(gb.data(), gb.data() + gb.size());
        if (l == 0) break;
        RowMatrix upstream = delta * weights_of(layer);
        const RowMatrix& z_prev = f.pre[l - 1];
        for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
            const DropoutMask* mk = mask_ptrs[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < upstream.cols(); ++c) {
                double g = z_prev(r, c) > 0.0 ? upstream(r, c) : 0.0;
                if (mk) g *= (*mk)[l - 1][static_cast<std::size_t>(c)];
                upstream(r, c) = g;
            }
        }
        delta = std::move(upstream);
    }
    return loss;
}

double weighted_cross_entropy(const DenseNetParams& params, const std::vector<std::vector<double>>& rows,
                              std::span<const int> labels, const std::array<double, 3>& class_weights) {
    std::vector<double> w(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) w[i] = class_weights[static_cast<std::size_t>(labels[i])];
    DenseNetParams no_l2 = params;
    no_l2.l2 = 0.0;
    return dense_loss(no_l2, rows, labels, w);
}

DenseNetParams dense_train(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                           const DenseTrainConfig& config, DenseTrainHistory* history) {
    if (rows.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "row and label counts differ");
    if (config.batch_size < 1 || config.epochs < 0 || !(config.learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
    }
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 2) throw Error(ErrorCode::InvalidArgument, "label out of range");
        if (config.class_weights[static_cast<std::size_t>(labels[i])] == 0.0) continue;
        x.push_back(rows[i]);
        y.push_back(labels[i]);
    }
    if (x.empty()) throw Error(ErrorCode::EmptyDataset, "no training rows with non-zero class weight");

    Rng init_rng(derive_seed(config.seed, 0));
    Rng shuffle_rng(derive_seed(config.seed, 1));
    Rng dropout_rng(derive_seed(config.seed, 2));
    DenseNetParams p = dense_init(static_cast<int>(x.front().size()), config.hidden_widths, init_rng, config.l2, config.dropout);

    std::vector<std::vector<double>> m(p.layers.size() * 2), v(p.layers.size() * 2);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        m[2 * l].assign(p.layers[l].weights.size(), 0.0);
        v[2 * l].assign(p.layers[l].weights.size(), 0.0);
        m[2 * l + 1].assign(p.layers[l].bias.size(), 0.0);
        v[2 * l + 1].assign(p.layers[l].bias.size(), 0.0);
    }
    if (history) {
        history->epoch_loss.clear();
        history->initial_loss = weighted_cross_entropy(p, x, y, config.class_weights);
    }

    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    long step = 0;
    const double b1 = config.beta1, b2 = config.beta2;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<std::vector<double>> bx;
            std::vector<int> by;
            std::vector<double> bw;
            std::vector<DropoutMask> masks;
            for (std::size_t i = start; i < end; ++i) {
                bx.push_back(x[order[i]]);
                by.push_back(y[order[i]]);
                bw.push_back(config.class_weights[static_cast<std::size_t>(y[order[i]])]);
                masks.push_back(draw_dropout_mask(p, dropout_rng));
            }
            DenseGradient g;
            const double loss = dense_loss(p, bx, by, bw, &g, &masks);
            if (!std::isfinite(loss)) {
                throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                          ", batch starting at " + std::to_string(start));
            }
            ++step;
            const double t = static_cast<double>(step);
            const double c1 = 1.0 - std::pow(b1, t);
            const double c1_next = 1.0 - std::pow(b1, t + 1.0);
            const double c2 = 1.0 - std::pow(b2, t);
            for (std::size_t l = 0; l < p.layers.size(); ++l) {
                for (int part = 0; part < 2; ++part) {
                    auto& theta = part == 0 ? p.layers[l].weights : p.layers[l].bias;
                    const auto& grad = part == 0 ? g.weights[l] : g.bias[l];
                    auto& mm = m[2 * l + static_cast<std::size_t>(part)];
                    auto& vv = v[2 * l + static_cast<std::size_t>(part)];
                    for (std::size_t k = 0; k < theta.size(); ++k) {
                        mm[k] = b1 * mm[k] + (1.0 - b1) * grad[k];
                        vv[k] = b2 * vv[k] + (1.0 - b2) * grad[k] * grad[k];
                        const double m_hat = b1 * mm[k] / c1_next + (1.0 - b1) * grad[k] / c1;
                        const double v_hat = vv[k] / c2;
                        theta[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
                    }
                }
            }
        }
        if (history) history->epoch_loss.push_back(weighted_cross_entropy(p, x, y, config.class_weights));
    }
    return p;
}

void save_dense(const std::filesystem::path& path, const DenseNetParams& params) {
    params.validate();
    Json layers = Json::array();
    std::vector<float> payload;
    for (const auto& l : params.layers) {
        layers.push_back(Json{{"inputs", l.inputs},
                              {"outputs", l.outputs},
                              {"activation", l.activation == Activation::Relu ? "relu" : "softmax"}});
        pack_f64(payload, l.weights);
        pack_f64(payload, l.bias);
    }
    pack_f64(payload, std::array<double, 2>{params.l2, params.dropout});
    save_model_file(path, "dense_net", Json{{"layers", layers}}, payload);
}

DenseNetParams load_dense(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "dense_net");
    DenseNetParams p;
    try {
        std::size_t pos = 0;
        for (const auto& lj : file.meta.at("layers")) {
            DenseLayer l;
            l.inputs = lj.at("inputs").get<int>();
            l.outputs = lj.at("outputs").get<int>();
            const auto act = lj.at("activation").get<std::string>();
            if (act != "relu" && act != "softmax") throw Error(ErrorCode::CorruptModel, "unknown activation " + act);
            l.activation = act == "relu" ? Activation::Relu : Activation::Softmax;
            if (l.inputs < 1 || l.outputs < 1) throw Error(ErrorCode::CorruptModel, "invalid layer shape");
            l.weights = unpack_f64(file.payload, pos, static_cast<std::size_t>(l.inputs) * static_cast<std::size_t>(l.outputs));
            l.bias = unpack_f64(file.payload, pos, static_cast<std::size_t>(l.outputs));
            p.layers.push_back(std::move(l));
        }
        const auto reg = unpack_f64(file.payload, pos, 2);
        p.l2 = reg[0];
        p.dropout = reg[1];
        if (pos != file.payload.size()) throw Error(ErrorCode::CorruptModel, "dense payload size mismatch");
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed dense header: ") + e.what());
    }
    p.validate();
    return p;
}

}  // namespace circa::models
