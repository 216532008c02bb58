#pragma once

#include "circa/classes.hpp"
#include "circa/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace circa::models {

enum class Activation { Relu, Softmax };

struct DenseLayer {
    int inputs = 0;
    int outputs = 0;
    std::vector<double> weights;  ///< outputs x inputs, row-major
    std::vector<double> bias;
    Activation activation = Activation::Relu;
};

inline constexpr std::array<int, 6> kHiddenWidths{1024, 512, 256, 128, 64, 32};
inline constexpr double kDefaultL2 = 1e-4;
inline constexpr double kDefaultDropout = 0.2;

/// ReLU hidden layers followed by a 3-way softmax layer.
struct DenseNetParams {
    std::vector<DenseLayer> layers;
    double l2 = kDefaultL2;
    double dropout = kDefaultDropout;

    std::size_t input_width() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().inputs); }
    std::size_t parameter_count() const;

    /// Throws CorruptModel unless shapes chain, the last layer is a 3-wide
    /// softmax and every other layer is ReLU.
    void validate() const;
};

/// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
DenseNetParams dense_init(int input_width, std::span<const int> hidden_widths, Rng& rng, double l2 = kDefaultL2,
                          double dropout = kDefaultDropout);

/// Inference-mode forward pass. Throws ShapeMismatch.
ClassProbabilities dense_forward(const DenseNetParams& params, std::span<const double> x);

/// Per hidden layer multipliers: 0 for dropped units, 1 / (1 - rate) for kept ones.
using DropoutMask = std::vector<std::vector<double>>;

DropoutMask draw_dropout_mask(const DenseNetParams& params, Rng& rng);

/// Training-mode forward pass with an explicit dropout mask.
ClassProbabilities dense_forward(const DenseNetParams& params, std::span<const double> x, const DropoutMask& mask);

struct DenseGradient {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;
};

/// sum_i w_i * CE_i / n + l2 * sum of squared kernel weights over a batch of n
/// rows. Fills `grad` when non-null; `masks` (one per row) enables dropout.
double dense_loss(const DenseNetParams& params, const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                  std::span<const double> sample_weights, DenseGradient* grad = nullptr,
                  const std::vector<DropoutMask>* masks = nullptr);

struct DenseTrainConfig {
    std::vector<int> hidden_widths{kHiddenWidths.begin(), kHiddenWidths.end()};
    double learning_rate = 0.001;
    int batch_size = 128;
    int epochs = 100;
    double dropout = kDefaultDropout;
    double l2 = kDefaultL2;
    std::array<double, 3> class_weights{0.1, 0.3, 0.9};
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
};

struct DenseTrainHistory {
    double initial_loss = 0.0;       ///< class-weighted cross-entropy before the first update
    std::vector<double> epoch_loss;  ///< same quantity after each epoch (inference mode)
};

/// Class-weighted mean cross-entropy in inference mode, without the L2 term.
double weighted_cross_entropy(const DenseNetParams& params, const std::vector<std::vector<double>>& rows,
                              std::span<const int> labels, const std::array<double, 3>& class_weights);

/// Mini-batch Nadam on the class-weighted loss. Rows whose class weight is 0
/// are dropped before shuffling. Throws EmptyDataset and NonFiniteLoss.
DenseNetParams dense_train(const std::vector<std::vector<double>>& rows, std::span<const int> labels,
                           const DenseTrainConfig& config, DenseTrainHistory* history = nullptr);

void save_dense(const std::filesystem::path& path, const DenseNetParams& params);
DenseNetParams load_dense(const std::filesystem::path& path);

}  // namespace circa::models
