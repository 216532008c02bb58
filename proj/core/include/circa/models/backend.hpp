#pragma once

#include "circa/json.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace circa::models {

enum class BackendRole { Segmentation, ImageClassifier, SuperResolution, FeatureExtractor };

std::string_view to_string(BackendRole role);
BackendRole parse_backend_role(std::string_view text);

/// Dense float tensor, row-major.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    std::size_t element_count() const;
};

/// Shape contract; -1 marks a free dimension.
using ShapeSpec = std::vector<std::int64_t>;

bool shape_matches(const ShapeSpec& spec, const std::vector<std::int64_t>& shape);
std::string shape_to_string(const std::vector<std::int64_t>& shape);

struct BackendDescriptor {
    std::string id;
    BackendRole role = BackendRole::Segmentation;
    std::string provider;  ///< "mock" or "onnx"
    ShapeSpec input_shape;
    ShapeSpec output_shape;
    int spatial_scale = 1;  ///< output H, W = scale x input H, W when > 1
    bool concurrent = true; ///< run() may be called from several threads

    Json to_json() const;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual const BackendDescriptor& descriptor() const = 0;

    /// Number of completed run() calls.
    std::uint64_t calls() const noexcept { return calls_.load(); }

protected:
    friend Tensor run_inference(ModelBackend& backend, const Tensor& input);
    virtual Tensor run(const Tensor& input) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
};

/// Validates the input against the declared contract, runs the backend and
/// validates the output. Throws ShapeMismatch or InferenceFailure; backend
/// exceptions other than circa::Error are wrapped as InferenceFailure.
Tensor run_inference(ModelBackend& backend, const Tensor& input);

inline constexpr int kModelInputSize = 512;
inline constexpr int kFeatureExtractorWidth = 261;

/// Geometry of the mock segmentation output, in 512 x 512 pixel units.
struct MockLungGeometry {
    double left_cx = 168.0, left_cy = 250.0;
    double right_cx = 344.0, right_cy = 250.0;
    double semi_x = 72.0, semi_y = 170.0;
};

/// Mock segmentation: p = clamp(1 - r^2 / 2, 0, 1) * max(input), r the
/// normalized elliptic radius to the nearer lung centre.
std::unique_ptr<ModelBackend> make_mock_segmentation(MockLungGeometry geometry = {});

/// Mock classifier: softmax(gain * mean of rows [0,171), [171,342), [342,512))
/// as (normal, pneumonia, covid).
std::unique_ptr<ModelBackend> make_mock_classifier(double gain = 4.0);

/// Mock super-resolution: 2x pixel replication.
std::unique_ptr<ModelBackend> make_mock_super_resolution();

/// Mock feature extractor: 261 means over a 9 x 29 grid of cells.
std::unique_ptr<ModelBackend> make_mock_feature_extractor();

/// Backend selection as configured: {"provider": "mock"|"onnx", "path": ..., mock options}.
struct BackendSpec {
    BackendRole role = BackendRole::Segmentation;
    std::string provider = "mock";
    std::string path;
    Json options = Json::object();
};

/// Creates a backend. The onnx provider reports BackendUnavailable in builds
/// without an ONNX runtime; unknown providers are InvalidConfig.
std::shared_ptr<ModelBackend> make_backend(const BackendSpec& spec);

}  // namespace circa::models
