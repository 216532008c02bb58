#include "circa/models/backend.hpp"

#include "circa/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

namespace circa::models {
namespace {

constexpr std::int64_t kImage = kModelInputSize;

class MockBackend : public ModelBackend {
public:
    MockBackend(BackendDescriptor d, std::function<Tensor(const Tensor&)> fn) : desc_(std::move(d)), fn_(std::move(fn)) {}
    const BackendDescriptor& descriptor() const override { return desc_; }

protected:
    Tensor run(const Tensor& input) override { return fn_(input); }

private:
    BackendDescriptor desc_;
    std::function<Tensor(const Tensor&)> fn_;
};

float max_of(const Tensor& t) {
    float m = 0.0f;
    for (float v : t.data) m = std::max(m, v);
    return m;
}

}  // namespace

std::string_view to_string(BackendRole role) {
    switch (role) {
        case BackendRole::Segmentation: return "segmentation";
        case BackendRole::ImageClassifier: return "image_classifier";
        case BackendRole::SuperResolution: return "super_resolution";
        case BackendRole::FeatureExtractor: return "feature_extractor";
    }
    return "segmentation";
}

BackendRole parse_backend_role(std::string_view text) {
    for (auto r : {BackendRole::Segmentation, BackendRole::ImageClassifier, BackendRole::SuperResolution,
                   BackendRole::FeatureExtractor}) {
        if (text == to_string(r)) return r;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown backend role: " + std::string(text));
}

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(std::max<std::int64_t>(d, 0));
    return n;
}

bool shape_matches(const ShapeSpec& spec, const std::vector<std::int64_t>& shape) {
    if (spec.size() != shape.size()) return false;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        if (shape[i] < 1 || (spec[i] >= 0 && spec[i] != shape[i])) return false;
    }
    return true;
}

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

Json BackendDescriptor::to_json() const {
    return Json{{"id", id},
                {"role", std::string(models::to_string(role))},
                {"provider", provider},
                {"input_shape", input_shape},
                {"output_shape", output_shape},
                {"spatial_scale", spatial_scale},
                {"concurrent", concurrent}};
}

Tensor run_inference(ModelBackend& backend, const Tensor& input) {
    const BackendDescriptor& d = backend.descriptor();
    if (!shape_matches(d.input_shape, input.shape) || input.data.size() != input.element_count()) {
        throw Error(ErrorCode::ShapeMismatch, d.id + " expects input " + shape_to_string(d.input_shape) + ", got " +
                                                  shape_to_string(input.shape));
    }
    Tensor out;
    try {
        out = backend.run(input);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::InferenceFailure, d.id + ": " + e.what());
    }
    bool ok = shape_matches(d.output_shape, out.shape) && out.data.size() == out.element_count();
    if (ok && d.spatial_scale > 1) {
        const std::size_t r = out.shape.size();
        ok = out.shape[r - 1] == input.shape[r - 1] * d.spatial_scale && out.shape[r - 2] == input.shape[r - 2] * d.spatial_scale;
    }
    if (!ok) {
        throw Error(ErrorCode::InferenceFailure, d.id + " produced output " + shape_to_string(out.shape) +
                                                     " outside its contract " + shape_to_string(d.output_shape));
    }
    for (float v : out.data) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InferenceFailure, d.id + " produced a non-finite value");
    }
    backend.calls_.fetch_add(1);
    return out;
}

std::unique_ptr<ModelBackend> make_mock_segmentation(MockLungGeometry g) {
    BackendDescriptor d{"mock-segmentation", BackendRole::Segmentation, "mock", {1, 1, kImage, kImage},
                        {1, 1, kImage, kImage}, 1, true};
    return std::make_unique<MockBackend>(d, [g](const Tensor& in) {
        const float peak = max_of(in);
        Tensor out{{1, 1, kImage, kImage}, std::vector<float>(static_cast<std::size_t>(kImage * kImage), 0.0f)};
        for (std::int64_t y = 0; y < kImage; ++y) {
            for (std::int64_t x = 0; x < kImage; ++x) {
                double r2 = 1e300;
                for (const auto& [cx, cy] : {std::pair{g.left_cx, g.left_cy}, std::pair{g.right_cx, g.right_cy}}) {
                    const double dx = (static_cast<double>(x) - cx) / g.semi_x;
                    const double dy = (static_cast<double>(y) - cy) / g.semi_y;
                    r2 = std::min(r2, dx * dx + dy * dy);
                }
                const double p = std::clamp(1.0 - 0.5 * r2, 0.0, 1.0) * peak;
                out.data[static_cast<std::size_t>(y * kImage + x)] = static_cast<float>(p);
            }
        }
        return out;
    });
}

std::unique_ptr<ModelBackend> make_mock_classifier(double gain) {
    BackendDescriptor d{"mock-classifier", BackendRole::ImageClassifier, "mock", {1, 1, kImage, kImage}, {1, 3}, 1, true};
    return std::make_unique<MockBackend>(d, [gain](const Tensor& in) {
        constexpr std::int64_t bands[4] = {0, 171, 342, kImage};
        std::array<double, 3> z{};
        for (int b = 0; b < 3; ++b) {
            double s = 0.0;
            for (std::int64_t y = bands[b]; y < bands[b + 1]; ++y)
                for (std::int64_t x = 0; x < kImage; ++x) s += in.data[static_cast<std::size_t>(y * kImage + x)];
            z[static_cast<std::size_t>(b)] = gain * s / static_cast<double>((bands[b + 1] - bands[b]) * kImage);
        }
        const double m = std::max({z[0], z[1], z[2]});
        double total = 0.0;
        for (double& v : z) total += (v = std::exp(v - m));
        Tensor out{{1, 3}, {}};
        for (double v : z) out.data.push_back(static_cast<float>(v / total));
        return out;
    });
}

std::unique_ptr<ModelBackend> make_mock_super_resolution() {
    BackendDescriptor d{"mock-super-resolution", BackendRole::SuperResolution, "mock", {1, 1, -1, -1}, {1, 1, -1, -1}, 2, true};
    return std::make_unique<MockBackend>(d, [](const Tensor& in) {
        const std::int64_t h = in.shape[2], w = in.shape[3];
        Tensor out{{1, 1, 2 * h, 2 * w}, std::vector<float>(static_cast<std::size_t>(4 * h * w))};
        for (std::int64_t y = 0; y < 2 * h; ++y)
            for (std::int64_t x = 0; x < 2 * w; ++x)
                out.data[static_cast<std::size_t>(y * 2 * w + x)] = in.data[static_cast<std::size_t>((y / 2) * w + x / 2)];
        return out;
    });
}

std::unique_ptr<ModelBackend> make_mock_feature_extractor() {
    BackendDescriptor d{"mock-feature-extractor", BackendRole::FeatureExtractor, "mock", {1, 1, kImage, kImage},
                        {1, kFeatureExtractorWidth}, 1, true};
    return std::make_unique<MockBackend>(d, [](const Tensor& in) {
        constexpr std::int64_t rows = 9, cols = 29;
        Tensor out{{1, kFeatureExtractorWidth}, {}};
        for (std::int64_t r = 0; r < rows; ++r) {
            const std::int64_t y0 = r * kImage / rows, y1 = (r + 1) * kImage / rows;
            for (std::int64_t c = 0; c < cols; ++c) {
                const std::int64_t x0 = c * kImage / cols, x1 = (c + 1) * kImage / cols;
                double s = 0.0;
                for (std::int64_t y = y0; y < y1; ++y)
                    for (std::int64_t x = x0; x < x1; ++x) s += in.data[static_cast<std::size_t>(y * kImage + x)];
                out.data.push_back(static_cast<float>(s / static_cast<double>((y1 - y0) * (x1 - x0))));
            }
        }
        return out;
    });
}

std::shared_ptr<ModelBackend> make_backend(const BackendSpec& spec) {
    if (spec.provider == "mock") {
        switch (spec.role) {
            case BackendRole::Segmentation: {
                MockLungGeometry g;
                const Json& o = spec.options;
                g.left_cx = o.value("left_cx", g.left_cx);
                g.left_cy = o.value("left_cy", g.left_cy);
                g.right_cx = o.value("right_cx", g.right_cx);
                g.right_cy = o.value("right_cy", g.right_cy);
                g.semi_x = o.value("semi_x", g.semi_x);
                g.semi_y = o.value("semi_y", g.semi_y);
                if (!(g.semi_x > 0.0 && g.semi_y > 0.0)) throw Error(ErrorCode::InvalidConfig, "mock lung semi-axes must be positive");
                return make_mock_segmentation(g);
            }
            case BackendRole::ImageClassifier: return make_mock_classifier(spec.options.value("gain", 4.0));
            case BackendRole::SuperResolution: return make_mock_super_resolution();
            case BackendRole::FeatureExtractor: return make_mock_feature_extractor();
        }
    }
    if (spec.provider == "onnx") {
        if (!spec.path.empty() && !std::filesystem::exists(spec.path)) {
            throw Error(ErrorCode::BackendUnavailable, "model file not found: " + spec.path);
        }
        throw Error(ErrorCode::BackendUnavailable, "ONNX runtime is not available in this build (" +
                                                       std::string(to_string(spec.role)) + ")");
    }
    throw Error(ErrorCode::InvalidConfig, "unknown backend provider: " + spec.provider);
}

}  // namespace circa::models
