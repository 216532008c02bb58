#include "circa/radiomics/scaler.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"

#include <cmath>

namespace circa::radiomics {

FeatureScaler fit_scaler(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw Error(ErrorCode::EmptyMatrix, "cannot fit a scaler on an empty matrix");
    const std::size_t width = rows.front().size();
    FeatureScaler s;
    s.mean.assign(width, 0.0);
    s.std.assign(width, 0.0);
    for (const auto& r : rows) {
        if (r.size() != width) throw Error(ErrorCode::ShapeMismatch, "ragged feature matrix");
        for (std::size_t c = 0; c < width; ++c) s.mean[c] += r[c];
    }
    const auto n = static_cast<double>(rows.size());
    for (double& m : s.mean) m /= n;
    for (const auto& r : rows)
        for (std::size_t c = 0; c < width; ++c) s.std[c] += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
    for (std::size_t c = 0; c < width; ++c) {
        s.std[c] = std::sqrt(s.std[c] / n);
        if (s.std[c] > kZeroVarianceTolerance) s.retained.push_back(c);
    }
    return s;
}

std::vector<double> apply_scaler(const FeatureScaler& scaler, std::span<const double> row) {
    if (row.size() != scaler.input_width()) {
        throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(scaler.input_width()) + " features, got " +
                                                  std::to_string(row.size()));
    }
    std::vector<double> out;
    out.reserve(scaler.retained.size());
    for (std::size_t c : scaler.retained) out.push_back((row[c] - scaler.mean[c]) / scaler.std[c]);
    return out;
}

void save_scaler(const std::filesystem::path& path, const FeatureScaler& scaler) {
    std::vector<float> payload;
    pack_f64(payload, scaler.mean);
    pack_f64(payload, scaler.std);
    save_model_file(path, "feature_scaler", Json{{"width", scaler.input_width()}, {"retained", scaler.retained}},
                    payload);
}

FeatureScaler load_scaler(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "feature_scaler");
    FeatureScaler s;
    try {
        const auto width = file.meta.at("width").get<std::size_t>();
        s.retained = file.meta.at("retained").get<std::vector<std::size_t>>();
        if (file.payload.size() != 6 * width) throw Error(ErrorCode::CorruptModel, "scaler payload size mismatch");
        std::size_t pos = 0;
        s.mean = unpack_f64(file.payload, pos, width);
        s.std = unpack_f64(file.payload, pos, width);
        for (std::size_t c : s.retained) {
            if (c >= width || !(s.std[c] > 0.0)) throw Error(ErrorCode::CorruptModel, "invalid retained column");
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed scaler header: ") + e.what());
    }
    return s;
}

}  // namespace circa::radiomics
