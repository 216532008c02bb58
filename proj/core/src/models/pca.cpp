#include "circa/models/pca.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace circa::models {

PcaModel pca_fit(const std::vector<std::vector<double>>& rows, double var_fraction) {
    if (!(var_fraction > 0.0 && var_fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "var_fraction must be in (0, 1]");
    if (rows.size() < 2) throw Error(ErrorCode::TooFewSamples, "PCA needs at least two rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.front().size());
    if (d == 0) throw Error(ErrorCode::EmptyMatrix, "PCA input has no columns");
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(r.size()) != d) throw Error(ErrorCode::ShapeMismatch, "ragged PCA input");
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = r[static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error(ErrorCode::DegenerateMatrix, "eigen-decomposition failed");

    std::vector<double> eig(static_cast<std::size_t>(d));
    double total = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        eig[static_cast<std::size_t>(j)] = std::max(0.0, solver.eigenvalues()(d - 1 - j));
        total += eig[static_cast<std::size_t>(j)];
    }
    if (!(total > 0.0)) throw Error(ErrorCode::DegenerateMatrix, "PCA input has zero variance");

    PcaModel m;
    m.mean.assign(mean.data(), mean.data() + d);
    m.total_variance = total;
    double cumulative = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double ev = eig[static_cast<std::size_t>(j)];
        Eigen::VectorXd axis = solver.eigenvectors().col(d - 1 - j);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0.0) axis = -axis;
        m.axes.emplace_back(axis.data(), axis.data() + d);
        m.explained_variance.push_back(ev);
        m.explained_ratio.push_back(ev / total);
        cumulative += ev / total;
        if (cumulative >= var_fraction - 1e-12) break;
    }
    return m;
}

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x) {
    if (x.size() != model.input_width()) {
        throw Error(ErrorCode::ShapeMismatch, "PCA expects " + std::to_string(model.input_width()) + " values, got " +
                                                  std::to_string(x.size()));
    }
    std::vector<double> out;
    out.reserve(model.n_components());
    for (const auto& axis : model.axes) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += (x[j] - model.mean[j]) * axis[j];
        out.push_back(acc);
    }
    return out;
}

void save_pca(const std::filesystem::path& path, const PcaModel& model) {
    std::vector<float> payload;
    pack_f64(payload, model.mean);
    for (const auto& axis : model.axes) pack_f64(payload, axis);
    pack_f64(payload, model.explained_variance);
    pack_f64(payload, model.explained_ratio);
    pack_f64(payload, model.total_variance);
    save_model_file(path, "pca", Json{{"input_width", model.input_width()}, {"n_components", model.n_components()}},
                    payload);
}

PcaModel load_pca(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "pca");
    PcaModel m;
    try {
        const auto d = file.meta.at("input_width").get<std::size_t>();
        const auto k = file.meta.at("n_components").get<std::size_t>();
        std::size_t pos = 0;
        m.mean = unpack_f64(file.payload, pos, d);
        for (std::size_t i = 0; i < k; ++i) m.axes.push_back(unpack_f64(file.payload, pos, d));
        m.explained_variance = unpack_f64(file.payload, pos, k);
        m.explained_ratio = unpack_f64(file.payload, pos, k);
        m.total_variance = unpack_f64(file.payload, pos, 1)[0];
        if (pos != file.payload.size()) throw Error(ErrorCode::CorruptModel, "PCA payload size mismatch");
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed PCA header: ") + e.what());
    }
    return m;
}

}  // namespace circa::models
