#include "circa/models/gmm.hpp"

#include "circa/error.hpp"
#include "circa/model_io.hpp"
#include "circa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace circa::models {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double det(const std::array<double, 3>& c) { return c[0] * c[2] - c[1] * c[1]; }

double trace_inverse(const std::array<double, 3>& c) { return (c[0] + c[2]) / det(c); }

double log_sum_exp(std::span<const double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

struct EStep {
    double objective = 0.0;
    double log_likelihood = 0.0;
    std::vector<double> resp;  // n x k
};

EStep e_step(const std::vector<Gaussian2D>& comps, std::span<const Point2> points, double reg) {
    const std::size_t k = comps.size();
    EStep out;
    out.resp.resize(points.size() * k);
    std::vector<double> plain(k);
    std::vector<double> penalized(k);
    std::vector<double> penalty(k);
    for (std::size_t c = 0; c < k; ++c) penalty[c] = -0.5 * reg * trace_inverse(comps[c].cov);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            plain[c] = comps[c].weight > 0.0 ? std::log(comps[c].weight) + comps[c].log_density(points[i]) : kNegInf;
            penalized[c] = plain[c] + penalty[c];
        }
        out.log_likelihood += log_sum_exp(plain);
        const double norm = log_sum_exp(penalized);
        out.objective += norm;
        for (std::size_t c = 0; c < k; ++c) out.resp[i * k + c] = std::exp(penalized[c] - norm);
    }
    return out;
}

std::vector<Gaussian2D> m_step(std::span<const double> resp, std::span<const Point2> points, std::size_t k, double reg,
                               const std::vector<Gaussian2D>* previous) {
    const std::size_t n = points.size();
    std::vector<Gaussian2D> comps(k);
    for (std::size_t c = 0; c < k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp[i * k + c];
        Gaussian2D& g = comps[c];
        g.weight = nk / static_cast<double>(n);
        if (!(nk > 0.0)) {
            g.weight = 0.0;
            if (previous) g.mean = (*previous)[c].mean;
            g.cov = {reg, 0.0, reg};
            continue;
        }
        // Moments about a reference point keep identical points exactly degenerate.
        const Point2 ref = points[0];
        double sx = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += resp[i * k + c] * (points[i][0] - ref[0]);
            sy += resp[i * k + c] * (points[i][1] - ref[1]);
        }
        const double dx_mean = sx / nk;
        const double dy_mean = sy / nk;
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = points[i][0] - ref[0] - dx_mean;
            const double dy = points[i][1] - ref[1] - dy_mean;
            sxx += resp[i * k + c] * dx * dx;
            sxy += resp[i * k + c] * dx * dy;
            syy += resp[i * k + c] * dy * dy;
        }
        g.mean = {ref[0] + dx_mean, ref[1] + dy_mean};
        g.cov = {sxx / nk + reg, sxy / nk, syy / nk + reg};
    }
    return comps;
}

void check_points(std::span<const Point2> points, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "mixture needs at least one component");
    if (points.size() < static_cast<std::size_t>(k)) {
        throw Error(ErrorCode::TooFewPoints, "mixture of " + std::to_string(k) + " components needs at least " +
                                                 std::to_string(k) + " points, got " + std::to_string(points.size()));
    }
    for (const auto& p : points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw Error(ErrorCode::InvalidArgument, "non-finite point");
    }
}

}  // namespace

double Gaussian2D::log_density(const Point2& x) const {
    const double d = det(cov);
    const double dx = x[0] - mean[0];
    const double dy = x[1] - mean[1];
    const double q = (cov[2] * dx * dx - 2.0 * cov[1] * dx * dy + cov[0] * dy * dy) / d;
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(d) - 0.5 * q;
}

double Gaussian2D::density(const Point2& x) const { return std::exp(log_density(x)); }

double Mixture2D::density(const Point2& x) const {
    double s = 0.0;
    for (const auto& g : components) s += g.weight * g.density(x);
    return s;
}

int gmm_parameter_count(int components) { return components * (2 + 3 + 1) - 1; }

Mixture2D fit_mixture_once(std::span<const Point2> points, const GmmConfig& config, std::uint64_t seed,
                           EmTrace* trace) {
    check_points(points, config.components);
    if (!(config.reg >= 0.0)) throw Error(ErrorCode::InvalidArgument, "regularization must be non-negative");
    const auto k = static_cast<std::size_t>(config.components);
    const std::size_t n = points.size();

    Rng rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<double> resp(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const Point2& s = points[order[c]];
            const double d = (points[i][0] - s[0]) * (points[i][0] - s[0]) + (points[i][1] - s[1]) * (points[i][1] - s[1]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        resp[i * k + best] = 1.0;
    }

    Mixture2D mix;
    mix.n_points = n;
    mix.components = m_step(resp, points, k, config.reg, nullptr);
    double previous = 0.0;
    for (int it = 1; it <= config.max_iterations; ++it) {
        EStep e = e_step(mix.components, points, config.reg);
        if (!std::isfinite(e.objective)) throw Error(ErrorCode::NonFiniteLoss, "EM objective is not finite");
        if (trace) {
            trace->objective.push_back(e.objective);
            trace->log_likelihood.push_back(e.log_likelihood);
        }
        mix.iterations = it;
        mix.log_likelihood = e.log_likelihood;
        if (it > 1 && std::abs(e.objective - previous) <= config.tolerance * std::abs(previous)) {
            mix.converged = true;
            break;
        }
        if (it == config.max_iterations) break;
        previous = e.objective;
        mix.components = m_step(e.resp, points, k, config.reg, &mix.components);
    }
    mix.bic = -2.0 * mix.log_likelihood + gmm_parameter_count(config.components) * std::log(static_cast<double>(n));
    return mix;
}

Mixture2D fit_mixture(std::span<const Point2> points, const GmmConfig& config) {
    check_points(points, config.components);
    if (config.restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be at least 1");
    Mixture2D best;
    for (int r = 0; r < config.restarts; ++r) {
        Mixture2D m = fit_mixture_once(points, config, derive_seed(config.seed, static_cast<std::uint64_t>(r)));
        if (r == 0 || m.bic < best.bic) best = std::move(m);
    }
    return best;
}

double em_loglik(const Mixture2D& mixture, std::span<const Point2> points) {
    std::vector<double> terms(mixture.components.size());
    double total = 0.0;
    for (const auto& x : points) {
        for (std::size_t c = 0; c < terms.size(); ++c) {
            const auto& g = mixture.components[c];
            terms[c] = g.weight > 0.0 ? std::log(g.weight) + g.log_density(x) : kNegInf;
        }
        total += log_sum_exp(terms);
    }
    return total;
}

double em_objective(const Mixture2D& mixture, std::span<const Point2> points, double reg) {
    return e_step(mixture.components, points, reg).objective;
}

GmmModel2D gmm_fit(const std::array<std::vector<Point2>, 3>& points_by_class, const GmmConfig& config) {
    GmmModel2D model;
    model.reg = config.reg;
    model.restarts = config.restarts;
    model.seed = config.seed;
    for (std::size_t c = 0; c < 3; ++c) {
        GmmConfig per_class = config;
        per_class.seed = derive_seed(config.seed, 1000 + c);
        try {
            model.classes[c] = fit_mixture(points_by_class[c], per_class);
        } catch (const Error& e) {
            throw Error(e.code(), std::string(to_string(class_from_index(static_cast<int>(c)))) + ": " + e.what());
        }
    }
    return model;
}

std::string SubtypeAssignment::subtype() const { return std::string(1, subtype_prefix(label)) + std::to_string(component + 1); }

SubtypeAssignment gmm_predict_subtype(const GmmModel2D& model, const Point2& point, ClassLabel label) {
    const Mixture2D& mix = model[label];
    if (mix.components.empty()) throw Error(ErrorCode::CorruptModel, "class mixture has no components");
    SubtypeAssignment s;
    s.label = label;
    s.coords = point;
    std::vector<double> logs(mix.components.size());
    for (std::size_t c = 0; c < logs.size(); ++c) {
        const auto& g = mix.components[c];
        logs[c] = g.weight > 0.0 ? std::log(g.weight) + g.log_density(point) : kNegInf;
    }
    const double norm = log_sum_exp(logs);
    s.posterior.resize(logs.size());
    for (std::size_t c = 0; c < logs.size(); ++c) {
        s.posterior[c] = norm == kNegInf ? 1.0 / static_cast<double>(logs.size()) : std::exp(logs[c] - norm);
        if (s.posterior[c] > s.posterior[static_cast<std::size_t>(s.component)]) s.component = static_cast<int>(c);
    }
    return s;
}

Json to_json(const SubtypeAssignment& s) {
    return Json{{"label", s.subtype()},
                {"class", std::string(to_string(s.label))},
                {"component", s.component},
                {"posterior", s.posterior},
                {"coords", {s.coords[0], s.coords[1]}}};
}

void save_gmm(const std::filesystem::path& path, const GmmModel2D& model) {
    std::vector<float> payload;
    Json classes = Json::array();
    for (const auto& mix : model.classes) {
        classes.push_back(Json{{"components", mix.components.size()},
                               {"n_points", mix.n_points},
                               {"iterations", mix.iterations},
                               {"converged", mix.converged}});
        for (const auto& g : mix.components) {
            pack_f64(payload, std::array<double, 6>{g.weight, g.mean[0], g.mean[1], g.cov[0], g.cov[1], g.cov[2]});
        }
        pack_f64(payload, std::array<double, 2>{mix.log_likelihood, mix.bic});
    }
    pack_f64(payload, model.reg);
    save_model_file(path, "gmm2d",
                    Json{{"classes", classes}, {"restarts", model.restarts}, {"seed", std::to_string(model.seed)}},
                    payload);
}

GmmModel2D load_gmm(const std::filesystem::path& path) {
    const ModelFile file = load_model_file(path, "gmm2d");
    GmmModel2D model;
    try {
        const auto& classes = file.meta.at("classes");
        if (!classes.is_array() || classes.size() != 3) throw Error(ErrorCode::CorruptModel, "GMM must hold three classes");
        std::size_t pos = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            Mixture2D& mix = model.classes[c];
            const auto k = classes[c].at("components").get<std::size_t>();
            mix.n_points = classes[c].at("n_points").get<std::size_t>();
            mix.iterations = classes[c].at("iterations").get<int>();
            mix.converged = classes[c].at("converged").get<bool>();
            for (std::size_t j = 0; j < k; ++j) {
                const auto v = unpack_f64(file.payload, pos, 6);
                mix.components.push_back(Gaussian2D{v[0], {v[1], v[2]}, {v[3], v[4], v[5]}});
                if (!(det(mix.components.back().cov) > 0.0)) throw Error(ErrorCode::CorruptModel, "covariance not positive definite");
            }
            const auto stats = unpack_f64(file.payload, pos, 2);
            mix.log_likelihood = stats[0];
            mix.bic = stats[1];
        }
        model.reg = unpack_f64(file.payload, pos, 1)[0];
        if (pos != file.payload.size()) throw Error(ErrorCode::CorruptModel, "GMM payload size mismatch");
        model.restarts = file.meta.at("restarts").get<int>();
        model.seed = std::stoull(file.meta.at("seed").get<std::string>());
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::CorruptModel, std::string("malformed GMM header: ") + e.what());
    }
    return model;
}

}  // namespace circa::models
