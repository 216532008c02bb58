#pragma once

#include "circa/classes.hpp"
#include "circa/json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace circa::models {

using Point2 = std::array<double, 2>;

struct Gaussian2D {
    double weight = 1.0;
    Point2 mean{0.0, 0.0};
    std::array<double, 3> cov{1.0, 0.0, 1.0};  ///< (xx, xy, yy)

    double density(const Point2& x) const;
    double log_density(const Point2& x) const;
};

struct Mixture2D {
    std::vector<Gaussian2D> components;
    double log_likelihood = 0.0;  ///< on the fitting data
    double bic = 0.0;
    int iterations = 0;
    bool converged = false;
    std::size_t n_points = 0;

    double density(const Point2& x) const;
};

struct GmmConfig {
    int components = 3;
    int restarts = 100;
    double reg = 0.1;
    double tolerance = 1e-7;
    int max_iterations = 500;
    std::uint64_t seed = 0;
};

/// Per-iteration values of the objective EM maximizes under the covariance
/// ridge: sum_i log sum_k pi_k N(x_i | mu_k, Sigma_k) exp(-reg/2 tr Sigma_k^-1).
/// Reduces to the log-likelihood when reg = 0.
struct EmTrace {
    std::vector<double> objective;
    std::vector<double> log_likelihood;
};

/// Free parameters of a k-component 2D mixture: k * (2 + 3 + 1) - 1.
int gmm_parameter_count(int components);

/// One EM run from the given initial responsibilities source. Initial
/// responsibilities are one-hot by nearest of `components` seed points drawn
/// without replacement. Throws TooFewPoints when n < components.
Mixture2D fit_mixture_once(std::span<const Point2> points, const GmmConfig& config, std::uint64_t seed,
                           EmTrace* trace = nullptr);

/// Best of `restarts` EM runs by BIC, restart r seeded with derive_seed(config.seed, r).
Mixture2D fit_mixture(std::span<const Point2> points, const GmmConfig& config);

/// Total log mixture density over the points.
double em_loglik(const Mixture2D& mixture, std::span<const Point2> points);

/// Penalized objective tracked by EmTrace.
double em_objective(const Mixture2D& mixture, std::span<const Point2> points, double reg);

/// Per-class 3-component mixtures.
struct GmmModel2D {
    std::array<Mixture2D, 3> classes;  ///< indexed by ClassLabel
    double reg = 0.1;
    int restarts = 100;
    std::uint64_t seed = 0;

    const Mixture2D& operator[](ClassLabel c) const { return classes[static_cast<std::size_t>(c)]; }
};

GmmModel2D gmm_fit(const std::array<std::vector<Point2>, 3>& points_by_class, const GmmConfig& config);

struct SubtypeAssignment {
    ClassLabel label = ClassLabel::Normal;
    int component = 0;                 ///< 0-based
    std::vector<double> posterior;     ///< over the class's components
    Point2 coords{0.0, 0.0};

    std::string subtype() const;       ///< e.g. "C1"
};

/// Bayes posterior over the components of the given class; argmax with ties
/// to the lower component index.
SubtypeAssignment gmm_predict_subtype(const GmmModel2D& model, const Point2& point, ClassLabel label);

Json to_json(const SubtypeAssignment& s);

void save_gmm(const std::filesystem::path& path, const GmmModel2D& model);
GmmModel2D load_gmm(const std::filesystem::path& path);

}  // namespace circa::models
