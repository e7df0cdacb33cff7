#pragma once

#include <cstddef>
#include <map>
#include <span>

#include <Eigen/Dense>

namespace icee::plda {

// Two-covariance PLDA in its diagonalized form: u = A^{-1} (x - mean) has
// identity within-class covariance and diagonal between-class covariance psi.
struct PldaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd transform;      // A
    Eigen::MatrixXd inv_transform;  // A^{-1}
    Eigen::VectorXd psi;            // >= 0
    std::map<std::size_t, Eigen::VectorXd> class_means;  // u^y in the transformed space

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
};

inline constexpr double kScatterRegularizer = 1e-4;

// `latents` holds one sample per row. Throws FitError for fewer than two
// classes, a class with fewer than two samples, or a scatter matrix that is
// not positive definite after regularization.
PldaModel plda_fit(const Eigen::MatrixXd& latents, std::span<const std::size_t> labels,
                   double eps = kScatterRegularizer);

// log N(u | a u^y, a + I), a = psi / (2 psi + 1), elementwise.
double predictive_log_density(const PldaModel& model, const Eigen::VectorXd& u, const Eigen::VectorXd& class_mean);

// Predictive log density of latent x under class y's stored mean.
double bt_score(const PldaModel& model, const Eigen::VectorXd& latent, std::size_t cls);

}  // namespace icee::plda
