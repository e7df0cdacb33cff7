#include "icee/plda.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "icee/tensor.hpp"

namespace icee::plda {

Eigen::VectorXd PldaModel::project(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw InvalidInput("plda: latent has wrong dimension");
    return inv_transform * (x - mean);
}

PldaModel plda_fit(const Eigen::MatrixXd& latents, std::span<const std::size_t> labels, double eps) {
    const Eigen::Index n = latents.rows(), d = latents.cols();
    if (static_cast<std::size_t>(n) != labels.size()) throw InvalidInput("plda_fit: latents and labels differ in length");
    if (n == 0 || d == 0) throw FitError("plda_fit: no data");

    std::map<std::size_t, std::pair<Eigen::VectorXd, std::size_t>> sums;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, fresh] = sums.try_emplace(labels[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(d), 0);
        it->second.first += latents.row(i).transpose();
        ++it->second.second;
    }
    if (sums.size() < 2) throw FitError("plda_fit: need at least two classes");
    for (const auto& [label, entry] : sums)
        if (entry.second < 2)
            throw FitError("plda_fit: class " + std::to_string(label) + " has fewer than two samples");

    PldaModel model;
    model.mean = latents.colwise().mean().transpose();
    std::map<std::size_t, Eigen::VectorXd> class_mean;
    for (const auto& [label, entry] : sums) class_mean[label] = entry.first / static_cast<double>(entry.second);

    Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd r = latents.row(i).transpose() - class_mean[labels[static_cast<std::size_t>(i)]];
        within.noalias() += r * r.transpose();
    }
    Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [label, entry] : sums) {
        const Eigen::VectorXd r = class_mean[label] - model.mean;
        between.noalias() += static_cast<double>(entry.second) * r * r.transpose();
    }
    within /= static_cast<double>(n);
    between /= static_cast<double>(n);
    within.diagonal().array() += eps;
    between.diagonal().array() += eps;

    if (Eigen::LLT<Eigen::MatrixXd>(within).info() != Eigen::Success)
        throw FitError("plda_fit: within-class scatter is singular");

    // between w = lambda within w with W^T within W = I.
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(between, within);
    if (solver.info() != Eigen::Success) throw FitError("plda_fit: generalized eigenproblem failed");
    const Eigen::MatrixXd& w = solver.eigenvectors();
    model.inv_transform = w.transpose();
    model.transform = model.inv_transform.inverse();

    // Between-class eigenvalues include the 1/n noise of class-mean estimates.
    const double per_class = static_cast<double>(n) / static_cast<double>(sums.size());
    model.psi = ((per_class - 1.0) / per_class * solver.eigenvalues().array() - 1.0 / per_class).max(0.0);

    for (const auto& [label, mu] : class_mean) model.class_means[label] = model.inv_transform * (mu - model.mean);
    return model;
}

double predictive_log_density(const PldaModel& model, const Eigen::VectorXd& u, const Eigen::VectorXd& class_mean) {
    if (u.size() != model.psi.size() || class_mean.size() != model.psi.size())
        throw InvalidInput("predictive_log_density: dimension mismatch");
    double total = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        const double a = model.psi[k] / (2.0 * model.psi[k] + 1.0);
        const double var = a + 1.0;
        const double r = u[k] - a * class_mean[k];
        total += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
    }
    return total;
}

double bt_score(const PldaModel& model, const Eigen::VectorXd& latent, std::size_t cls) {
    auto it = model.class_means.find(cls);
    if (it == model.class_means.end()) throw InvalidInput("bt_score: class " + std::to_string(cls) + " unknown to PLDA");
    return predictive_log_density(model, model.project(latent), it->second);
}

}  // namespace icee::plda
