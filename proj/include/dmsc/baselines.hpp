#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace dmsc {

struct AdmmConfig {
    double lambda = 0.0;          ///< data-fidelity weight, required
    std::optional<double> rho;    ///< penalty; defaults to lambda
    std::size_t max_iters = 1000;
    double abs_tol = 1e-6;
    double rel_tol = 1e-4;

    double penalty() const { return rho.value_or(lambda); }
    void validate() const;
};

struct AdmmResult {
    Eigen::MatrixXd coeffs;  ///< N x N
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> objective;  ///< per iteration, evaluated at the returned variable
};

/// min ||C||_1 + lambda/2 ||X - XC||_F^2 s.t. diag(C) = 0, X is D x N.
AdmmResult ssc_solve(const Eigen::MatrixXd& x, const AdmmConfig& config);

/// min ||C||_* + lambda/2 ||X - XC||_F^2 via singular value thresholding.
AdmmResult lrr_solve(const Eigen::MatrixXd& x, const AdmmConfig& config);

/// Singular values of M from the eigenvalues of M^T M, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

}  // namespace dmsc
