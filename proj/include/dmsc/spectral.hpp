#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dmsc {

/// Divides each column by its largest absolute entry; zero columns pass through.
Eigen::MatrixXd normalize_coefficients(const Eigen::MatrixXd& coeffs);

/// W = |C| + |C|^T.
Eigen::MatrixXd build_affinity(const Eigen::MatrixXd& coeffs);

struct EigenDecomposition {
    Eigen::VectorXd values;   ///< ascending
    Eigen::MatrixXd vectors;  ///< column k pairs with values[k]
    std::size_t sweeps = 0;
};

/// Cyclic Jacobi for dense symmetric matrices. Stops when the off-diagonal
/// Frobenius norm drops below tol * ||A||_F. A nonempty `warm_start`
/// (orthogonal, same size) is used as the initial rotation basis.
EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-10, std::size_t max_sweeps = 100,
                                const Eigen::MatrixXd& warm_start = {});

struct ClusterLabeling {
    std::vector<int> labels;
    std::size_t k = 0;
};

struct KMeansOptions {
    std::size_t restarts = 20;
    std::size_t max_iters = 300;
    double tol = 1e-8;
};

struct KMeansResult {
    ClusterLabeling labeling;
    double wcss = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding on the rows of `points`; the
/// restart with the smallest within-cluster sum of squares wins.
KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Ng-Jordan-Weiss: smallest-K eigenvectors of I - D^-1/2 W D^-1/2, rows
/// normalized to unit length, then k-means.
ClusterLabeling spectral_cluster(const Eigen::MatrixXd& affinity, std::size_t k, std::uint64_t seed);

}  // namespace dmsc
