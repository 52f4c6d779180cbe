#include <gtest/gtest.h>

#include <random>

#include "dmsc/baselines.hpp"
#include "dmsc/data.hpp"
#include "dmsc/metrics.hpp"
#include "dmsc/spectral.hpp"

using namespace dmsc;
using Eigen::MatrixXd;

namespace {

AdmmConfig config(double lambda, std::size_t iters = 1000, double abs_tol = 1e-6, double rel_tol = 1e-4) {
    AdmmConfig c;
    c.lambda = lambda;
    c.max_iters = iters;
    c.abs_tol = abs_tol;
    c.rel_tol = rel_tol;
    return c;
}

// Column-wise Lasso by cyclic coordinate descent with c_jj pinned to zero.
MatrixXd ssc_coordinate_descent(const MatrixXd& x, double lambda, int sweeps) {
    const Eigen::Index n = x.cols();
    MatrixXd c = MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd r = x.col(j);
        for (int s = 0; s < sweeps; ++s)
            for (Eigen::Index i = 0; i < n; ++i) {
                if (i == j) continue;
                const double sq = x.col(i).squaredNorm();
                r += c(i, j) * x.col(i);
                const double rho = lambda * x.col(i).dot(r), t = 1.0;
                c(i, j) = rho > t ? (rho - t) / (lambda * sq) : rho < -t ? (rho + t) / (lambda * sq) : 0.0;
                r -= c(i, j) * x.col(i);
            }
    }
    return c;
}

// Proximal gradient with SVT from Eigen's SVD.
MatrixXd lrr_proximal_gradient(const MatrixXd& x, double lambda, int iters) {
    const Eigen::Index n = x.cols();
    const MatrixXd g = x.transpose() * x;
    const double step = 1.0 / (lambda * Eigen::SelfAdjointEigenSolver<MatrixXd>(g).eigenvalues().maxCoeff());
    MatrixXd c = MatrixXd::Zero(n, n);
    for (int it = 0; it < iters; ++it) {
        const MatrixXd z = c - step * lambda * (g * c - g);
        Eigen::JacobiSVD<MatrixXd> svd(z, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::VectorXd s = (svd.singularValues().array() - step).max(0.0);
        c = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    }
    return c;
}

double ssc_objective(const MatrixXd& x, const MatrixXd& c, double lambda) {
    return c.cwiseAbs().sum() + lambda / 2.0 * (x - x * c).squaredNorm();
}

double lrr_objective(const MatrixXd& x, const MatrixXd& c, double lambda) {
    return Eigen::JacobiSVD<MatrixXd>(c).singularValues().sum() + lambda / 2.0 * (x - x * c).squaredNorm();
}

}  // namespace

TEST(Ssc, CrossSubspaceMassAndEndToEndOnDefaultInstance) {
    const SyntheticData data = generate_union_of_subspaces(SynthSpec{});
    const MatrixXd x = data.bundle.data_matrix(0);
    const AdmmResult r = ssc_solve(x, config(100.0));
    const auto& labels = *data.bundle.labels;
    double cross = 0.0, total = r.coeffs.cwiseAbs().sum();
    for (Eigen::Index i = 0; i < r.coeffs.rows(); ++i)
        for (Eigen::Index j = 0; j < r.coeffs.cols(); ++j)
            if (labels[i] != labels[j]) cross += std::abs(r.coeffs(i, j));
    EXPECT_GT(total, 0.0);
    EXPECT_LT(cross, 1e-6 * total);
    EXPECT_EQ(r.coeffs.diagonal().cwiseAbs().maxCoeff(), 0.0);
    const auto pred = spectral_cluster(build_affinity(normalize_coefficients(r.coeffs)), 5, 0);
    EXPECT_DOUBLE_EQ(evaluate_clustering(pred.labels, labels).ari, 1.0);
}

TEST(Ssc, MatchesCoordinateDescentOracle) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    MatrixXd x(5, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const double lambda = 5.0;
    const AdmmResult r = ssc_solve(x, config(lambda, 20000, 1e-10, 1e-10));
    const MatrixXd oracle = ssc_coordinate_descent(x, lambda, 5000);
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.coeffs - oracle).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NEAR(ssc_objective(x, r.coeffs, lambda), ssc_objective(x, oracle, lambda), 1e-7);
    EXPECT_NEAR(r.objective.back(), ssc_objective(x, r.coeffs, lambda), 1e-9);
}

TEST(Lrr, MatchesProximalGradientOracle) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    MatrixXd x(4, 7);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = g(rng);
    const double lambda = 3.0;
    const AdmmResult r = lrr_solve(x, config(lambda, 20000, 1e-10, 1e-10));
    const MatrixXd oracle = lrr_proximal_gradient(x, lambda, 20000);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(lrr_objective(x, r.coeffs, lambda), lrr_objective(x, oracle, lambda), 1e-6);
    EXPECT_LT((r.coeffs - oracle).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_NEAR(r.objective.back(), lrr_objective(x, r.coeffs, lambda), 1e-6);
}

TEST(Lrr, BlockDiagonalOnIndependentSubspaces) {
    SynthSpec spec;
    spec.points_per_subspace = {20};
    const SyntheticData data = generate_union_of_subspaces(spec);
    const AdmmResult r = lrr_solve(data.bundle.data_matrix(0), config(100.0));
    const auto pred = spectral_cluster(build_affinity(normalize_coefficients(r.coeffs)), 5, 0);
    EXPECT_DOUBLE_EQ(evaluate_clustering(pred.labels, *data.bundle.labels).ari, 1.0);
}

TEST(SingularValues, MatchEigenSvd) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    MatrixXd m(9, 6);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
    const Eigen::VectorXd ours = singular_values(m);
    const Eigen::VectorXd ref = Eigen::JacobiSVD<MatrixXd>(m).singularValues();
    EXPECT_LT((ours - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AdmmConfig, Validation) {
    EXPECT_THROW(ssc_solve(MatrixXd::Ones(3, 3), config(0.0)), std::invalid_argument);
    AdmmConfig c = config(1.0);
    c.rho = -1.0;
    EXPECT_THROW(lrr_solve(MatrixXd::Ones(3, 3), c), std::invalid_argument);
    EXPECT_THROW(ssc_solve(MatrixXd::Ones(3, 1), config(1.0)), std::invalid_argument);
    EXPECT_EQ(config(7.0).penalty(), 7.0);
}

TEST(Ssc, IterationCapReported) {
    const SyntheticData data = generate_union_of_subspaces(SynthSpec{});
    const AdmmResult r = ssc_solve(data.bundle.data_matrix(0), config(100.0, 3));
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3u);
    EXPECT_EQ(r.objective.size(), 3u);
}
