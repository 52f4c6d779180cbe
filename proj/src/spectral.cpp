#include "dmsc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace dmsc {

Eigen::MatrixXd normalize_coefficients(const Eigen::MatrixXd& coeffs) {
    Eigen::MatrixXd out = coeffs;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double m = out.col(j).cwiseAbs().maxCoeff();
        if (m > 0.0) out.col(j) /= m;
    }
    return out;
}

Eigen::MatrixXd build_affinity(const Eigen::MatrixXd& coeffs) {
    if (coeffs.rows() != coeffs.cols())
        throw std::invalid_argument("affinity needs a square matrix, got " + std::to_string(coeffs.rows()) + "x" +
                                    std::to_string(coeffs.cols()));
    const Eigen::MatrixXd a = coeffs.cwiseAbs();
    Eigen::MatrixXd w(a.rows(), a.cols());
    // Both triangles from the same sums so that w == w^T bit for bit.
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i <= j; ++i) w(i, j) = w(j, i) = a(i, j) + a(j, i);
    return w;
}

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace

EigenDecomposition jacobi_eigen(const Eigen::MatrixXd& input, double tol, std::size_t max_sweeps,
                                const Eigen::MatrixXd& warm_start) {
    const Eigen::Index n = input.rows();
    if (input.cols() != n) throw std::invalid_argument("jacobi_eigen needs a square matrix");
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    if (warm_start.size() != 0) {
        if (warm_start.rows() != n || warm_start.cols() != n)
            throw std::invalid_argument("jacobi_eigen warm start has the wrong size");
        v = warm_start;
    }
    Eigen::MatrixXd a = warm_start.size() != 0 ? Eigen::MatrixXd(v.transpose() * input * v) : input;
    a = (a + a.transpose()) / 2.0;

    const double threshold = tol * input.norm();
    EigenDecomposition out;
    while (out.sweeps < max_sweeps && off_diagonal_norm(a) > threshold) {
        ++out.sweeps;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

namespace {

struct Lloyd {
    std::vector<int> labels;
    double wcss = 0.0;
};

Lloyd lloyd_once(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng, const KMeansOptions& options) {
    const Eigen::Index n = x.rows();
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd centers(kk, x.cols());

    // k-means++ seeding.
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(rng));
    Eigen::VectorXd d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (Eigen::Index c = 1; c < kk; ++c) {
        const double total = d2.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2(i);
                if (r < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.row(c) = x.row(chosen);
        d2 = d2.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    Lloyd out;
    out.labels.assign(static_cast<std::size_t>(n), -1);
    Eigen::VectorXd dist(n);
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < kk; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
            dist(i) = bd;
        }

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(kk, x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int l = out.labels[static_cast<std::size_t>(i)];
            next.row(l) += x.row(i);
            ++counts[static_cast<std::size_t>(l)];
        }
        for (Eigen::Index c = 0; c < kk; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its center.
            Eigen::Index far = 0;
            dist.maxCoeff(&far);
            next.row(c) = x.row(far);
            dist(far) = 0.0;
        }
        const double shift = (next - centers).rowwise().norm().maxCoeff();
        centers = next;
        if (shift < options.tol) break;
    }

    out.wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < kk; ++c) {
            const double d = (x.row(i) - centers.row(c)).squaredNorm();
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        out.wcss += bd;
    }
    return out;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k == 0 || k > n)
        throw std::invalid_argument("kmeans: K = " + std::to_string(k) + " must be in [1, N = " + std::to_string(n) +
                                    "]");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(1, options.restarts); ++r) {
        Lloyd run = lloyd_once(points, k, rng, options);
        if (run.wcss < best.wcss) {
            best.wcss = run.wcss;
            best.labeling.labels = std::move(run.labels);
        }
    }
    best.labeling.k = k;
    return best;
}

ClusterLabeling spectral_cluster(const Eigen::MatrixXd& affinity, std::size_t k, std::uint64_t seed) {
    const Eigen::Index n = affinity.rows();
    if (affinity.cols() != n) throw std::invalid_argument("spectral_cluster needs a square affinity");
    if (k == 0 || k > static_cast<std::size_t>(n))
        throw std::invalid_argument("spectral_cluster: K = " + std::to_string(k) + " must be in [1, N = " +
                                    std::to_string(n) + "]");
    if (k == 1) return ClusterLabeling{std::vector<int>(static_cast<std::size_t>(n), 0), 1};

    Eigen::VectorXd dinv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = affinity.row(i).sum();
        dinv(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    Eigen::MatrixXd lap = -(dinv.asDiagonal() * affinity * dinv.asDiagonal());
    lap.diagonal().array() += 1.0;

    const EigenDecomposition eig = jacobi_eigen(lap);
    Eigen::MatrixXd u = eig.vectors.leftCols(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = u.row(i).norm();
        if (norm > 0.0) u.row(i) /= norm;
    }
    return kmeans(u, k, seed).labeling;
}

}  // namespace dmsc
