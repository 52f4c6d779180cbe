#include "dmsc/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dmsc/spectral.hpp"

namespace dmsc {

void AdmmConfig::validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("ADMM lambda must be positive");
    if (!(penalty() > 0.0)) throw std::invalid_argument("ADMM rho must be positive");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("ADMM tolerances must be positive");
}

namespace {

void check_input(const Eigen::MatrixXd& x, const char* who) {
    if (x.cols() < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 samples");
}

double fidelity(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, double lambda) {
    return lambda / 2.0 * (x - x * c).squaredNorm();
}

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

struct Tolerances {
    double primal, dual;
};

Tolerances tolerances(const AdmmConfig& cfg, Eigen::Index n, double a_norm, double c_norm, double y_norm) {
    const double root = static_cast<double>(n);  // sqrt(n * n) entries
    return {root * cfg.abs_tol + cfg.rel_tol * std::max(a_norm, c_norm), root * cfg.abs_tol + cfg.rel_tol * y_norm};
}

}  // namespace

AdmmResult ssc_solve(const Eigen::MatrixXd& x, const AdmmConfig& cfg) {
    check_input(x, "ssc_solve");
    cfg.validate();
    const Eigen::Index n = x.cols();
    const double rho = cfg.penalty();
    const Eigen::MatrixXd g = cfg.lambda * (x.transpose() * x);
    const Eigen::LLT<Eigen::MatrixXd> system(g + rho * Eigen::MatrixXd::Identity(n, n));

    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n), y = Eigen::MatrixXd::Zero(n, n), a(n, n);
    AdmmResult out;
    for (out.iterations = 1; out.iterations <= cfg.max_iters; ++out.iterations) {
        a = system.solve(g + rho * c - y);
        const Eigen::MatrixXd prev = c;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) c(i, j) = i == j ? 0.0 : soft(a(i, j) + y(i, j) / rho, 1.0 / rho);
        y += rho * (a - c);

        out.objective.push_back(c.cwiseAbs().sum() + fidelity(x, c, cfg.lambda));
        const double primal = (a - c).norm(), dual = rho * (c - prev).norm();
        const Tolerances tol = tolerances(cfg, n, a.norm(), c.norm(), y.norm());
        if (primal <= tol.primal && dual <= tol.dual) {
            out.converged = true;
            break;
        }
    }
    out.iterations = std::min(out.iterations, cfg.max_iters);
    out.coeffs = std::move(c);
    return out;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    const Eigen::VectorXd ev = jacobi_eigen(m.transpose() * m).values;
    Eigen::VectorXd s(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k) s(k) = std::sqrt(std::max(ev(ev.size() - 1 - k), 0.0));
    return s;
}

namespace {

// Shrinks the singular values of m by tau. `basis` carries the right
// singular vectors between calls as a warm start; `nuclear` receives the
// nuclear norm of the result.
Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau, Eigen::MatrixXd& basis,
                                         double& nuclear) {
    const EigenDecomposition eig = jacobi_eigen(m.transpose() * m, 1e-12, 100, basis);
    basis = eig.vectors;
    Eigen::VectorXd shrink = Eigen::VectorXd::Zero(eig.values.size());
    nuclear = 0.0;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
        const double sigma = std::sqrt(std::max(eig.values(k), 0.0));
        if (sigma > tau) {
            shrink(k) = (sigma - tau) / sigma;
            nuclear += sigma - tau;
        }
    }
    return m * eig.vectors * shrink.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

AdmmResult lrr_solve(const Eigen::MatrixXd& x, const AdmmConfig& cfg) {
    check_input(x, "lrr_solve");
    cfg.validate();
    const Eigen::Index n = x.cols();
    const double rho = cfg.penalty();
    const Eigen::MatrixXd g = cfg.lambda * (x.transpose() * x);
    const Eigen::LLT<Eigen::MatrixXd> system(g + rho * Eigen::MatrixXd::Identity(n, n));

    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n), j = Eigen::MatrixXd::Zero(n, n), y = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd basis;
    AdmmResult out;
    for (out.iterations = 1; out.iterations <= cfg.max_iters; ++out.iterations) {
        const Eigen::MatrixXd prev = j;
        double nuclear = 0.0;
        j = singular_value_threshold(c + y / rho, 1.0 / rho, basis, nuclear);
        c = system.solve(g + rho * j - y);
        y += rho * (c - j);

        out.objective.push_back(nuclear + fidelity(x, j, cfg.lambda));
        const double primal = (c - j).norm(), dual = rho * (j - prev).norm();
        const Tolerances tol = tolerances(cfg, n, c.norm(), j.norm(), y.norm());
        if (primal <= tol.primal && dual <= tol.dual) {
            out.converged = true;
            break;
        }
    }
    out.iterations = std::min(out.iterations, cfg.max_iters);
    out.coeffs = std::move(j);
    return out;
}

}  // namespace dmsc
