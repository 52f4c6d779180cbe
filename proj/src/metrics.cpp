#include "dmsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace dmsc {

ContingencyTable ContingencyTable::build(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("labelings differ in length: " + std::to_string(pred.size()) + " vs " +
                                    std::to_string(truth.size()));
    if (pred.empty()) throw std::invalid_argument("labelings are empty");
    std::map<int, Eigen::Index> pi, ti;
    for (int l : pred) pi.emplace(l, 0);
    for (int l : truth) ti.emplace(l, 0);
    Eigen::Index k = 0;
    for (auto& [l, idx] : pi) idx = k++;
    k = 0;
    for (auto& [l, idx] : ti) idx = k++;

    ContingencyTable t;
    t.n = pred.size();
    t.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pi.size()), static_cast<Eigen::Index>(ti.size()));
    for (std::size_t i = 0; i < pred.size(); ++i) t.counts(pi[pred[i]], ti[truth[i]]) += 1.0;
    t.pred_marginal = t.counts.rowwise().sum();
    t.true_marginal = t.counts.colwise().sum().transpose();
    return t;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const Eigen::Index rows = cost.rows(), cols = cost.cols();
    const Eigen::Index n = std::max(rows, cols);
    if (n == 0) return {};
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    a.topLeftCorner(rows, cols) = cost;

    // Shortest augmenting paths with row/column potentials, 1-based.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<Eigen::Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            const Eigen::Index i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) continue;
                const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
                if (cur < minv[sj]) {
                    minv[sj] = cur;
                    way[sj] = j0;
                }
                if (minv[sj] < delta) {
                    delta = minv[sj];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) {
                    u[static_cast<std::size_t>(match[sj])] += delta;
                    v[sj] -= delta;
                } else {
                    minv[sj] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    for (Eigen::Index j = 1; j <= n; ++j)
        assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = static_cast<int>(j - 1);
    assignment.resize(static_cast<std::size_t>(rows));
    for (auto& c : assignment)
        if (c >= cols) c = -1;
    return assignment;
}

namespace {

double entropy(const Eigen::VectorXd& marginal, double n) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < marginal.size(); ++i)
        if (marginal(i) > 0.0) h -= marginal(i) / n * std::log(marginal(i) / n);
    return h;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

ClusteringScores evaluate_clustering(const std::vector<int>& pred, const std::vector<int>& truth) {
    const ContingencyTable t = ContingencyTable::build(pred, truth);
    const double n = static_cast<double>(t.n);
    ClusteringScores s;

    const std::vector<int> assign = hungarian(-t.counts);
    double matched = 0.0;
    for (std::size_t r = 0; r < assign.size(); ++r)
        if (assign[r] >= 0) matched += t.counts(static_cast<Eigen::Index>(r), assign[r]);
    s.acc = matched / n;

    const double hp = entropy(t.pred_marginal, n), ht = entropy(t.true_marginal, n);
    if (hp == 0.0 && ht == 0.0) {
        s.nmi = 1.0;
    } else if (hp == 0.0 || ht == 0.0) {
        s.nmi = 0.0;
    } else {
        double mi = 0.0;
        for (Eigen::Index i = 0; i < t.counts.rows(); ++i)
            for (Eigen::Index j = 0; j < t.counts.cols(); ++j) {
                const double c = t.counts(i, j);
                if (c > 0.0) mi += c / n * std::log(c * n / (t.pred_marginal(i) * t.true_marginal(j)));
            }
        s.nmi = std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
    }

    double index = 0.0, sum_pred = 0.0, sum_true = 0.0;
    for (Eigen::Index i = 0; i < t.counts.size(); ++i) index += choose2(t.counts.data()[i]);
    for (Eigen::Index i = 0; i < t.pred_marginal.size(); ++i) sum_pred += choose2(t.pred_marginal(i));
    for (Eigen::Index j = 0; j < t.true_marginal.size(); ++j) sum_true += choose2(t.true_marginal(j));
    const double pairs = choose2(n);
    const double expected = pairs > 0.0 ? sum_pred * sum_true / pairs : 0.0;
    const double max_index = (sum_pred + sum_true) / 2.0;
    // Both labelings trivial (one cluster each, or all singletons): the index is undefined, score as perfect.
    if (pairs == 0.0 || max_index == expected)
        s.ari = 1.0;
    else
        s.ari = (index - expected) / (max_index - expected);
    return s;
}

}  // namespace dmsc
