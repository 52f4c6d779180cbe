#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace dmsc {

/// counts(i, j): samples with the i-th distinct predicted label and the j-th
/// distinct true label, labels taken in ascending order.
struct ContingencyTable {
    Eigen::MatrixXd counts;
    Eigen::VectorXd pred_marginal;
    Eigen::VectorXd true_marginal;
    std::size_t n = 0;

    static ContingencyTable build(const std::vector<int>& pred, const std::vector<int>& truth);
};

/// Minimum-cost perfect assignment; assignment[row] = column. Rectangular
/// costs are padded with zeros to square.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct ClusteringScores {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
};

/// ACC under optimal label matching, NMI with sqrt(H_pred H_true)
/// normalization, and the adjusted Rand index.
ClusteringScores evaluate_clustering(const std::vector<int>& pred, const std::vector<int>& truth);

}  // namespace dmsc
