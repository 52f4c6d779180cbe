#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmsc/data.hpp"

namespace dmsc {

/// Square matrix as u64 N followed by N*N row-major f64, little-endian.
void write_matrix_bin(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_bin(const std::string& path);

/// Order that groups samples by true label (stable within a label).
std::vector<std::size_t> label_order(const std::vector<int>& labels);

/// 8-bit rendering of m with linear min-max scaling; rows and columns are
/// permuted by `order` when given.
GrayImage heatmap(const Eigen::MatrixXd& m, const std::optional<std::vector<std::size_t>>& order = std::nullopt);

/// CSV with header `index,label`.
void write_labels_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::string& path);

}  // namespace dmsc
