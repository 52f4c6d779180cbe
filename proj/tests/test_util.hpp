#pragma once

#include <random>

#include <Eigen/Dense>

#include "dmsc/tensor.hpp"

namespace dmsc::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(shape);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

// Values bounded away from zero, for ops with a kink at the origin.
inline Tensor random_away_from_zero(const Shape& shape, std::mt19937_64& rng, double margin = 0.1) {
    Tensor t = random_tensor(shape, rng);
    for (auto& v : t.values()) v += v >= 0.0 ? margin : -margin;
    return t;
}

inline Eigen::MatrixXd as_matrix(const Tensor& t) {
    const std::size_t rows = t.dim(0), cols = t.size() / rows;
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t[i * cols + j];
    return m;
}

}  // namespace dmsc::testing
