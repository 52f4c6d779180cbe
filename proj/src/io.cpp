#include "dmsc/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dmsc {

static_assert(std::endian::native == std::endian::little, "matrix dumps assume a little-endian host");

void write_matrix_bin(const std::string& path, const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix dump expects a square matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    const auto n = static_cast<std::uint64_t>(m.rows());
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Eigen::MatrixXd read_matrix_bin(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::uint64_t n = 0;
    if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) throw std::runtime_error(path + ": missing header");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
    if (!in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double))))
        throw std::runtime_error(path + ": truncated, expected " + std::to_string(n) + "x" + std::to_string(n));
    return rm;
}

std::vector<std::size_t> label_order(const std::vector<int>& labels) {
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
    return order;
}

GrayImage heatmap(const Eigen::MatrixXd& m, const std::optional<std::vector<std::size_t>>& order) {
    const auto n = static_cast<std::size_t>(m.rows()), cols = static_cast<std::size_t>(m.cols());
    if (order && (order->size() != n || n != cols))
        throw std::invalid_argument("heatmap permutation does not match the matrix size");
    auto idx = [&](std::size_t i) { return order ? static_cast<Eigen::Index>((*order)[i]) : static_cast<Eigen::Index>(i); };
    GrayImage img;
    img.height = n;
    img.width = cols;
    img.pixels.assign(n * cols, 0);
    if (m.size() == 0) return img;
    const double lo = m.minCoeff(), hi = m.maxCoeff();
    const double range = hi - lo;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = range > 0.0 ? (m(idx(r), idx(c)) - lo) / range : 0.0;
            img.pixels[r * cols + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<int> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "index,label")
        throw std::runtime_error(path + ": expected header 'index,label'");
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("");
            const std::size_t index = std::stoul(line.substr(0, comma));
            if (index != labels.size()) throw std::runtime_error(path + ":" + std::to_string(line_no) + ": index out of order");
            labels.push_back(std::stoi(line.substr(comma + 1)));
        } catch (const std::logic_error&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        }
    }
    return labels;
}

}  // namespace dmsc
