#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dmsc/tensor.hpp"

namespace dmsc {

/// Index-aligned samples across M modalities. Sample i of every modality
/// belongs to the same underlying object and carries labels[i].
struct ModalityBundle {
    std::string name;
    std::vector<std::string> modality_names;
    std::vector<Tensor> modalities;  ///< each [N, H, W, C]
    std::optional<std::vector<int>> labels;

    std::size_t size() const { return modalities.empty() ? 0 : modalities.front().dim(0); }
    std::size_t num_modalities() const { return modalities.size(); }
    /// Distinct label count, 0 without labels.
    std::size_t num_clusters() const;
    /// Modality m as a D x N matrix, one flattened sample per column.
    Eigen::MatrixXd data_matrix(std::size_t m) const;
    /// Throws std::invalid_argument if modalities disagree on N or labels on length.
    void validate() const;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// IDX (MNIST) files: two zero bytes, element type (0x08 = unsigned byte),
// rank, rank big-endian u32 dimensions, then raw data.

Tensor parse_idx(const std::vector<std::uint8_t>& bytes);
Tensor load_idx(const std::string& path);
/// Writes an unsigned-byte IDX file; values are rounded and clamped to 0..255.
void write_idx(const std::string& path, const Tensor& tensor);

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255).

struct GrayImage {
    std::size_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  ///< row-major
};

GrayImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);

// ---------------------------------------------------------------------------
// Preprocessing.

/// Bilinear resize of an H x W image with corner-aligned sampling.
std::vector<double> resize_bilinear(std::span<const double> image, std::size_t height, std::size_t width,
                                    std::size_t out_height, std::size_t out_width);

/// Linear rescale to [0, 255]; a constant image maps to all zeros.
void rescale_to_pixel_range(std::span<double> image);

/// One modality before preprocessing: [N, H, W] or [N, H, W, 1] images.
struct LabeledImages {
    std::string name;
    Tensor images;
    std::vector<int> labels;
};

struct PreprocessOptions {
    std::size_t height = 32;
    std::size_t width = 32;
    std::optional<std::size_t> samples_per_class;
    /// true: modalities are already index-aligned (same sample order);
    /// false: same-class samples are bundled by seeded random matching.
    bool aligned = false;
    std::uint64_t seed = 0;
};

ModalityBundle preprocess_bundle(const std::vector<LabeledImages>& raw, const PreprocessOptions& options,
                                 std::string name = "bundle");

/// Loads `<root>/<modality>/<class>/<sample>.pgm`. Classes are the sorted
/// subdirectory names of the first modality; samples within a class are
/// matched across modalities by sorted file name.
std::vector<LabeledImages> load_image_dir(const std::string& root, const std::vector<std::string>& modalities);

// ---------------------------------------------------------------------------
// Synthetic union of subspaces.

struct SynthSpec {
    std::size_t ambient_dim = 30;
    std::size_t num_subspaces = 5;
    std::vector<std::size_t> subspace_dims{3};        ///< one entry broadcasts to all subspaces
    std::vector<std::size_t> points_per_subspace{50};  ///< one entry broadcasts to all subspaces
    double noise_sigma = 0.0;
    std::size_t num_views = 2;
    std::size_t view_dim = 0;  ///< 0: same as ambient_dim
    /// Draw mutually orthogonal subspaces when their dimensions fit in the
    /// ambient space; otherwise each basis is drawn independently.
    bool orthogonal = true;
    std::uint64_t seed = 0;

    std::size_t dim_of(std::size_t subspace) const;
    std::size_t points_of(std::size_t subspace) const;
    std::size_t total_points() const;
    void validate() const;
};

struct SyntheticData {
    ModalityBundle bundle;                 ///< views as [N, 1, 1, view_dim]
    Eigen::MatrixXd points;                ///< shared D x N samples before projection
    std::vector<Eigen::MatrixXd> bases;    ///< D x d_l orthonormal bases
    std::vector<Eigen::MatrixXd> projections;  ///< view_dim x D per view
};

SyntheticData generate_union_of_subspaces(const SynthSpec& spec);

}  // namespace dmsc
