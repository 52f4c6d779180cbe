#include "dmsc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace dmsc {

std::size_t ModalityBundle::num_clusters() const {
    if (!labels) return 0;
    return std::set<int>(labels->begin(), labels->end()).size();
}

Eigen::MatrixXd ModalityBundle::data_matrix(std::size_t m) const {
    const Tensor& t = modalities.at(m);
    const std::size_t n = t.dim(0);
    const std::size_t d = t.size() / n;
    Eigen::MatrixXd x(d, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(j, i) = t[i * d + j];
    return x;
}

void ModalityBundle::validate() const {
    if (modalities.empty()) throw std::invalid_argument("bundle '" + name + "' has no modalities");
    if (modality_names.size() != modalities.size())
        throw std::invalid_argument("bundle '" + name + "': modality names and tensors disagree");
    const std::size_t n = size();
    for (std::size_t m = 0; m < modalities.size(); ++m)
        if (modalities[m].rank() != 4 || modalities[m].dim(0) != n)
            throw std::invalid_argument("bundle '" + name + "': modality '" + modality_names[m] + "' has shape " +
                                        shape_to_string(modalities[m].shape()) + ", expected N = " + std::to_string(n));
    if (labels && labels->size() != n)
        throw std::invalid_argument("bundle '" + name + "': " + std::to_string(labels->size()) + " labels for " +
                                    std::to_string(n) + " samples");
}

// ---------------------------------------------------------------------------

Tensor parse_idx(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) throw DataError("IDX: truncated header at byte offset " + std::to_string(bytes.size()));
    if (bytes[0] != 0 || bytes[1] != 0) throw DataError("IDX: bad magic at byte offset 0");
    if (bytes[2] != 0x08)
        throw DataError("IDX: unsupported element type 0x" + std::to_string(bytes[2]) + " at byte offset 2");
    const std::size_t rank = bytes[3];
    if (rank == 0) throw DataError("IDX: zero rank at byte offset 3");
    Shape shape;
    std::size_t offset = 4;
    for (std::size_t i = 0; i < rank; ++i) {
        if (offset + 4 > bytes.size())
            throw DataError("IDX: truncated dimension table at byte offset " + std::to_string(offset));
        const std::uint32_t d = (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
                                (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
        shape.push_back(d);
        offset += 4;
    }
    const std::size_t count = shape_numel(shape);
    if (bytes.size() < offset + count)
        throw DataError("IDX: truncated data at byte offset " + std::to_string(bytes.size()) + ", expected " +
                        std::to_string(offset + count) + " bytes");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = bytes[offset + i];
    return Tensor(std::move(shape), std::move(values));
}

Tensor load_idx(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open IDX file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return parse_idx(bytes);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

void write_idx(const std::string& path, const Tensor& tensor) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write IDX file '" + path + "'");
    std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(tensor.rank())};
    for (std::size_t d : tensor.shape())
        for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((d >> s) & 0xff));
    for (double v : tensor.values()) out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------------------

namespace {

std::string next_pgm_token(std::istream& in) {
    std::string tok;
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    in >> tok;
    return tok;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open PGM '" + path + "'");
    if (next_pgm_token(f) != "P5") throw DataError(path + ": not a binary PGM (P5)");
    GrayImage img;
    try {
        img.width = std::stoul(next_pgm_token(f));
        img.height = std::stoul(next_pgm_token(f));
        if (std::stoul(next_pgm_token(f)) != 255) throw DataError(path + ": maxval must be 255");
    } catch (const std::logic_error&) {
        throw DataError(path + ": malformed PGM header");
    }
    f.get();  // single whitespace after maxval
    img.pixels.resize(img.width * img.height);
    f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(f.gcount()) != img.pixels.size()) throw DataError(path + ": truncated pixel data");
    return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write PGM '" + path + "'");
    f << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!f) throw DataError("failed writing PGM '" + path + "'");
}

// ---------------------------------------------------------------------------

std::vector<double> resize_bilinear(std::span<const double> image, std::size_t height, std::size_t width,
                                    std::size_t out_height, std::size_t out_width) {
    std::vector<double> out(out_height * out_width);
    auto coord = [](std::size_t o, std::size_t out_n, std::size_t in_n) {
        return out_n > 1 ? static_cast<double>(o) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1)
                         : 0.0;
    };
    for (std::size_t r = 0; r < out_height; ++r) {
        const double y = coord(r, out_height, height);
        const auto y0 = static_cast<std::size_t>(std::floor(y));
        const std::size_t y1 = std::min(y0 + 1, height - 1);
        const double fy = y - static_cast<double>(y0);
        for (std::size_t c = 0; c < out_width; ++c) {
            const double x = coord(c, out_width, width);
            const auto x0 = static_cast<std::size_t>(std::floor(x));
            const std::size_t x1 = std::min(x0 + 1, width - 1);
            const double fx = x - static_cast<double>(x0);
            const double top = (1 - fx) * image[y0 * width + x0] + fx * image[y0 * width + x1];
            const double bottom = (1 - fx) * image[y1 * width + x0] + fx * image[y1 * width + x1];
            out[r * out_width + c] = (1 - fy) * top + fy * bottom;
        }
    }
    return out;
}

void rescale_to_pixel_range(std::span<double> image) {
    if (image.empty()) return;
    const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
    const double mn = *lo, mx = *hi;
    if (mx - mn <= 0.0) {
        std::fill(image.begin(), image.end(), 0.0);
        return;
    }
    for (double& v : image) v = std::clamp((v - mn) / (mx - mn) * 255.0, 0.0, 255.0);
}

ModalityBundle preprocess_bundle(const std::vector<LabeledImages>& raw, const PreprocessOptions& options,
                                 std::string name) {
    if (raw.empty()) throw DataError("preprocess: no modalities");
    for (const auto& mod : raw) {
        const auto& s = mod.images.shape();
        if (!(s.size() == 3 || (s.size() == 4 && s[3] == 1)))
            throw DataError("preprocess: modality '" + mod.name + "' must be [N,H,W] or [N,H,W,1], got " +
                            shape_to_string(s));
        if (mod.labels.size() != s[0])
            throw DataError("preprocess: modality '" + mod.name + "' has " + std::to_string(mod.labels.size()) +
                            " labels for " + std::to_string(s[0]) + " images");
    }

    // Per modality: class -> sample indices in original order.
    std::vector<std::map<int, std::vector<std::size_t>>> by_class(raw.size());
    std::set<int> classes;
    for (std::size_t m = 0; m < raw.size(); ++m)
        for (std::size_t i = 0; i < raw[m].labels.size(); ++i) {
            by_class[m][raw[m].labels[i]].push_back(i);
            classes.insert(raw[m].labels[i]);
        }

    std::mt19937_64 rng(options.seed);
    std::vector<std::vector<std::size_t>> picks(raw.size());
    std::vector<int> labels;
    for (int c : classes) {
        std::size_t common = std::numeric_limits<std::size_t>::max();
        for (std::size_t m = 0; m < raw.size(); ++m) {
            auto it = by_class[m].find(c);
            if (it == by_class[m].end())
                throw DataError("preprocess: class " + std::to_string(c) + " is missing from modality '" +
                                raw[m].name + "'");
            common = std::min(common, it->second.size());
        }
        if (options.aligned) {
            for (std::size_t m = 1; m < raw.size(); ++m)
                if (by_class[m][c] != by_class[0][c])
                    throw DataError("preprocess: modalities are not index-aligned for class " + std::to_string(c));
        }
        const std::size_t take = std::min(common, options.samples_per_class.value_or(common));
        if (options.aligned) {
            std::vector<std::size_t> order = by_class[0][c];
            if (options.samples_per_class) std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t m = 0; m < raw.size(); ++m)
                picks[m].insert(picks[m].end(), order.begin(), order.begin() + static_cast<long>(take));
        } else {
            for (std::size_t m = 0; m < raw.size(); ++m) {
                std::vector<std::size_t> order = by_class[m][c];
                std::shuffle(order.begin(), order.end(), rng);
                picks[m].insert(picks[m].end(), order.begin(), order.begin() + static_cast<long>(take));
            }
        }
        labels.insert(labels.end(), take, c);
    }

    ModalityBundle bundle;
    bundle.name = std::move(name);
    const std::size_t n = labels.size();
    const std::size_t oh = options.height, ow = options.width;
    for (std::size_t m = 0; m < raw.size(); ++m) {
        const auto& s = raw[m].images.shape();
        const std::size_t h = s[1], w = s[2];
        Tensor out(Shape{n, oh, ow, 1});
        for (std::size_t i = 0; i < n; ++i) {
            std::span<const double> src(raw[m].images.data() + picks[m][i] * h * w, h * w);
            auto img = resize_bilinear(src, h, w, oh, ow);
            rescale_to_pixel_range(img);
            std::copy(img.begin(), img.end(), out.data() + i * oh * ow);
        }
        bundle.modality_names.push_back(raw[m].name);
        bundle.modalities.push_back(std::move(out));
    }
    bundle.labels = std::move(labels);
    return bundle;
}

std::vector<LabeledImages> load_image_dir(const std::string& root, const std::vector<std::string>& modalities) {
    if (modalities.empty()) throw DataError("image_dir: no modalities listed");
    auto sorted_entries = [](const fs::path& dir, bool dirs) {
        std::vector<fs::path> out;
        if (!fs::is_directory(dir)) throw DataError("image_dir: missing directory '" + dir.string() + "'");
        for (const auto& e : fs::directory_iterator(dir))
            if (dirs ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".pgm"))
                out.push_back(e.path());
        std::sort(out.begin(), out.end());
        return out;
    };

    const auto class_dirs = sorted_entries(fs::path(root) / modalities[0], true);
    if (class_dirs.empty()) throw DataError("image_dir: no class directories under '" + root + "/" + modalities[0] + "'");

    std::vector<LabeledImages> out;
    for (const auto& mod : modalities) {
        LabeledImages li;
        li.name = mod;
        std::vector<double> values;
        std::size_t h = 0, w = 0, n = 0;
        for (std::size_t c = 0; c < class_dirs.size(); ++c) {
            const auto cls = class_dirs[c].filename();
            const auto files = sorted_entries(fs::path(root) / mod / cls, false);
            const auto reference = sorted_entries(fs::path(root) / modalities[0] / cls, false);
            if (files.size() != reference.size())
                throw DataError("image_dir: modality '" + mod + "' has " + std::to_string(files.size()) +
                                " samples in class '" + cls.string() + "', expected " + std::to_string(reference.size()));
            for (const auto& file : files) {
                GrayImage img = read_pgm(file.string());
                if (n == 0) {
                    h = img.height;
                    w = img.width;
                } else if (img.height != h || img.width != w) {
                    throw DataError("image_dir: '" + file.string() + "' is " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + ", expected " + std::to_string(w) + "x" +
                                    std::to_string(h));
                }
                values.insert(values.end(), img.pixels.begin(), img.pixels.end());
                li.labels.push_back(static_cast<int>(c));
                ++n;
            }
        }
        li.images = Tensor(Shape{n, h, w}, std::move(values));
        out.push_back(std::move(li));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::size_t SynthSpec::dim_of(std::size_t s) const {
    return subspace_dims.size() == 1 ? subspace_dims[0] : subspace_dims.at(s);
}

std::size_t SynthSpec::points_of(std::size_t s) const {
    return points_per_subspace.size() == 1 ? points_per_subspace[0] : points_per_subspace.at(s);
}

std::size_t SynthSpec::total_points() const {
    std::size_t n = 0;
    for (std::size_t s = 0; s < num_subspaces; ++s) n += points_of(s);
    return n;
}

void SynthSpec::validate() const {
    if (ambient_dim == 0 || num_subspaces == 0 || num_views == 0)
        throw std::invalid_argument("synthetic: ambient_dim, num_subspaces and num_views must be positive");
    if (subspace_dims.size() != 1 && subspace_dims.size() != num_subspaces)
        throw std::invalid_argument("synthetic: subspace_dims needs 1 or num_subspaces entries");
    if (points_per_subspace.size() != 1 && points_per_subspace.size() != num_subspaces)
        throw std::invalid_argument("synthetic: points_per_subspace needs 1 or num_subspaces entries");
    for (std::size_t s = 0; s < num_subspaces; ++s) {
        if (dim_of(s) == 0 || dim_of(s) >= ambient_dim)
            throw std::invalid_argument("synthetic: subspace dimension must be in [1, ambient_dim)");
        if (points_of(s) == 0) throw std::invalid_argument("synthetic: empty subspace");
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("synthetic: noise_sigma must be nonnegative");
}

namespace {

Eigen::MatrixXd gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    return m;
}

// Orthonormal columns spanning the range of a tall Gaussian matrix.
Eigen::MatrixXd orthonormal_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, rng));
    return qr.householderQ() * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

SyntheticData generate_union_of_subspaces(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const std::size_t d_amb = spec.ambient_dim;
    const std::size_t n = spec.total_points();

    SyntheticData out;
    std::size_t dim_total = 0;
    for (std::size_t s = 0; s < spec.num_subspaces; ++s) dim_total += spec.dim_of(s);
    if (spec.orthogonal && dim_total <= d_amb) {
        Eigen::MatrixXd q = orthonormal_columns(d_amb, dim_total, rng);
        Eigen::Index col = 0;
        for (std::size_t s = 0; s < spec.num_subspaces; ++s) {
            const auto d = static_cast<Eigen::Index>(spec.dim_of(s));
            out.bases.push_back(q.middleCols(col, d));
            col += d;
        }
    } else {
        for (std::size_t s = 0; s < spec.num_subspaces; ++s)
            out.bases.push_back(orthonormal_columns(d_amb, spec.dim_of(s), rng));
    }

    out.points.resize(static_cast<Eigen::Index>(d_amb), static_cast<Eigen::Index>(n));
    std::vector<int> labels;
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < spec.num_subspaces; ++s) {
        for (std::size_t p = 0; p < spec.points_of(s); ++p, ++col) {
            Eigen::VectorXd coeff = gaussian(spec.dim_of(s), 1, rng);
            coeff /= coeff.norm();
            out.points.col(col) = out.bases[s] * coeff;
            labels.push_back(static_cast<int>(s));
        }
    }
    if (spec.noise_sigma > 0.0)
        for (Eigen::Index j = 0; j < out.points.cols(); ++j)
            for (Eigen::Index i = 0; i < out.points.rows(); ++i) out.points(i, j) += spec.noise_sigma * noise(rng);

    const std::size_t view_dim = spec.view_dim == 0 ? d_amb : spec.view_dim;
    out.bundle.name = "synthetic";
    for (std::size_t v = 0; v < spec.num_views; ++v) {
        Eigen::MatrixXd proj = view_dim >= d_amb ? orthonormal_columns(view_dim, d_amb, rng)
                                                 : Eigen::MatrixXd(orthonormal_columns(d_amb, view_dim, rng).transpose());
        Eigen::MatrixXd y = proj * out.points;
        Tensor t(Shape{n, 1, 1, view_dim});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < view_dim; ++j)
                t[i * view_dim + j] = y(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
        out.bundle.modality_names.push_back("view" + std::to_string(v + 1));
        out.bundle.modalities.push_back(std::move(t));
        out.projections.push_back(std::move(proj));
    }
    out.bundle.labels = std::move(labels);
    return out;
}

}  // namespace dmsc
