#include "dmsc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <Eigen/Dense>

namespace dmsc {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != shape_numel(shape_))
        throw ShapeError("tensor of shape " + shape_to_string(shape_) + " given " + std::to_string(values_.size()) +
                         " values");
}

double& Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return values_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

double Tensor::at(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const {
    return values_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
}

double Tensor::item() const {
    if (values_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
    return values_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != values_.size())
        throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    return Tensor(std::move(shape), values_);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor& Node::ensure_grad() {
    if (!grad) grad.emplace(value.shape(), 0.0);
    return *grad;
}

Var Var::constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var Var::parameter(Tensor value, std::string name) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->name = std::move(name);
    return Var(std::move(node));
}

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    for (auto& p : parents) {
        node->requires_grad = node->requires_grad || p.requires_grad();
        node->parents.push_back(p.node());
    }
    if (node->requires_grad) node->backward_fn = std::move(backward_fn);
    return Var(std::move(node));
}

void backward(const Var& loss) {
    if (!loss) throw std::invalid_argument("backward on empty variable");
    if (loss.value().size() != 1 || loss.value().rank() != 0)
        throw ShapeError("backward requires a scalar loss, got shape " + shape_to_string(loss.shape()));

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->grad.reset();
    loss.node()->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad) n->backward_fn(*n);
    }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        const Tensor& g = *self.grad;
        for (const Var& p : {a, b}) {
            if (!p.requires_grad()) continue;
            Tensor& pg = p.node()->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_op(std::move(out), {a, b}, [a, b](Node& self) {
        const Tensor& g = *self.grad;
        if (a.requires_grad()) {
            Tensor& ag = a.node()->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
        }
        if (b.requires_grad()) {
            Tensor& bg = b.node()->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) bg[i] -= g[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (auto& v : out.values()) v *= s;
    return make_op(std::move(out), {a}, [a, s](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += s * (*self.grad)[i];
    });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return make_op(std::move(out), {a}, [a](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        const Tensor& x = a.value();
        for (std::size_t i = 0; i < ag.size(); ++i)
            if (x[i] > 0.0) ag[i] += (*self.grad)[i];
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return make_op(Tensor::scalar(s), {a}, [a](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        const double g = (*self.grad)[0];
        for (auto& v : ag.values()) v += g;
    });
}

Var frobenius_sq(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    return make_op(Tensor::scalar(s), {a}, [a](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        const double g = 2.0 * (*self.grad)[0];
        const Tensor& x = a.value();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += g * x[i];
    });
}

Var frobenius(const Var& a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v * v;
    const double norm = std::sqrt(s);
    return make_op(Tensor::scalar(norm), {a}, [a, norm](Node& self) {
        // Subgradient 0 at the origin.
        if (norm == 0.0) return;
        Tensor& ag = a.node()->ensure_grad();
        const double g = (*self.grad)[0] / norm;
        const Tensor& x = a.value();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += g * x[i];
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make_op(std::move(out), {a}, [a](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += (*self.grad)[i];
    });
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

// C[m,n] += op(A) * op(B), row-major, op = optional transpose.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n, bool ta,
              bool tb) {
    const auto em = static_cast<Eigen::Index>(m), ek = static_cast<Eigen::Index>(k),
               en = static_cast<Eigen::Index>(n);
    Eigen::Map<RowMat> cm(c, em, en);
    if (!ta && !tb)
        cm.noalias() += ConstMap(a, em, ek) * ConstMap(b, ek, en);
    else if (!ta && tb)
        cm.noalias() += ConstMap(a, em, ek) * ConstMap(b, en, ek).transpose();
    else if (ta && !tb)
        cm.noalias() += ConstMap(a, ek, em).transpose() * ConstMap(b, ek, en);
    else
        cm.noalias() += ConstMap(a, ek, em).transpose() * ConstMap(b, en, ek).transpose();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0])
        throw ShapeError("matmul: shape mismatch " + shape_to_string(sa) + " x " + shape_to_string(sb));
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    Tensor out(Shape{m, n}, 0.0);
    gemm_acc(a.value().data(), b.value().data(), out.data(), m, k, n, false, false);
    return make_op(std::move(out), {a, b}, [a, b, m, k, n](Node& self) {
        const double* g = self.grad->data();
        if (a.requires_grad())  // dA = G B^T
            gemm_acc(g, b.value().data(), a.node()->ensure_grad().data(), m, n, k, false, true);
        if (b.requires_grad())  // dB = A^T G
            gemm_acc(a.value().data(), g, b.node()->ensure_grad().data(), k, m, n, true, false);
    });
}

Var transpose(const Var& a) {
    const Shape& s = a.shape();
    if (s.size() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_to_string(s));
    const std::size_t r = s[0], c = s[1];
    Tensor out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
    return make_op(std::move(out), {a}, [a, r, c](Node& self) {
        Tensor& ag = a.node()->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ag[i * c + j] += (*self.grad)[j * r + i];
    });
}

// ---------------------------------------------------------------------------
// Convolution with same-padding. Geometry is always expressed from the conv
// side: a "large" map of size `in` is reduced to ceil(in / stride).

std::size_t conv_output_size(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

namespace {

struct ConvGeometry {
    std::size_t n, big_h, big_w, big_c;        // large side (conv input / deconv output)
    std::size_t small_h, small_w, small_c;     // small side (conv output / deconv input)
    std::size_t kh, kw, stride, pad_top, pad_left;
};

std::size_t same_pad_before(std::size_t in, std::size_t out, std::size_t k, std::size_t stride) {
    const long total = static_cast<long>((out - 1) * stride + k) - static_cast<long>(in);
    return total > 0 ? static_cast<std::size_t>(total) / 2 : 0;
}

void check_stride(std::size_t stride) {
    if (stride != 1 && stride != 2) throw ShapeError("stride must be 1 or 2, got " + std::to_string(stride));
}

// Kernel layout [kh, kw, big_c, small_c] for both directions.
ConvGeometry make_geometry(std::size_t n, std::size_t big_h, std::size_t big_w, std::size_t small_h,
                           std::size_t small_w, const Shape& kernel, std::size_t stride) {
    ConvGeometry g{};
    g.n = n;
    g.big_h = big_h;
    g.big_w = big_w;
    g.big_c = kernel[2];
    g.small_h = small_h;
    g.small_w = small_w;
    g.small_c = kernel[3];
    g.kh = kernel[0];
    g.kw = kernel[1];
    g.stride = stride;
    g.pad_top = same_pad_before(big_h, small_h, g.kh, stride);
    g.pad_left = same_pad_before(big_w, small_w, g.kw, stride);
    return g;
}

// small[n,oh,ow,co] += sum big[n,ih,iw,ci] * k[i,j,ci,co]
void conv_big_to_small(const ConvGeometry& g, const double* big, const double* kernel, double* small) {
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t oh = 0; oh < g.small_h; ++oh)
            for (std::size_t ow = 0; ow < g.small_w; ++ow) {
                double* out = small + ((n * g.small_h + oh) * g.small_w + ow) * g.small_c;
                for (std::size_t i = 0; i < g.kh; ++i) {
                    const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad_top);
                    if (ih < 0 || ih >= static_cast<long>(g.big_h)) continue;
                    for (std::size_t j = 0; j < g.kw; ++j) {
                        const long iw = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad_left);
                        if (iw < 0 || iw >= static_cast<long>(g.big_w)) continue;
                        const double* in = big + ((n * g.big_h + ih) * g.big_w + iw) * g.big_c;
                        const double* k = kernel + (i * g.kw + j) * g.big_c * g.small_c;
                        for (std::size_t ci = 0; ci < g.big_c; ++ci) {
                            const double x = in[ci];
                            if (x == 0.0) continue;
                            const double* krow = k + ci * g.small_c;
                            for (std::size_t co = 0; co < g.small_c; ++co) out[co] += x * krow[co];
                        }
                    }
                }
            }
}

// Adjoint of conv_big_to_small with respect to `big`.
void conv_small_to_big(const ConvGeometry& g, const double* small, const double* kernel, double* big) {
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t oh = 0; oh < g.small_h; ++oh)
            for (std::size_t ow = 0; ow < g.small_w; ++ow) {
                const double* s = small + ((n * g.small_h + oh) * g.small_w + ow) * g.small_c;
                for (std::size_t i = 0; i < g.kh; ++i) {
                    const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad_top);
                    if (ih < 0 || ih >= static_cast<long>(g.big_h)) continue;
                    for (std::size_t j = 0; j < g.kw; ++j) {
                        const long iw = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad_left);
                        if (iw < 0 || iw >= static_cast<long>(g.big_w)) continue;
                        double* b = big + ((n * g.big_h + ih) * g.big_w + iw) * g.big_c;
                        const double* k = kernel + (i * g.kw + j) * g.big_c * g.small_c;
                        for (std::size_t ci = 0; ci < g.big_c; ++ci) {
                            const double* krow = k + ci * g.small_c;
                            double acc = 0.0;
                            for (std::size_t co = 0; co < g.small_c; ++co) acc += s[co] * krow[co];
                            b[ci] += acc;
                        }
                    }
                }
            }
}

// dK[i,j,ci,co] += sum big[n,ih,iw,ci] * small[n,oh,ow,co]
void conv_kernel_grad(const ConvGeometry& g, const double* big, const double* small, double* dkernel) {
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t oh = 0; oh < g.small_h; ++oh)
            for (std::size_t ow = 0; ow < g.small_w; ++ow) {
                const double* s = small + ((n * g.small_h + oh) * g.small_w + ow) * g.small_c;
                for (std::size_t i = 0; i < g.kh; ++i) {
                    const long ih = static_cast<long>(oh * g.stride + i) - static_cast<long>(g.pad_top);
                    if (ih < 0 || ih >= static_cast<long>(g.big_h)) continue;
                    for (std::size_t j = 0; j < g.kw; ++j) {
                        const long iw = static_cast<long>(ow * g.stride + j) - static_cast<long>(g.pad_left);
                        if (iw < 0 || iw >= static_cast<long>(g.big_w)) continue;
                        const double* in = big + ((n * g.big_h + ih) * g.big_w + iw) * g.big_c;
                        double* dk = dkernel + (i * g.kw + j) * g.big_c * g.small_c;
                        for (std::size_t ci = 0; ci < g.big_c; ++ci) {
                            const double x = in[ci];
                            if (x == 0.0) continue;
                            double* drow = dk + ci * g.small_c;
                            for (std::size_t co = 0; co < g.small_c; ++co) drow[co] += x * s[co];
                        }
                    }
                }
            }
}

void check_conv_shapes(const Shape& input, const Shape& kernel, std::size_t stride, const char* op,
                       std::size_t input_channel_axis) {
    check_stride(stride);
    if (input.size() != 4 || kernel.size() != 4)
        throw ShapeError(std::string(op) + ": expected rank-4 input and kernel, got " + shape_to_string(input) +
                         " and " + shape_to_string(kernel));
    if (kernel[input_channel_axis] != input[3])
        throw ShapeError(std::string(op) + ": kernel " + shape_to_string(kernel) +
                         " does not match input channels of " + shape_to_string(input));
}

}  // namespace

Shape conv2d_output_shape(const Shape& input, const Shape& kernel, std::size_t stride) {
    check_conv_shapes(input, kernel, stride, "conv2d", 2);
    return {input[0], conv_output_size(input[1], stride), conv_output_size(input[2], stride), kernel[3]};
}

Shape deconv2d_output_shape(const Shape& input, const Shape& kernel, std::size_t stride) {
    check_conv_shapes(input, kernel, stride, "deconv2d", 3);
    return {input[0], input[1] * stride, input[2] * stride, kernel[2]};
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, std::size_t stride) {
    Shape out_shape = conv2d_output_shape(input.shape(), kernel.shape(), stride);
    Tensor out(out_shape, 0.0);
    auto g = make_geometry(input.dim(0), input.dim(1), input.dim(2), out_shape[1], out_shape[2], kernel.shape(),
                           stride);
    conv_big_to_small(g, input.data(), kernel.data(), out.data());
    return out;
}

Tensor deconv2d_forward(const Tensor& input, const Tensor& kernel, std::size_t stride) {
    Shape out_shape = deconv2d_output_shape(input.shape(), kernel.shape(), stride);
    Tensor out(out_shape, 0.0);
    auto g = make_geometry(input.dim(0), out_shape[1], out_shape[2], input.dim(1), input.dim(2), kernel.shape(),
                           stride);
    conv_small_to_big(g, input.data(), kernel.data(), out.data());
    return out;
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride) {
    Tensor out = conv2d_forward(input.value(), kernel.value(), stride);
    auto g = make_geometry(input.shape()[0], input.shape()[1], input.shape()[2], out.dim(1), out.dim(2),
                           kernel.shape(), stride);
    return make_op(std::move(out), {input, kernel}, [input, kernel, g](Node& self) {
        if (input.requires_grad())
            conv_small_to_big(g, self.grad->data(), kernel.value().data(), input.node()->ensure_grad().data());
        if (kernel.requires_grad())
            conv_kernel_grad(g, input.value().data(), self.grad->data(), kernel.node()->ensure_grad().data());
    });
}

Var deconv2d(const Var& input, const Var& kernel, std::size_t stride) {
    Tensor out = deconv2d_forward(input.value(), kernel.value(), stride);
    auto g = make_geometry(input.shape()[0], out.dim(1), out.dim(2), input.shape()[1], input.shape()[2],
                           kernel.shape(), stride);
    return make_op(std::move(out), {input, kernel}, [input, kernel, g](Node& self) {
        // The input gradient is a forward conv of the upstream gradient.
        if (input.requires_grad())
            conv_big_to_small(g, self.grad->data(), kernel.value().data(), input.node()->ensure_grad().data());
        if (kernel.requires_grad())
            conv_kernel_grad(g, self.grad->data(), input.value().data(), kernel.node()->ensure_grad().data());
    });
}

}  // namespace dmsc
